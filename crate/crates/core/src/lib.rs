//! Graphical transformation models.
//!
//! A model maps data `y` to a standard normal latent `z` in two stages: a
//! layer of independent monotone spline transformations followed by a stack
//! of lower-triangular decorrelation layers whose off-diagonal entries are
//! splines of the coordinate they multiply. The core is generic over
//! [`Real`] (`f32` or `f64`); the aliases below fix the scalar.

pub mod benchmark;
pub mod decorrelation;
pub mod error;
pub mod independence;
pub mod linalg;
pub mod marginal;
pub mod model;
pub mod quadrature;
pub mod scalar;
pub mod spline;
pub mod training;

pub use error::{GtmError, Result};
pub use scalar::Real;

pub type KnotGrid = spline::KnotGrid<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type MarginalTransform = marginal::MarginalTransform<f64>;
pub type TransformationLayer = marginal::TransformationLayer<f64>;
pub type DecorrelationLayer = decorrelation::DecorrelationLayer<f64>;
pub type GtmModel = model::GtmModel<f64>;
pub type PenaltyConfig = training::PenaltyConfig<f64>;
pub type FitConfig = training::FitConfig<f64>;

pub type KnotGridF32 = spline::KnotGrid<f32>;
pub type GtmModelF32 = model::GtmModel<f32>;

pub use training::{FitReport, StopReason};

#[cfg(test)]
mod testutil;
