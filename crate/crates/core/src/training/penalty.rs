use serde::{Deserialize, Serialize};

use crate::decorrelation::{local_precision, pairs};
use crate::error::{GtmError, Result};
use crate::linalg::Matrix;
use crate::model::GtmModel;
use crate::scalar::Real;

use super::objective::latent_rows;

/// Floor applied to adaptive weights so their reciprocals stay finite.
pub const ADAPTIVE_WEIGHT_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LassoMode {
    #[default]
    None,
    Lasso,
    Adaptive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyConfig<T> {
    /// First-difference ridge on conditioner coefficients.
    pub tau1: T,
    /// Second-difference ridge on conditioner coefficients.
    pub tau2: T,
    /// Group-LASSO strength, active unless `mode` is `None`.
    pub tau3: T,
    /// Second-difference ridge on the marginal log increments.
    pub tau4: T,
    pub mode: LassoMode,
    /// `w_rc` on the strict lower triangle; required in adaptive mode.
    pub adaptive_weights: Option<Matrix<T>>,
    pub epsilon_smooth: T,
}

impl<T: Real> Default for PenaltyConfig<T> {
    fn default() -> Self {
        Self {
            tau1: T::zero(),
            tau2: T::zero(),
            tau3: T::zero(),
            tau4: T::zero(),
            mode: LassoMode::None,
            adaptive_weights: None,
            epsilon_smooth: T::lit(1e-8),
        }
    }
}

impl<T: Real> PenaltyConfig<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau1", self.tau1), ("tau2", self.tau2), ("tau3", self.tau3), ("tau4", self.tau4)] {
            if !v.is_finite() || v < T::zero() {
                return Err(GtmError::config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if !(self.epsilon_smooth >= T::zero()) || !self.epsilon_smooth.is_finite() {
            return Err(GtmError::config("epsilon_smooth must be finite and non-negative"));
        }
        if self.mode == LassoMode::Adaptive {
            let w = self
                .adaptive_weights
                .as_ref()
                .ok_or_else(|| GtmError::config("adaptive LASSO requires adaptive weights"))?;
            if w.rows() != w.cols() {
                return Err(GtmError::config("adaptive weights must be square"));
            }
            if pairs(w.rows()).any(|(r, c)| !(w[(r, c)] > T::zero()) || !w[(r, c)].is_finite()) {
                return Err(GtmError::config("adaptive weights must be finite and positive"));
            }
        }
        Ok(())
    }

    pub fn to_record(&self) -> PenaltyRecord {
        PenaltyRecord {
            tau1: self.tau1.as_f64(),
            tau2: self.tau2.as_f64(),
            tau3: self.tau3.as_f64(),
            tau4: self.tau4.as_f64(),
            mode: self.mode,
            epsilon_smooth: self.epsilon_smooth.as_f64(),
            adaptive_weights: self
                .adaptive_weights
                .as_ref()
                .map(|w| w.to_rows().into_iter().map(|r| r.into_iter().map(Real::as_f64).collect()).collect()),
        }
    }

    pub fn from_record(r: &PenaltyRecord) -> Result<Self> {
        let adaptive_weights = match &r.adaptive_weights {
            Some(rows) => {
                let rows: Vec<Vec<T>> = rows.iter().map(|row| row.iter().map(|&v| T::lit(v)).collect()).collect();
                Some(Matrix::from_rows(&rows)?)
            }
            None => None,
        };
        let p = Self {
            tau1: T::lit(r.tau1),
            tau2: T::lit(r.tau2),
            tau3: T::lit(r.tau3),
            tau4: T::lit(r.tau4),
            mode: r.mode,
            adaptive_weights,
            epsilon_smooth: T::lit(r.epsilon_smooth),
        };
        p.validate()?;
        Ok(p)
    }
}

/// Plain-`f64` form of a [`PenaltyConfig`] for model files and manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRecord {
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub tau4: f64,
    pub mode: LassoMode,
    pub epsilon_smooth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive_weights: Option<Vec<Vec<f64>>>,
}

/// `w_rc = mean_n |p_rc,n|` over the rows of `data` (raw units), floored at
/// [`ADAPTIVE_WEIGHT_FLOOR`]. Symmetric, with a unit diagonal.
pub fn compute_adaptive_weights<T: Real>(model: &GtmModel<T>, data: &Matrix<T>) -> Result<Matrix<T>> {
    if data.rows() == 0 {
        return Err(GtmError::data("adaptive weights need at least one observation"));
    }
    let j = model.dim();
    let zt = latent_rows(model, data);
    let mut w = Matrix::<T>::zeros(j, j);
    for i in 0..zt.rows() {
        let p = local_precision(model.layers(), zt.row(i))?;
        for (r, c) in pairs(j) {
            w[(r, c)] = w[(r, c)] + p.matrix[(r, c)].abs();
        }
    }
    let n = T::from_usize_lossy(data.rows());
    let floor = T::lit(ADAPTIVE_WEIGHT_FLOOR);
    for (r, c) in pairs(j) {
        let v: T = (w[(r, c)] / n).max(floor);
        w[(r, c)] = v;
        w[(c, r)] = v;
    }
    for i in 0..j {
        w[(i, i)] = T::one();
    }
    Ok(w)
}
