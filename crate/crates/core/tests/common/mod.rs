//! Builders and oracles shared by the integration tests.
#![allow(dead_code)]

use gtm_core::decorrelation::{pairs, DecorrelationLayer};
use gtm_core::linalg::Matrix;
use gtm_core::marginal::{MarginalTransform, Standardization, TransformationLayer};
use gtm_core::model::{GtmModel, ModelMeta};
use gtm_core::spline::KnotGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn marginal_grid() -> KnotGrid<f64> {
    KnotGrid::cubic(-15.0, 15.0, 15).unwrap()
}

pub fn cond_grid(p: usize) -> KnotGrid<f64> {
    KnotGrid::cubic(-6.0, 6.0, p).unwrap()
}

pub fn identity_model(j: usize, layers: Vec<DecorrelationLayer<f64>>) -> GtmModel<f64> {
    GtmModel::new(TransformationLayer::identity(j, marginal_grid()).unwrap(), layers, ModelMeta::default()).unwrap()
}

/// Model with jittered marginals, random standardisation and random
/// conditioner coefficients in `±scale`; every second layer flipped.
pub fn random_model(rng: &mut ChaCha8Rng, j: usize, depth: usize, p: usize, scale: f64) -> GtmModel<f64> {
    let transforms = (0..j)
        .map(|_| {
            let id = MarginalTransform::identity(marginal_grid()).unwrap();
            let theta = id.theta().iter().map(|&t| t + rng.random_range(-0.3..0.3)).collect();
            id.with_theta(theta).unwrap()
        })
        .collect();
    let st = (0..j)
        .map(|_| Standardization { mean: rng.random_range(-1.0..1.0), sd: rng.random_range(0.5..2.0), min: -4.0, max: 4.0 })
        .collect();
    let layers = (1..=depth)
        .map(|l| {
            let n = j * (j - 1) / 2 * p;
            let coeffs = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
            DecorrelationLayer::from_coeffs(j, cond_grid(p), coeffs, l % 2 == 0).unwrap()
        })
        .collect();
    GtmModel::new(TransformationLayer::new(transforms, st).unwrap(), layers, ModelMeta::default()).unwrap()
}

pub fn constant_layer(j: usize, p: usize, value: f64, flipped: bool) -> DecorrelationLayer<f64> {
    let mut l = DecorrelationLayer::zeros(j, cond_grid(p), flipped);
    for (r, c) in pairs(j) {
        l.set_constant(r, c, value).unwrap();
    }
    l
}

pub fn normal_data(n: usize, j: usize, seed: u64) -> Matrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_vec(n, j, (0..n * j).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

/// Recursive Cox–de Boor definition of basis function `i` of degree `k`.
pub fn cox_de_boor(knots: &[f64], i: usize, k: usize, x: f64) -> f64 {
    if k == 0 {
        return if knots[i] <= x && x < knots[i + 1] { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = knots[i + k] - knots[i];
    if d1 > 0.0 {
        v += (x - knots[i]) / d1 * cox_de_boor(knots, i, k - 1, x);
    }
    let d2 = knots[i + k + 1] - knots[i + 1];
    if d2 > 0.0 {
        v += (knots[i + k + 1] - x) / d2 * cox_de_boor(knots, i + 1, k - 1, x);
    }
    v
}

/// `ln |det J|` of the full data-to-latent map by central differences.
pub fn fd_log_jacobian(model: &GtmModel<f64>, y: &[f64]) -> f64 {
    let j = y.len();
    let h = 1e-6;
    let mut jac = Matrix::zeros(j, j);
    for c in 0..j {
        let mut yp = y.to_vec();
        let mut ym = y.to_vec();
        yp[c] += h;
        ym[c] -= h;
        let zp = model.forward(&yp).unwrap().z;
        let zm = model.forward(&ym).unwrap().z;
        for r in 0..j {
            jac[(r, c)] = (zp[r] - zm[r]) / (2.0 * h);
        }
    }
    jac.determinant().abs().ln()
}

/// Log density from the finite-difference Jacobian.
pub fn fd_log_density(model: &GtmModel<f64>, y: &[f64]) -> f64 {
    let z = model.forward(y).unwrap().z;
    let q: f64 = z.iter().map(|v| v * v).sum();
    -0.5 * q - 0.5 * z.len() as f64 * (2.0 * std::f64::consts::PI).ln() + fd_log_jacobian(model, y)
}

/// Bivariate normal with unit first variance and correlation `rho`,
/// written as a one-layer linear model.
pub fn correlated_pair(rho: f64) -> GtmModel<f64> {
    // Λ = [[1, 0], [λ, 1]] gives corr(z̃₁, z̃₂) = −λ / sqrt(1 + λ²).
    let lambda = -rho / (1.0 - rho * rho).sqrt();
    identity_model(2, vec![constant_layer(2, 8, lambda, false)])
}

/// `½ ∫∫ |f(a, b) − f(a) f(b)|` for a zero-mean bivariate normal, by the
/// midpoint rule on a dense grid.
pub fn gaussian_iae_oracle(var_a: f64, var_b: f64, cov: f64, half_width: f64, n: usize) -> f64 {
    let det = var_a * var_b - cov * cov;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
    let h = 2.0 * half_width / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let a = -half_width + (i as f64 + 0.5) * h;
        let fa = (-0.5 * a * a / var_a).exp() / (2.0 * std::f64::consts::PI * var_a).sqrt();
        for k in 0..n {
            let b = -half_width + (k as f64 + 0.5) * h;
            let fb = (-0.5 * b * b / var_b).exp() / (2.0 * std::f64::consts::PI * var_b).sqrt();
            let q = (var_b * a * a - 2.0 * cov * a * b + var_a * b * b) / det;
            total += (norm * (-0.5 * q).exp() - fa * fb).abs();
        }
    }
    0.5 * total * h * h
}
