//! Random model builders shared by unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::decorrelation::{pairs, DecorrelationLayer};
use crate::linalg::Matrix;
use crate::marginal::{MarginalTransform, Standardization, TransformationLayer};
use crate::model::{GtmModel, ModelMeta};
use crate::spline::KnotGrid;

pub fn marginal_grid() -> KnotGrid<f64> {
    KnotGrid::cubic(-15.0, 15.0, 15).unwrap()
}

pub fn cond_grid(p: usize) -> KnotGrid<f64> {
    KnotGrid::cubic(-6.0, 6.0, p).unwrap()
}

pub fn identity_model(j: usize, layers: Vec<DecorrelationLayer<f64>>) -> GtmModel<f64> {
    GtmModel::new(TransformationLayer::identity(j, marginal_grid()).unwrap(), layers, ModelMeta::default()).unwrap()
}

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
            let g = cond_grid(p);
            let n = j * (j - 1) / 2 * p;
            DecorrelationLayer::from_coeffs(j, g, (0..n).map(|_| rng.random_range(-scale..scale)).collect(), l % 2 == 0)
                .unwrap()
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
