//! The assembled model: transformation layer followed by the decorrelation
//! stack, with log-density, sampling and conditional sampling.

mod io;

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decorrelation::{self, stack_forward_into, DecorrelationLayer};
use crate::error::{GtmError, Result};
use crate::linalg::Matrix;
use crate::marginal::{invert_fit, InverseTransform, TransformationLayer};
use crate::quadrature::gauss_legendre;
use crate::scalar::{log_sum_exp, Real};
use crate::training::PenaltyRecord;

pub use io::FORMAT_VERSION;

/// Grid size used when the marginal inverses are built lazily.
pub const DEFAULT_INVERSE_GRID: usize = 10_000;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub seed: u64,
    /// Penalty configurations used to fit, in stage order.
    pub penalties: Vec<PenaltyRecord>,
}

#[derive(Debug)]
pub struct GtmModel<T> {
    transformation: TransformationLayer<T>,
    layers: Vec<DecorrelationLayer<T>>,
    pub meta: ModelMeta,
    inverse: OnceLock<Vec<InverseTransform<T>>>,
}

impl<T: Clone> Clone for GtmModel<T> {
    fn clone(&self) -> Self {
        Self {
            transformation: self.transformation.clone(),
            layers: self.layers.clone(),
            meta: self.meta.clone(),
            inverse: self.inverse.clone(),
        }
    }
}

impl<T: PartialEq> PartialEq for GtmModel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.transformation == other.transformation && self.layers == other.layers && self.meta == other.meta
    }
}

/// Result of a single forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Forward<T> {
    pub z: Vec<T>,
    pub z_tilde: Vec<T>,
    pub log_jac: T,
}

/// How candidate pairs are weighted in [`GtmModel::conditional_sample`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConditionalWeighting {
    /// Conditional density divided by a kernel estimate of the proposal
    /// density, so the resample targets the conditional distribution.
    #[default]
    ProposalCorrected,
    /// Conditional density alone.
    Raw,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalSample<T> {
    /// `n_accept × 2` matrix of `(y_u, y_v)`.
    pub pairs: Matrix<T>,
    /// `ln f(y_{-uv})` from the quadrature over dimensions `u`, `v`.
    pub log_marginal: T,
    /// Kish effective sample size of the normalised weights.
    pub effective_sample_size: T,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleInfo {
    /// True when this call had to build the marginal inverses.
    pub built_inverse: bool,
    /// Dimensions whose inverse fit fell back to ridge regularisation.
    pub ridge_fallback: Vec<usize>,
}

#[inline]
fn std_normal_log_density<T: Real>(z: &[T]) -> T {
    let sq = z.iter().fold(T::zero(), |s, &v| s + v * v);
    -T::lit(0.5) * sq - T::from_usize_lossy(z.len()) * T::ln_sqrt_2pi()
}

impl<T: Real> GtmModel<T> {
    pub fn new(transformation: TransformationLayer<T>, layers: Vec<DecorrelationLayer<T>>, meta: ModelMeta) -> Result<Self> {
        let j = transformation.dim();
        if let Some(l) = layers.iter().position(|l| l.dim() != j) {
            return Err(GtmError::dim(format!("layer {l} has dimension {} but the model has J = {j}", layers[l].dim())));
        }
        Ok(Self { transformation, layers, meta, inverse: OnceLock::new() })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.transformation.dim()
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn transformation(&self) -> &TransformationLayer<T> {
        &self.transformation
    }

    pub fn layers(&self) -> &[DecorrelationLayer<T>] {
        &self.layers
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut TransformationLayer<T>, &mut Vec<DecorrelationLayer<T>>) {
        self.inverse = OnceLock::new();
        (&mut self.transformation, &mut self.layers)
    }

    fn check_point(&self, y: &[T]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(GtmError::dim(format!("expected {} coordinates, got {}", self.dim(), y.len())));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(GtmError::domain(format!("non-finite input at coordinate {i}")));
        }
        Ok(())
    }

    /// Unchecked forward pass writing `z̃` and `z`; returns the log-Jacobian.
    #[inline]
    pub fn forward_into(&self, y: &[T], z_tilde: &mut [T], z: &mut [T]) -> T {
        let log_jac = self.transformation.forward_into(y, z_tilde);
        stack_forward_into(&self.layers, z_tilde, z);
        log_jac
    }

    pub fn forward(&self, y: &[T]) -> Result<Forward<T>> {
        self.check_point(y)?;
        let j = self.dim();
        let (mut zt, mut z) = (vec![T::zero(); j], vec![T::zero(); j]);
        let log_jac = self.forward_into(y, &mut zt, &mut z);
        Ok(Forward { z, z_tilde: zt, log_jac })
    }

    /// `ln φ_J(z) + Σ ln h'_j − Σ ln sd_j`. Unchecked.
    #[inline]
    pub fn log_density_unchecked(&self, y: &[T]) -> T {
        let j = self.dim();
        let mut zt = [T::zero(); 16];
        let mut z = [T::zero(); 16];
        if j <= 16 {
            let lj = self.forward_into(y, &mut zt[..j], &mut z[..j]);
            std_normal_log_density(&z[..j]) + lj
        } else {
            let (mut zt, mut z) = (vec![T::zero(); j], vec![T::zero(); j]);
            let lj = self.forward_into(y, &mut zt, &mut z);
            std_normal_log_density(&z) + lj
        }
    }

    pub fn log_density(&self, y: &[T]) -> Result<T> {
        self.check_point(y)?;
        Ok(self.log_density_unchecked(y))
    }

    /// Same density computed as `ln φ(Λ(z̃) z̃)` from the assembled matrix.
    pub fn log_density_via_lambda(&self, y: &[T]) -> Result<T> {
        let f = self.forward(y)?;
        let lam = decorrelation::joint_lambda(&self.layers, &f.z_tilde)?;
        Ok(std_normal_log_density(&lam.matvec(&f.z_tilde)) + f.log_jac)
    }

    /// Log-densities of every row, evaluated in parallel.
    pub fn log_density_rows(&self, data: &Matrix<T>) -> Result<Vec<T>> {
        if data.cols() != self.dim() {
            return Err(GtmError::dim(format!("data has {} columns but the model has J = {}", data.cols(), self.dim())));
        }
        if let Some(i) = data.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(GtmError::domain(format!("non-finite value at row {}", i / self.dim())));
        }
        Ok((0..data.rows()).into_par_iter().map(|i| self.log_density_unchecked(data.row(i))).collect())
    }

    /// Density of the latent `z̃ = h(y)`: the stack has unit Jacobian, so
    /// this is just `ln φ_J(stack(z̃))`.
    #[inline]
    pub fn latent_log_density_unchecked(&self, z_tilde: &[T]) -> T {
        let j = self.dim();
        let mut z = [T::zero(); 16];
        if j <= 16 {
            stack_forward_into(&self.layers, z_tilde, &mut z[..j]);
            std_normal_log_density(&z[..j])
        } else {
            let mut z = vec![T::zero(); j];
            stack_forward_into(&self.layers, z_tilde, &mut z);
            std_normal_log_density(&z)
        }
    }

    pub fn latent_log_density(&self, z_tilde: &[T]) -> Result<T> {
        self.check_point(z_tilde)?;
        Ok(self.latent_log_density_unchecked(z_tilde))
    }

    /// Builds (once) and returns the per-dimension marginal inverses.
    pub fn inverse_transforms(&self) -> Result<&[InverseTransform<T>]> {
        if let Some(inv) = self.inverse.get() {
            return Ok(inv);
        }
        let built = self.build_inverse(DEFAULT_INVERSE_GRID)?;
        Ok(self.inverse.get_or_init(|| built))
    }

    pub fn inverse_ready(&self) -> bool {
        self.inverse.get().is_some()
    }

    fn build_inverse(&self, grid_size: usize) -> Result<Vec<InverseTransform<T>>> {
        let t = &self.transformation;
        (0..self.dim())
            .map(|j| {
                let st = t.standardization()[j];
                let (lo, hi) = (st.apply(st.min), st.apply(st.max));
                let pad = (hi - lo).max(T::lit(1e-6)) * T::lit(0.1);
                invert_fit(t.transform(j), grid_size, lo - pad, hi + pad)
            })
            .collect()
    }

    /// Maps latent `z̃` rows back to data space through the marginal inverses.
    pub fn latent_to_data(&self, z_tilde: &[T]) -> Result<Vec<T>> {
        let inv = self.inverse_transforms()?;
        let st = self.transformation.standardization();
        Ok(z_tilde.iter().enumerate().map(|(j, &v)| st[j].undo(inv[j].eval(v))).collect())
    }

    fn normal_draws(&self, n: usize, seed: u64) -> Vec<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * self.dim()).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect()
    }

    /// `n` draws of `z̃`: standard normal `z` pushed through the inverse stack.
    pub fn sample_latent(&self, n: usize, seed: u64) -> Result<Matrix<T>> {
        let z = self.normal_draws(n, seed);
        let j = self.dim();
        let rows: Vec<T> = z
            .par_chunks(j.max(1))
            .map(|zr| decorrelation::stack_inverse(&self.layers, zr))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        Matrix::from_vec(n, j, rows)
    }

    /// `n` draws from the model in data units. Deterministic given `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Matrix<T>> {
        self.sample_with_info(n, seed).map(|(m, _)| m)
    }

    pub fn sample_with_info(&self, n: usize, seed: u64) -> Result<(Matrix<T>, SampleInfo)> {
        let built_inverse = !self.inverse_ready();
        let inv = self.inverse_transforms()?;
        let info = SampleInfo {
            built_inverse,
            ridge_fallback: inv.iter().enumerate().filter(|(_, i)| i.ridge_fallback()).map(|(j, _)| j).collect(),
        };
        let latent = self.sample_latent(n, seed)?;
        let j = self.dim();
        let st = self.transformation.standardization();
        let data: Vec<T> = latent
            .as_slice()
            .par_chunks(j.max(1))
            .flat_map_iter(|zt| zt.iter().enumerate().map(|(k, &v)| st[k].undo(inv[k].eval(v))).collect::<Vec<_>>())
            .collect();
        Ok((Matrix::from_vec(n, j, data)?, info))
    }

    /// Data-space bounds `mean + sd·[lower, upper]` of dimension `j`'s grid.
    pub fn data_span(&self, j: usize) -> (T, T) {
        let st = self.transformation.standardization()[j];
        let g = self.transformation.transform(j).grid();
        (st.undo(g.lower()), st.undo(g.upper()))
    }

    /// Draws `(y_u, y_v)` from the model's conditional distribution given the
    /// remaining coordinates of `anchor`.
    ///
    /// Candidates pair independent model draws of `y_u` and `y_v`; each is
    /// weighted by `f(y_u, y_v | y_{-uv})` (the quadrature marginal
    /// normalises it) and the accepted set is a multinomial resample.
    #[allow(clippy::too_many_arguments)]
    pub fn conditional_sample(
        &self,
        anchor: &[T],
        u: usize,
        v: usize,
        n_candidates: usize,
        n_accept: usize,
        seed: u64,
        quad_n: usize,
        weighting: ConditionalWeighting,
    ) -> Result<ConditionalSample<T>> {
        self.check_point(anchor)?;
        let j = self.dim();
        if u == v || u >= j || v >= j {
            return Err(GtmError::domain(format!("need two distinct dimensions below {j}, got u = {u}, v = {v}")));
        }
        if n_accept > n_candidates {
            return Err(GtmError::domain(format!(
                "n_accept ({n_accept}) cannot exceed n_candidates ({n_candidates})"
            )));
        }
        if n_candidates == 0 {
            return Err(GtmError::domain("n_candidates must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s_u = self.sample(n_candidates, rng.random())?;
        let s_v = self.sample(n_candidates, rng.random())?;
        let cu = s_u.column(u);
        let cv = s_v.column(v);

        let (lo_u, hi_u) = self.data_span(u);
        let (lo_v, hi_v) = self.data_span(v);
        let qu = gauss_legendre(quad_n, lo_u, hi_u)?;
        let qv = gauss_legendre(quad_n, lo_v, hi_v)?;
        let mut y = anchor.to_vec();
        let mut terms = Vec::with_capacity(quad_n * quad_n);
        for (a, &wa) in qu.nodes.iter().zip(&qu.weights) {
            for (b, &wb) in qv.nodes.iter().zip(&qv.weights) {
                y[u] = *a;
                y[v] = *b;
                terms.push(self.log_density_unchecked(&y) + (wa * wb).ln());
            }
        }
        let log_marginal = log_sum_exp(terms.iter().copied());
        if !log_marginal.is_finite() {
            return Err(GtmError::Sampling(format!(
                "anchor lies in a region of negligible density (log marginal {log_marginal})"
            )));
        }

        let log_prop = match weighting {
            ConditionalWeighting::ProposalCorrected => {
                let ku = kde_log_density(&cu);
                let kv = kde_log_density(&cv);
                ku.iter().zip(&kv).map(|(a, b)| *a + *b).collect()
            }
            ConditionalWeighting::Raw => vec![T::zero(); n_candidates],
        };
        let log_w: Vec<T> = (0..n_candidates)
            .map(|i| {
                let mut y = anchor.to_vec();
                y[u] = cu[i];
                y[v] = cv[i];
                self.log_density_unchecked(&y) - log_marginal - log_prop[i]
            })
            .collect();
        let max = log_w.iter().copied().filter(|w| w.is_finite()).fold(T::neg_infinity(), T::max);
        if !max.is_finite() {
            return Err(GtmError::Sampling(format!(
                "all {n_candidates} candidate weights are zero; anchor {:?} has negligible conditional density",
                anchor.iter().map(|v| v.as_f64()).collect::<Vec<_>>()
            )));
        }
        let w: Vec<f64> = log_w.iter().map(|&l| if l.is_finite() { (l - max).exp().as_f64() } else { 0.0 }).collect();
        let total: f64 = w.iter().sum();
        let ess = total * total / w.iter().map(|x| x * x).sum::<f64>();
        let mut cumulative = Vec::with_capacity(n_candidates);
        let mut acc = 0.0;
        for x in &w {
            acc += x / total;
            cumulative.push(acc);
        }
        let mut pairs = Matrix::zeros(n_accept, 2);
        for k in 0..n_accept {
            let r: f64 = rng.random();
            let idx = cumulative.partition_point(|&c| c < r).min(n_candidates - 1);
            pairs[(k, 0)] = cu[idx];
            pairs[(k, 1)] = cv[idx];
        }
        Ok(ConditionalSample { pairs, log_marginal, effective_sample_size: T::lit(ess) })
    }
}

/// Gaussian kernel density estimate with Silverman's bandwidth, evaluated at
/// the sample points themselves (log scale). Kernels are cut at 6 bandwidths.
fn kde_log_density<T: Real>(xs: &[T]) -> Vec<T> {
    let n = xs.len();
    let v: Vec<f64> = xs.iter().map(|x| x.as_f64()).collect();
    let mean = v.iter().sum::<f64>() / n as f64;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64).sqrt();
    let mut sorted = v.clone();
    sorted.sort_by(f64::total_cmp);
    let iqr = sorted[(3 * n) / 4] - sorted[n / 4];
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = (0.9 * spread * (n as f64).powf(-0.2)).max(1e-12);
    let cut = 6.0 * h;
    let norm = (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt()).ln();
    v.iter()
        .map(|&x| {
            let lo = sorted.partition_point(|&s| s < x - cut);
            let hi = sorted.partition_point(|&s| s <= x + cut);
            let s: f64 = sorted[lo..hi].iter().map(|&s| (-0.5 * ((x - s) / h).powi(2)).exp()).sum();
            T::lit(s.ln() - norm)
        })
        .collect()
}
