//! Conditional-independence metrics between pairs of dimensions.
//!
//! For every pair `(u, v)` and model sample `x`, the conditional density of
//! `(x_u, x_v)` given the rest is compared with the product of its two
//! conditional margins. The needed marginals of the conditioning set come
//! from Gauss–Legendre quadrature over `x_u` and/or `x_v`; everything is
//! accumulated in log space.
//!
//! * KLD: mean of `ln f + ln f_{-uv} - ln f_{-u} - ln f_{-v}`.
//! * IAE: mean of `max(0, 1 - f_{-u} f_{-v} / (f f_{-uv}))`, clamped to `[0, 1]`.
//!
//! Here `f_{-u}` is the density with `x_u` integrated out. The conditional
//! pair density and the product of its margins both integrate to one, so
//! half their integrated absolute difference equals the integrated positive
//! part. Its terms are bounded, unlike the plain `½ |1 - ratio|` form
//! ([`IaeForm::HalfAbsolute`]), whose variance is infinite already for a
//! Gaussian pair with correlation 0.5.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decorrelation::{local_precision, local_pseudo_correlation};
use crate::error::{GtmError, Result};
use crate::linalg::Matrix;
use crate::model::GtmModel;
use crate::quadrature::{gauss_legendre, QuadratureRule};
use crate::scalar::{log_sum_exp, Real};

/// Where the densities are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSpace {
    /// On `z̃`, after the transformation layer.
    #[default]
    Latent,
    /// On the original data scale.
    Data,
}

/// Per-sample IAE term; both have the same expectation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IaeForm {
    /// `max(0, 1 - ratio)`.
    #[default]
    PositivePart,
    /// `½ |1 - ratio|`.
    HalfAbsolute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    /// 0-based dimension indices, `u < v`.
    pub u: usize,
    pub v: usize,
    pub kld: f64,
    /// Monte Carlo standard error of `kld`.
    pub kld_se: f64,
    pub iae: f64,
    pub mean_abs_p: f64,
    pub mean_abs_rho: f64,
    /// Samples dropped for this pair because a density was not finite.
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub dim: usize,
    pub pairs: Vec<PairMetrics>,
    pub samples: usize,
    pub quad_n: usize,
    pub space: EvalSpace,
    /// Set when any pair excluded more than 1% of the samples.
    pub warning: bool,
}

impl IndependenceReport {
    pub fn pair(&self, u: usize, v: usize) -> Option<&PairMetrics> {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        self.pairs.iter().find(|p| p.u == a && p.v == b)
    }
}

/// Per-pair averages of the local pseudo-precision and pseudo-correlation.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSummary {
    pub mean_abs_p: Matrix<f64>,
    pub mean_abs_rho: Matrix<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Undirected graph on dimensions `0..nodes`.
#[derive(Clone, Debug, PartialEq)]
pub struct DependencyGraph {
    pub nodes: usize,
    pub edges: Vec<Edge>,
}

/// Quadrature bounds for dimension `j` in the requested space.
fn bounds<T: Real>(model: &GtmModel<T>, j: usize, space: EvalSpace) -> (T, T) {
    match space {
        EvalSpace::Latent => {
            let g = model.transformation().transform(j).grid();
            (g.lower(), g.upper())
        }
        EvalSpace::Data => model.data_span(j),
    }
}

#[inline]
fn log_density<T: Real>(model: &GtmModel<T>, x: &[T], space: EvalSpace) -> T {
    match space {
        EvalSpace::Latent => model.latent_log_density_unchecked(x),
        EvalSpace::Data => model.log_density_unchecked(x),
    }
}

struct Rules<T> {
    rules: Vec<QuadratureRule<T>>,
    log_w: Vec<Vec<T>>,
}

impl<T: Real> Rules<T> {
    fn new(model: &GtmModel<T>, quad_n: usize, space: EvalSpace) -> Result<Self> {
        let rules: Vec<_> = (0..model.dim())
            .map(|j| {
                let (a, b) = bounds(model, j, space);
                gauss_legendre(quad_n, a, b)
            })
            .collect::<Result<_>>()?;
        let log_w = rules.iter().map(|r| r.log_weights()).collect();
        Ok(Self { rules, log_w })
    }
}

/// Log densities needed for one sample and pair.
struct PairTerms<T> {
    f: T,
    f_uv: T,
    f_u: T,
    f_v: T,
}

fn pair_terms<T: Real>(model: &GtmModel<T>, x: &[T], u: usize, v: usize, rules: &Rules<T>, space: EvalSpace, f: T) -> PairTerms<T> {
    let (ru, rv) = (&rules.rules[u], &rules.rules[v]);
    let (lu, lv) = (&rules.log_w[u], &rules.log_w[v]);
    let mut y = x.to_vec();
    let mut buf = Vec::with_capacity(ru.len() * rv.len());
    for (a, &la) in ru.nodes.iter().zip(lu) {
        y[u] = *a;
        for (b, &lb) in rv.nodes.iter().zip(lv) {
            y[v] = *b;
            buf.push(log_density(model, &y, space) + la + lb);
        }
    }
    let f_uv = log_sum_exp(buf.iter().copied());
    buf.clear();
    y[v] = x[v];
    for (a, &la) in ru.nodes.iter().zip(lu) {
        y[u] = *a;
        buf.push(log_density(model, &y, space) + la);
    }
    let f_u = log_sum_exp(buf.iter().copied());
    buf.clear();
    y[u] = x[u];
    for (b, &lb) in rv.nodes.iter().zip(lv) {
        y[v] = *b;
        buf.push(log_density(model, &y, space) + lb);
    }
    let f_v = log_sum_exp(buf.iter().copied());
    PairTerms { f, f_uv, f_u, f_v }
}

/// `(kld term, iae term)`, or `None` when any density is not finite.
fn contributions<T: Real>(t: &PairTerms<T>, form: IaeForm) -> Option<(f64, f64)> {
    let (f, f_uv, f_u, f_v) = (t.f.as_f64(), t.f_uv.as_f64(), t.f_u.as_f64(), t.f_v.as_f64());
    if ![f, f_uv, f_u, f_v].iter().all(|v| v.is_finite()) {
        return None;
    }
    let log_ratio = f + f_uv - f_u - f_v;
    let d = 1.0 - (-log_ratio).exp();
    let iae = match form {
        IaeForm::PositivePart => d.max(0.0),
        IaeForm::HalfAbsolute => 0.5 * d.abs(),
    };
    iae.is_finite().then_some((log_ratio, iae))
}

#[derive(Default, Clone, Copy)]
struct Acc {
    n: usize,
    kld: f64,
    kld_sq: f64,
    iae: f64,
}

/// KLD/IAE for pair `(u, v)` (in that order) over a fixed sample set.
/// Returns `(kld, kld_se, iae, excluded)`.
pub fn pair_estimate<T: Real>(
    model: &GtmModel<T>,
    samples: &Matrix<T>,
    u: usize,
    v: usize,
    quad_n: usize,
    space: EvalSpace,
    form: IaeForm,
) -> Result<(f64, f64, f64, usize)> {
    let rules = Rules::new(model, quad_n, space)?;
    let acc = estimate_pairs(model, samples, &[(u, v)], &rules, space, form);
    Ok(finish(acc[0], samples.rows()))
}

fn estimate_pairs<T: Real>(
    model: &GtmModel<T>,
    samples: &Matrix<T>,
    pairs: &[(usize, usize)],
    rules: &Rules<T>,
    space: EvalSpace,
    form: IaeForm,
) -> Vec<Acc> {
    let per_sample: Vec<Vec<Option<(f64, f64)>>> = (0..samples.rows())
        .into_par_iter()
        .map(|i| {
            let x = samples.row(i);
            let f = log_density(model, x, space);
            pairs
                .iter()
                .map(|&(u, v)| if f.is_finite() { contributions(&pair_terms(model, x, u, v, rules, space, f), form) } else { None })
                .collect()
        })
        .collect();
    let mut acc = vec![Acc::default(); pairs.len()];
    for row in &per_sample {
        for (a, c) in acc.iter_mut().zip(row) {
            if let Some((k, i)) = c {
                a.n += 1;
                a.kld += k;
                a.kld_sq += k * k;
                a.iae += i;
            }
        }
    }
    acc
}

fn finish(a: Acc, total: usize) -> (f64, f64, f64, usize) {
    if a.n == 0 {
        return (f64::NAN, f64::NAN, f64::NAN, total);
    }
    let n = a.n as f64;
    let mean = a.kld / n;
    let var = if a.n > 1 { ((a.kld_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    (mean, (var / n).sqrt(), (a.iae / n).clamp(0.0, 1.0), total - a.n)
}

fn local_means<T: Real>(model: &GtmModel<T>, latent: &Matrix<T>) -> Result<LocalSummary> {
    let j = model.dim();
    let per: Vec<(Matrix<T>, Matrix<T>)> = (0..latent.rows())
        .into_par_iter()
        .map(|i| {
            let p = local_precision(model.layers(), latent.row(i))?;
            let rho = local_pseudo_correlation(&p)?;
            Ok((p.matrix, rho))
        })
        .collect::<Result<_>>()?;
    let mut mp = Matrix::zeros(j, j);
    let mut mr = Matrix::zeros(j, j);
    for (p, rho) in &per {
        for a in 0..j {
            for b in 0..j {
                mp[(a, b)] += p[(a, b)].abs().as_f64();
                mr[(a, b)] += rho[(a, b)].abs().as_f64();
            }
        }
    }
    let n = latent.rows().max(1) as f64;
    for a in 0..j {
        for b in 0..j {
            mp[(a, b)] /= n;
            mr[(a, b)] /= n;
        }
    }
    Ok(LocalSummary { mean_abs_p: mp, mean_abs_rho: mr })
}

/// Mean `|p_uv|` and `|ρ_uv|` of the local pseudo-precision over `s` latent
/// model samples (the same draws [`ci_metrics`] uses for a given seed).
pub fn summarize_local<T: Real>(model: &GtmModel<T>, s: usize, seed: u64) -> Result<LocalSummary> {
    if s < 100 {
        return Err(GtmError::Metric(format!("need at least 100 samples, got {s}")));
    }
    local_means(model, &model.sample_latent(s, seed)?)
}

/// Pairwise KLD and IAE for every pair, plus local precision summaries.
pub fn ci_metrics<T: Real>(model: &GtmModel<T>, s: usize, quad_n: usize, space: EvalSpace, seed: u64) -> Result<IndependenceReport> {
    ci_metrics_with(model, s, quad_n, space, seed, IaeForm::default())
}

pub fn ci_metrics_with<T: Real>(
    model: &GtmModel<T>,
    s: usize,
    quad_n: usize,
    space: EvalSpace,
    seed: u64,
    form: IaeForm,
) -> Result<IndependenceReport> {
    if s < 100 {
        return Err(GtmError::Metric(format!("need at least 100 samples, got {s}")));
    }
    if quad_n < 8 {
        return Err(GtmError::Metric(format!("need at least 8 quadrature nodes, got {quad_n}")));
    }
    let j = model.dim();
    let latent = model.sample_latent(s, seed)?;
    let summary = local_means(model, &latent)?;
    let samples = match space {
        EvalSpace::Latent => latent,
        EvalSpace::Data => {
            model.inverse_transforms()?;
            let rows: Vec<T> = (0..s)
                .into_par_iter()
                .map(|i| model.latent_to_data(latent.row(i)))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            Matrix::from_vec(s, j, rows)?
        }
    };
    let rules = Rules::new(model, quad_n, space)?;
    let pairs: Vec<(usize, usize)> = (0..j).flat_map(|u| (u + 1..j).map(move |v| (u, v))).collect();
    let acc = estimate_pairs(model, &samples, &pairs, &rules, space, form);
    let mut out = Vec::with_capacity(pairs.len());
    let mut warning = false;
    for (&(u, v), a) in pairs.iter().zip(acc) {
        let (kld, kld_se, iae, excluded) = finish(a, s);
        warning |= excluded as f64 > 0.01 * s as f64;
        out.push(PairMetrics {
            u,
            v,
            kld,
            kld_se,
            iae,
            mean_abs_p: summary.mean_abs_p[(v, u)],
            mean_abs_rho: summary.mean_abs_rho[(v, u)],
            excluded,
        });
    }
    Ok(IndependenceReport { dim: j, pairs: out, samples: s, quad_n, space, warning })
}

/// Local KLD and IAE of pair `(u, v)` with the other coordinates fixed at
/// `point`, by two-dimensional quadrature of the conditional density.
pub fn local_pair_metrics<T: Real>(
    model: &GtmModel<T>,
    point: &[T],
    u: usize,
    v: usize,
    quad_n: usize,
    space: EvalSpace,
) -> Result<(f64, f64)> {
    let rules = Rules::new(model, quad_n, space)?;
    let (ru, rv) = (&rules.rules[u], &rules.rules[v]);
    let mut y = point.to_vec();
    let mut grid = Vec::with_capacity(ru.len() * rv.len());
    for a in &ru.nodes {
        y[u] = *a;
        for b in &rv.nodes {
            y[v] = *b;
            grid.push(log_density(model, &y, space).as_f64());
        }
    }
    let (nu, nv) = (ru.len(), rv.len());
    let wu: Vec<f64> = ru.weights.iter().map(|w| w.as_f64()).collect();
    let wv: Vec<f64> = rv.weights.iter().map(|w| w.as_f64()).collect();
    let max = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(GtmError::Metric("conditioning point has negligible density".into()));
    }
    let joint: Vec<f64> = grid.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = (0..nu).flat_map(|a| (0..nv).map(move |b| (a, b))).map(|(a, b)| wu[a] * wv[b] * joint[a * nv + b]).sum();
    let cond: Vec<f64> = joint.iter().map(|x| x / total).collect();
    let mu: Vec<f64> = (0..nu).map(|a| (0..nv).map(|b| wv[b] * cond[a * nv + b]).sum()).collect();
    let mv: Vec<f64> = (0..nv).map(|b| (0..nu).map(|a| wu[a] * cond[a * nv + b]).sum()).collect();
    let (mut kld, mut iae) = (0.0, 0.0);
    for a in 0..nu {
        for b in 0..nv {
            let c = cond[a * nv + b];
            let p = mu[a] * mv[b];
            let w = wu[a] * wv[b];
            if c > 0.0 && p > 0.0 {
                kld += w * c * (c / p).ln();
            }
            iae += w * (c - p).abs();
        }
    }
    Ok((kld, (0.5 * iae).clamp(0.0, 1.0)))
}

/// Edges for every pair with `iae >= threshold`, weighted by the IAE.
pub fn graph_extract(report: &IndependenceReport, threshold: f64) -> Result<DependencyGraph> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(GtmError::domain(format!("threshold must lie in [0, 1], got {threshold}")));
    }
    let edges = report
        .pairs
        .iter()
        .filter(|p| p.iae >= threshold)
        .map(|p| Edge { u: p.u, v: p.v, weight: p.iae })
        .collect();
    Ok(DependencyGraph { nodes: report.dim, edges })
}

/// Pair table with 1-based dimension indices.
pub fn pair_metrics_csv(report: &IndependenceReport) -> String {
    let mut s = String::from("u,v,kld,iae,mean_abs_p,mean_abs_rho\n");
    for p in &report.pairs {
        let _ = writeln!(s, "{},{},{},{},{},{}", p.u + 1, p.v + 1, p.kld, p.iae, p.mean_abs_p, p.mean_abs_rho);
    }
    s
}

/// Edge list with 1-based node indices.
pub fn edge_list_csv(graph: &DependencyGraph) -> String {
    let mut s = String::from("u,v,weight\n");
    for e in &graph.edges {
        let _ = writeln!(s, "{},{},{}", e.u + 1, e.v + 1, e.weight);
    }
    s
}

/// Undirected DOT graph; nodes are named by 1-based dimension index.
pub fn to_dot(graph: &DependencyGraph) -> String {
    let mut s = String::from("graph dependencies {\n");
    for n in 0..graph.nodes {
        let _ = writeln!(s, "  {};", n + 1);
    }
    for e in &graph.edges {
        let _ = writeln!(s, "  {} -- {} [weight={:.6}, label=\"{:.3}\"];", e.u + 1, e.v + 1, e.weight, e.weight);
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decorrelation::DecorrelationLayer;
    use crate::testutil::{constant_layer, identity_model, random_model};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn report_with(iaes: &[((usize, usize), f64)]) -> IndependenceReport {
        IndependenceReport {
            dim: 3,
            pairs: iaes
                .iter()
                .map(|&((u, v), iae)| PairMetrics { u, v, kld: 0.0, kld_se: 0.0, iae, mean_abs_p: 0.0, mean_abs_rho: 0.0, excluded: 0 })
                .collect(),
            samples: 100,
            quad_n: 20,
            space: EvalSpace::Latent,
            warning: false,
        }
    }

    #[test]
    fn graph_thresholds() {
        let r = report_with(&[((0, 1), 0.25), ((0, 2), 0.05), ((1, 2), 0.12)]);
        let g = graph_extract(&r, 0.1).unwrap();
        let e: Vec<_> = g.edges.iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(e, vec![(0, 1), (1, 2)]);
        assert_eq!(graph_extract(&r, 0.0).unwrap().edges.len(), 3);
        assert!(graph_extract(&r, 1.0).unwrap().edges.is_empty());
        assert!(graph_extract(&r, 1.5).is_err());
        let dot = to_dot(&g);
        assert!(dot.contains("1 -- 2") && dot.contains("2 -- 3") && !dot.contains("1 -- 3"));
        assert_eq!(edge_list_csv(&g).lines().count(), 3);
        assert_eq!(pair_metrics_csv(&r).lines().next().unwrap(), "u,v,kld,iae,mean_abs_p,mean_abs_rho");
    }

    #[test]
    fn independent_model_has_no_dependence() {
        let m = identity_model(3, vec![DecorrelationLayer::zeros(3, crate::testutil::cond_grid(8), false)]);
        let r = ci_metrics(&m, 1000, 20, EvalSpace::Latent, 1).unwrap();
        assert_eq!(r.pairs.len(), 3);
        for p in &r.pairs {
            assert!(p.kld.abs() <= 0.01 && p.iae <= 0.01, "{p:?}");
            assert_eq!(p.mean_abs_p, 0.0);
            assert_eq!(p.mean_abs_rho, 0.0);
        }
        assert!(!r.warning);
    }

    #[test]
    fn local_summary_of_constant_model() {
        let m = identity_model(2, vec![constant_layer(2, 8, 0.5, false)]);
        let s = summarize_local(&m, 200, 3).unwrap();
        assert!((s.mean_abs_p[(1, 0)] - 0.5).abs() < 1e-14);
        assert!(summarize_local(&m, 50, 3).is_err());
    }

    #[test]
    fn local_summary_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_model(&mut rng, 4, 3, 8, 0.4);
        let s = summarize_local(&m, 150, 9).unwrap();
        let latent = m.sample_latent(150, 9).unwrap();
        for (u, v) in [(1, 0), (3, 1), (2, 0)] {
            let (mut bp, mut br) = (0.0, 0.0);
            for i in 0..150 {
                let p = local_precision(m.layers(), latent.row(i)).unwrap();
                let rho = local_pseudo_correlation(&p).unwrap();
                bp += p.matrix[(u, v)].abs();
                br += rho[(u, v)].abs();
            }
            assert!((s.mean_abs_p[(u, v)] - bp / 150.0).abs() <= 1e-10);
            assert!((s.mean_abs_rho[(u, v)] - br / 150.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn iae_is_symmetric_in_the_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_model(&mut rng, 3, 2, 8, 0.4);
        let samples = m.sample_latent(200, 6).unwrap();
        for form in [IaeForm::PositivePart, IaeForm::HalfAbsolute] {
            let a = pair_estimate(&m, &samples, 0, 2, 16, EvalSpace::Latent, form).unwrap();
            let b = pair_estimate(&m, &samples, 2, 0, 16, EvalSpace::Latent, form).unwrap();
            assert!((a.2 - b.2).abs() <= 1e-6);
            assert!((a.0 - b.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn block_model_separates_pairs() {
        let mut l = DecorrelationLayer::zeros(3, crate::testutil::cond_grid(8), false);
        l.set_constant(1, 0, 0.8).unwrap();
        let m = identity_model(3, vec![l]);
        let r = ci_metrics(&m, 1000, 20, EvalSpace::Latent, 2).unwrap();
        let dep = r.pair(0, 1).unwrap().iae;
        for (u, v) in [(0, 2), (1, 2)] {
            let p = r.pair(u, v).unwrap();
            assert!(p.iae <= 0.02 && dep >= 5.0 * p.iae.max(1e-3), "{p:?} vs {dep}");
        }
    }

    #[test]
    fn data_space_agrees_with_latent_for_identity_marginals() {
        let m = identity_model(2, vec![constant_layer(2, 8, -0.5, false)]);
        let a = ci_metrics(&m, 300, 30, EvalSpace::Latent, 3).unwrap();
        let b = ci_metrics(&m, 300, 30, EvalSpace::Data, 3).unwrap();
        assert!((a.pairs[0].kld - b.pairs[0].kld).abs() < 1e-3);
        assert!((a.pairs[0].iae - b.pairs[0].iae).abs() < 1e-3);
    }

    #[test]
    fn local_metrics_vanish_for_independence() {
        let m = identity_model(3, vec![constant_layer(3, 8, 0.0, false)]);
        let (k, i) = local_pair_metrics(&m, &[0.1, 0.2, 0.3], 0, 1, 30, EvalSpace::Latent).unwrap();
        assert!(k.abs() < 1e-10 && i < 1e-10);
        let dep = identity_model(2, vec![constant_layer(2, 8, 0.5, false)]);
        let (k, _) = local_pair_metrics(&dep, &[0.0, 0.0], 0, 1, 60, EvalSpace::Latent).unwrap();
        // J = 2: the local KLD is the mutual information of the pair.
        let rho2: f64 = 0.5f64.powi(2) / 1.25;
        assert!((k + 0.5 * (1.0 - rho2).ln()).abs() < 1e-3, "{k}");
    }

    #[test]
    fn iae_forms_share_their_expectation() {
        // Correlation 0.3 keeps the variance of the absolute form finite.
        let lambda = -0.3 / (1.0f64 - 0.09).sqrt();
        let m = identity_model(2, vec![constant_layer(2, 8, lambda, false)]);
        let a = ci_metrics_with(&m, 20_000, 30, EvalSpace::Latent, 4, IaeForm::PositivePart).unwrap();
        let b = ci_metrics_with(&m, 20_000, 30, EvalSpace::Latent, 4, IaeForm::HalfAbsolute).unwrap();
        assert!((a.pairs[0].iae - b.pairs[0].iae).abs() < 0.01, "{} vs {}", a.pairs[0].iae, b.pairs[0].iae);
        assert_eq!(a.pairs[0].kld, b.pairs[0].kld);
    }

    #[test]
    fn preconditions() {
        let m = identity_model(2, vec![]);
        assert!(matches!(ci_metrics(&m, 50, 20, EvalSpace::Latent, 1), Err(GtmError::Metric(_))));
        assert!(matches!(ci_metrics(&m, 200, 4, EvalSpace::Latent, 1), Err(GtmError::Metric(_))));
    }
}
