//! Penalised maximum-likelihood fitting.
//!
//! Fitting runs in two stages: every marginal transform is pretrained on its
//! own column, then all parameters are optimised jointly with L-BFGS starting
//! from zero conditioners (the independence model). A seeded validation split
//! drives early stopping and hyperparameter selection.

pub mod lbfgs;
mod objective;
mod penalty;
mod report;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decorrelation::DecorrelationLayer;
use crate::error::{GtmError, Result};
use crate::linalg::Matrix;
use crate::marginal::{pretrain_marginal_with, pretrain_options, Standardization, TransformationLayer};
use crate::model::{GtmModel, ModelMeta};
use crate::scalar::Real;
use crate::spline::KnotGrid;

pub use lbfgs::{IterControl, LbfgsOptions, LbfgsOutcome, LbfgsStop};
pub use objective::{group_lasso_penalty, latent_rows, spline_penalty, Objective, ObjectiveParts, ParamLayout, CHUNK};
pub use penalty::{compute_adaptive_weights, LassoMode, PenaltyConfig, PenaltyRecord, ADAPTIVE_WEIGHT_FLOOR};
pub use report::{FitReport, StopReason};

/// Architecture of the model to fit.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig<T> {
    /// Number of decorrelation layers `L`.
    pub num_layers: usize,
    /// Basis functions per marginal transform.
    pub marginal_knots: usize,
    /// Marginal span in standardised units.
    pub marginal_span: (T, T),
    pub conditioner_knots: usize,
    pub conditioner_span: (T, T),
    /// Constant conditioners: one free scalar per pair and layer.
    pub tied: bool,
}

impl<T: Real> Default for ModelConfig<T> {
    fn default() -> Self {
        Self {
            num_layers: 3,
            marginal_knots: 15,
            marginal_span: (T::lit(-15.0), T::lit(15.0)),
            conditioner_knots: 40,
            conditioner_span: (T::lit(-15.0), T::lit(15.0)),
            tied: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig<T> {
    pub max_iters: usize,
    pub grad_tol: T,
    pub rel_obj_tol: T,
    /// Fraction of rows held out for early stopping, in `[0, 0.5)`.
    pub validation_fraction: f64,
    /// Iterations without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub lbfgs_memory: usize,
    pub pretrain_max_iters: usize,
}

impl<T: Real> Default for FitConfig<T> {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: T::lit(1e-5),
            rel_obj_tol: T::lit(1e-9),
            validation_fraction: 0.2,
            patience: 20,
            seed: 0,
            lbfgs_memory: 10,
            pretrain_max_iters: 1000,
        }
    }
}

impl<T: Real> FitConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.validation_fraction) {
            return Err(GtmError::config(format!(
                "validation_fraction must lie in [0, 0.5), got {}",
                self.validation_fraction
            )));
        }
        if self.patience == 0 {
            return Err(GtmError::config("patience must be at least 1"));
        }
        if self.lbfgs_memory == 0 {
            return Err(GtmError::config("lbfgs_memory must be at least 1"));
        }
        Ok(())
    }

    fn lbfgs(&self) -> LbfgsOptions<T> {
        LbfgsOptions {
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            rel_obj_tol: self.rel_obj_tol,
            memory: self.lbfgs_memory,
            ..LbfgsOptions::default()
        }
    }
}

/// `−Σ ln f(y_i)` plus every active penalty, at the model's own parameters.
pub fn penalized_objective<T: Real>(model: &GtmModel<T>, data: &Matrix<T>, pen: &PenaltyConfig<T>) -> Result<T> {
    pen.validate()?;
    let layout = ParamLayout::new(model, false);
    Objective { layout: &layout, template: model, data, penalties: pen }.value(&layout.pack(model))
}

/// Gradient of [`penalized_objective`] in [`ParamLayout`] order.
pub fn gradient<T: Real>(model: &GtmModel<T>, data: &Matrix<T>, pen: &PenaltyConfig<T>) -> Result<Vec<T>> {
    pen.validate()?;
    let layout = ParamLayout::new(model, false);
    let mut g = vec![T::zero(); layout.len()];
    Objective { layout: &layout, template: model, data, penalties: pen }.value_and_grad(&layout.pack(model), &mut g)?;
    Ok(g)
}

/// Maps an optimiser stop to a report reason. A failed line search after
/// progress was made is treated as convergence at working precision.
pub(crate) fn classify_stop(stop: LbfgsStop, iterations: usize, report: &mut FitReport) -> Result<StopReason> {
    match stop {
        LbfgsStop::GradTol | LbfgsStop::RelObjTol => Ok(StopReason::Converged),
        LbfgsStop::Callback => Ok(StopReason::EarlyStopped),
        LbfgsStop::MaxIters => Ok(StopReason::MaxIters),
        LbfgsStop::LineSearchFailed if iterations > 0 => {
            report.warnings.push(format!("line search failed after {iterations} iterations; keeping the last accepted point"));
            Ok(StopReason::Converged)
        }
        LbfgsStop::LineSearchFailed => Err(GtmError::Fit {
            reason: "line search failed at the starting point, also after a steepest-descent restart".into(),
            report: Box::new(report.clone()),
        }),
    }
}

/// Seeded train/validation split: returns `(train, validation)` row indices,
/// each in increasing order.
pub fn split_indices(n: usize, validation_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n_val = (n as f64 * validation_fraction).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    (train, val)
}

fn check_data<T: Real>(data: &Matrix<T>) -> Result<()> {
    let j = data.cols();
    if j < 2 {
        return Err(GtmError::data(format!("need at least two columns, got {j}")));
    }
    if data.rows() < 10 * j {
        return Err(GtmError::data(format!("need at least 10·J = {} rows, got {}", 10 * j, data.rows())));
    }
    if let Some(i) = data.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(GtmError::data(format!("non-finite value at row {}, column {}", i / j, i % j)));
    }
    Ok(())
}

/// Training rows plus the pretrained, zero-conditioner starting model.
struct Prepared<T> {
    train: Matrix<T>,
    val: Matrix<T>,
    template: GtmModel<T>,
    warnings: Vec<String>,
}

fn prepare<T: Real>(data: &Matrix<T>, mc: &ModelConfig<T>, tau4: T, fc: &FitConfig<T>) -> Result<Prepared<T>> {
    check_data(data)?;
    fc.validate()?;
    if mc.num_layers == 0 {
        return Err(GtmError::config("fitting needs at least one decorrelation layer"));
    }
    let (train_idx, val_idx) = split_indices(data.rows(), fc.validation_fraction, fc.seed);
    let train = data.select_rows(&train_idx);
    let val = data.select_rows(&val_idx);
    let j = data.cols();

    let standardization: Vec<Standardization<T>> =
        (0..j).map(|k| Standardization::from_column(&train.column(k))).collect::<Result<_>>()?;
    let opts = LbfgsOptions { max_iters: fc.pretrain_max_iters, ..pretrain_options() };
    let fitted = (0..j)
        .into_par_iter()
        .map(|k| {
            let col: Vec<T> = train.column(k).iter().map(|&y| standardization[k].apply(y)).collect();
            let grid = KnotGrid::cubic(mc.marginal_span.0, mc.marginal_span.1, mc.marginal_knots)?;
            pretrain_marginal_with(&col, grid, tau4, &opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();
    let mut transforms = Vec::with_capacity(j);
    for (k, (t, rep)) in fitted.into_iter().enumerate() {
        warnings.extend(rep.warnings.into_iter().map(|w| format!("marginal {k}: {w}")));
        transforms.push(t);
    }
    let grid = KnotGrid::cubic(mc.conditioner_span.0, mc.conditioner_span.1, mc.conditioner_knots)?;
    let layers = (1..=mc.num_layers).map(|l| DecorrelationLayer::zeros(j, grid.clone(), l % 2 == 0)).collect();
    let template = GtmModel::new(
        TransformationLayer::new(transforms, standardization)?,
        layers,
        ModelMeta { seed: fc.seed, penalties: Vec::new() },
    )?;
    Ok(Prepared { train, val, template, warnings })
}

fn mean_loglik<T: Real>(model: &GtmModel<T>, data: &Matrix<T>) -> f64 {
    match model.log_density_rows(data) {
        Ok(v) => v.iter().map(|x| x.as_f64()).sum::<f64>() / data.rows() as f64,
        Err(_) => f64::NEG_INFINITY,
    }
}

fn train_stage<T: Real>(
    prep: &Prepared<T>,
    mc: &ModelConfig<T>,
    pen: &PenaltyConfig<T>,
    fc: &FitConfig<T>,
) -> Result<(GtmModel<T>, FitReport)> {
    pen.validate()?;
    let start = Instant::now();
    let layout = ParamLayout::new(&prep.template, mc.tied);
    let obj = Objective { layout: &layout, template: &prep.template, data: &prep.train, penalties: pen };
    let x0 = layout.pack(&prep.template);
    let use_val = prep.val.rows() > 0;

    let mut val_trace = Vec::new();
    let mut best: Option<(usize, f64, Vec<T>)> = None;
    if use_val {
        let v0 = mean_loglik(&prep.template, &prep.val);
        val_trace.push(v0);
        best = Some((0, v0, x0.clone()));
    }
    let outcome = lbfgs::minimize(
        |x, g| obj.value_and_grad(x, g),
        x0,
        &fc.lbfgs(),
        |it, x, _| {
            if !use_val {
                return IterControl::Continue;
            }
            let v = obj.model_at(x).map(|m| mean_loglik(&m, &prep.val)).unwrap_or(f64::NEG_INFINITY);
            val_trace.push(v);
            let (best_it, best_v, _) = best.as_ref().expect("initialised with validation");
            if v > *best_v {
                best = Some((it, v, x.to_vec()));
                IterControl::Continue
            } else if it - best_it >= fc.patience {
                IterControl::Stop
            } else {
                IterControl::Continue
            }
        },
    );
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            let report = FitReport { seed: fc.seed, warnings: prep.warnings.clone(), ..FitReport::default() };
            return Err(GtmError::Fit { reason: e.to_string(), report: Box::new(report) });
        }
    };
    let mut report = FitReport {
        objective_trace: outcome.trace.iter().map(|v| v.as_f64()).collect(),
        validation_trace: val_trace,
        iterations: outcome.iterations,
        final_grad_norm: outcome.grad_norm.as_f64(),
        seed: fc.seed,
        line_search_restarts: outcome.restarts,
        warnings: prep.warnings.clone(),
        ..FitReport::default()
    };
    report.stop_reason = Some(classify_stop(outcome.stop, outcome.iterations, &mut report)?);
    let params = match best {
        Some((it, v, x)) => {
            report.best_iteration = Some(it);
            report.best_validation_loglik = Some(v);
            x
        }
        None => outcome.x,
    };
    let mut model = obj.model_at(&params)?;
    model.meta = ModelMeta { seed: fc.seed, penalties: vec![pen.to_record()] };
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok((model, report))
}

/// Pretrains the marginals, then fits all parameters jointly.
pub fn fit<T: Real>(
    data: &Matrix<T>,
    mc: &ModelConfig<T>,
    pen: &PenaltyConfig<T>,
    fc: &FitConfig<T>,
) -> Result<(GtmModel<T>, FitReport)> {
    pen.validate()?;
    let prep = prepare(data, mc, pen.tau4, fc)?;
    train_stage(&prep, mc, pen, fc)
}

#[derive(Clone, Debug)]
pub struct AdaptiveFit<T> {
    pub model: GtmModel<T>,
    pub stage1_model: GtmModel<T>,
    pub stage1: FitReport,
    pub stage2: FitReport,
    pub weights: Matrix<T>,
}

/// Unpenalised-LASSO fit, adaptive weights from its local precisions on the
/// training rows, then an adaptive group-LASSO refit. Both stages start from
/// the same pretrained marginals and zero conditioners.
pub fn fit_adaptive<T: Real>(
    data: &Matrix<T>,
    mc: &ModelConfig<T>,
    pen: &PenaltyConfig<T>,
    fc: &FitConfig<T>,
) -> Result<AdaptiveFit<T>> {
    let stage1_pen = PenaltyConfig { tau3: T::zero(), mode: LassoMode::None, adaptive_weights: None, ..pen.clone() };
    stage1_pen.validate()?;
    let prep = prepare(data, mc, pen.tau4, fc)?;
    let (stage1_model, stage1) = train_stage(&prep, mc, &stage1_pen, fc)?;
    let weights = compute_adaptive_weights(&stage1_model, &prep.train)?;
    let stage2_pen = PenaltyConfig { mode: LassoMode::Adaptive, adaptive_weights: Some(weights.clone()), ..pen.clone() };
    let (mut model, stage2) = train_stage(&prep, mc, &stage2_pen, fc)?;
    model.meta.penalties = vec![stage1_pen.to_record(), stage2_pen.to_record()];
    Ok(AdaptiveFit { model, stage1_model, stage1, stage2, weights })
}

/// Log-uniform ranges for the random search; `None` keeps the base value.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpace {
    pub tau1: Option<(f64, f64)>,
    pub tau2: Option<(f64, f64)>,
    pub tau3: Option<(f64, f64)>,
    pub tau4: Option<(f64, f64)>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self { tau1: Some((1e-4, 1e3)), tau2: Some((1e-4, 1e3)), tau3: Some((1e-4, 1e3)), tau4: Some((1e-4, 1e2)) }
    }
}

impl SearchSpace {
    fn validate(&self) -> Result<()> {
        for (name, r) in [("tau1", self.tau1), ("tau2", self.tau2), ("tau3", self.tau3), ("tau4", self.tau4)] {
            if let Some((lo, hi)) = r {
                if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                    return Err(GtmError::config(format!("{name} search range must satisfy 0 < lo <= hi, got ({lo}, {hi})")));
                }
            }
        }
        Ok(())
    }

    /// Penalties for trial `index`, drawn from stream `index` of `seed`.
    pub fn draw<T: Real>(&self, base: &PenaltyConfig<T>, seed: u64, index: usize) -> PenaltyConfig<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let mut draw = |range: Option<(f64, f64)>, keep: T| match range {
            Some((lo, hi)) => T::lit((lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()),
            None => keep,
        };
        PenaltyConfig {
            tau1: draw(self.tau1, base.tau1),
            tau2: draw(self.tau2, base.tau2),
            tau3: draw(self.tau3, base.tau3),
            tau4: draw(self.tau4, base.tau4),
            ..base.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub index: usize,
    pub penalties: PenaltyRecord,
    pub validation_loglik: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SearchResult<T> {
    pub best: PenaltyConfig<T>,
    pub best_index: usize,
    pub model: GtmModel<T>,
    pub report: FitReport,
    pub trials: Vec<TrialRecord>,
}

/// Random search over penalties, selecting the highest mean validation
/// log-likelihood. Every trial uses the same split. The base config fixes
/// the LASSO mode and any penalty without a search range.
pub fn hyperparameter_search<T: Real>(
    data: &Matrix<T>,
    mc: &ModelConfig<T>,
    base: &PenaltyConfig<T>,
    space: &SearchSpace,
    fc: &FitConfig<T>,
    n_trials: usize,
    seed: u64,
) -> Result<SearchResult<T>> {
    if n_trials == 0 {
        return Err(GtmError::config("n_trials must be at least 1"));
    }
    if fc.validation_fraction <= 0.0 {
        return Err(GtmError::config("hyperparameter search needs a validation split"));
    }
    space.validate()?;
    let outcomes: Vec<(PenaltyConfig<T>, Result<(GtmModel<T>, FitReport)>)> = (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let pen = space.draw(base, seed, i);
            let res = fit(data, mc, &pen, fc);
            (pen, res)
        })
        .collect();
    let mut trials = Vec::with_capacity(n_trials);
    let mut best: Option<(usize, f64)> = None;
    for (i, (pen, res)) in outcomes.iter().enumerate() {
        let (validation_loglik, error) = match res {
            Ok((_, rep)) => (rep.best_validation_loglik, None),
            Err(e) => (None, Some(e.to_string())),
        };
        if let Some(v) = validation_loglik.filter(|v| v.is_finite()) {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        trials.push(TrialRecord { index: i, penalties: pen.to_record(), validation_loglik, error });
    }
    let Some((best_index, _)) = best else {
        return Err(GtmError::Search(
            trials.iter().map(|t| format!("trial {}: {}", t.index, t.error.clone().unwrap_or_else(|| "no validation score".into()))).collect(),
        ));
    };
    let (pen, res) = outcomes.into_iter().nth(best_index).expect("index in range");
    let (model, report) = res.expect("best trial succeeded");
    Ok(SearchResult { best: pen, best_index, model, report, trials })
}

#[cfg(test)]
mod tests;
