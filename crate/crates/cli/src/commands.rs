use std::path::{Path, PathBuf};

use gtm_core::benchmark::{run_ci_benchmark, tpr_at_fpr, BenchmarkConfig, SyntheticSpec};
use gtm_core::independence::{
    ci_metrics, edge_list_csv, graph_extract, pair_metrics_csv, to_dot, EvalSpace, IndependenceReport, PairMetrics,
};
use gtm_core::training::{
    fit as fit_model, fit_adaptive, hyperparameter_search, FitReport, LassoMode, ModelConfig, SearchSpace,
};
use gtm_core::{FitConfig, GtmModel, PenaltyConfig};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::table::{csv_bytes, read_table, write_atomic};
use crate::{BenchmarkArgs, ClassifyArgs, DensityArgs, FitArgs, GraphArgs, MetricsArgs, Mode, SampleArgs, Space};

const BUNDLED_SPEC: &str = include_str!("../data/sparse5.json");

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

/// Writes `<primary>.manifest.json` with the full configuration.
fn write_manifest(primary: &Path, subcommand: &str, args: &impl Serialize, threads: Option<usize>, extra: Value) -> CliResult<()> {
    let mut m = json!({
        "tool": "gtm",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "threads": threads,
        "argv": std::env::args().collect::<Vec<_>>(),
        "config": args,
    });
    if let (Value::Object(m), Value::Object(extra)) = (&mut m, extra) {
        m.extend(extra);
    }
    write_json(&with_suffix(primary, ".manifest.json"), &m)
}

fn load(path: &Path) -> CliResult<GtmModel> {
    GtmModel::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn parse_range(name: &str, s: &str) -> CliResult<Option<(f64, f64)>> {
    if s == "fixed" {
        return Ok(None);
    }
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts[..] {
        [lo, hi] => match (lo.parse::<f64>(), hi.parse::<f64>()) {
            (Ok(lo), Ok(hi)) => Ok(Some((lo, hi))),
            _ => Err(CliError::Usage(format!("--{name}-range: expected `lo,hi`, got `{s}`"))),
        },
        _ => Err(CliError::Usage(format!("--{name}-range: expected `lo,hi` or `fixed`, got `{s}`"))),
    }
}

fn summarize(label: &str, r: &FitReport) {
    eprintln!(
        "{label}: {} iterations, stop {:?}, best validation log-likelihood {}",
        r.iterations,
        r.stop_reason,
        r.best_validation_loglik.map_or("n/a".to_string(), |v| format!("{v:.6}"))
    );
    for w in &r.warnings {
        eprintln!("{label}: warning: {w}");
    }
}

pub fn fit(a: &FitArgs, threads: Option<usize>) -> CliResult<()> {
    let table = read_table(&a.input)?;
    let cols = table.kept_columns(&a.drop_col)?;
    let data = table.numeric(&cols, &a.input)?;
    let mc = ModelConfig {
        num_layers: a.layers,
        marginal_knots: a.marginal_knots,
        marginal_span: (a.marginal_lower, a.marginal_upper),
        conditioner_knots: a.conditioner_knots,
        conditioner_span: (a.conditioner_lower, a.conditioner_upper),
        tied: a.tied,
    };
    let pen = PenaltyConfig {
        tau1: a.tau1,
        tau2: a.tau2,
        tau3: a.tau3,
        tau4: a.tau4,
        mode: if a.mode == Mode::None { LassoMode::None } else { LassoMode::Lasso },
        adaptive_weights: None,
        epsilon_smooth: a.epsilon_smooth,
    };
    let fc = FitConfig {
        max_iters: a.max_iters,
        validation_fraction: a.validation_fraction,
        patience: a.patience,
        seed: a.seed,
        pretrain_max_iters: a.pretrain_max_iters,
        ..FitConfig::default()
    };
    fc.validate()?;

    let mut report = json!({});
    let mut searched = None;
    let mut pen = pen;
    if a.search > 0 {
        let space = SearchSpace {
            tau1: parse_range("tau1", &a.tau1_range)?,
            tau2: parse_range("tau2", &a.tau2_range)?,
            tau3: if a.mode == Mode::None { None } else { parse_range("tau3", &a.tau3_range)? },
            tau4: parse_range("tau4", &a.tau4_range)?,
        };
        let r = hyperparameter_search(&data, &mc, &pen, &space, &fc, a.search, a.seed)?;
        eprintln!("search: best trial {} of {}", r.best_index, a.search);
        report["search"] = json!({
            "best_index": r.best_index,
            "trials": r.trials.iter().map(|t| json!({
                "index": t.index,
                "penalties": t.penalties,
                "validation_loglik": t.validation_loglik,
                "error": t.error,
            })).collect::<Vec<_>>(),
        });
        pen = r.best.clone();
        searched = Some((r.model, r.report));
    }
    let model = match (a.mode, searched) {
        (Mode::Adaptive, _) => {
            let ad = fit_adaptive(&data, &mc, &pen, &fc)?;
            summarize("stage 1", &ad.stage1);
            summarize("stage 2", &ad.stage2);
            report["stage1"] = json!(ad.stage1);
            report["stage2"] = json!(ad.stage2);
            ad.model
        }
        (_, Some((model, rep))) => {
            summarize("fit", &rep);
            report["fit"] = json!(rep);
            model
        }
        (_, None) => {
            let (model, rep) = fit_model(&data, &mc, &pen, &fc)?;
            summarize("fit", &rep);
            report["fit"] = json!(rep);
            model
        }
    };
    let report_path = a.report.clone().unwrap_or_else(|| with_suffix(&a.output, ".report.json"));
    write_atomic(&a.output, model.to_json_string()?.as_bytes())?;
    write_json(&report_path, &report)?;
    let names: Vec<String> = match &table.header {
        Some(h) => cols.iter().map(|&c| h[c].clone()).collect(),
        None => cols.iter().map(|c| format!("column {}", c + 1)).collect(),
    };
    write_manifest(
        &a.output,
        "fit",
        a,
        threads,
        json!({ "seed": a.seed, "columns": names, "penalties": model.meta.penalties, "outputs": [a.output, report_path] }),
    )
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn dim_header(j: usize) -> Vec<String> {
    (1..=j).map(|k| format!("y{k}")).collect()
}

pub fn sample(a: &SampleArgs, threads: Option<usize>) -> CliResult<()> {
    let model = load(&a.model)?;
    let rows: Vec<Vec<String>> = if a.n == 0 {
        Vec::new()
    } else {
        let (s, info) = model.sample_with_info(a.n, a.seed)?;
        for j in &info.ridge_fallback {
            eprintln!("warning: the inverse of marginal {} needed a ridge fallback", j + 1);
        }
        s.iter_rows().map(|r| r.iter().map(|&v| fmt(v)).collect()).collect()
    };
    write_atomic(&a.output, &csv_bytes(&dim_header(model.dim()), rows)?)?;
    write_manifest(&a.output, "sample", a, threads, json!({ "seed": a.seed }))
}

pub fn density(a: &DensityArgs, threads: Option<usize>) -> CliResult<()> {
    let model = load(&a.model)?;
    let table = read_table(&a.input)?;
    let cols = table.kept_columns(&a.drop_col)?;
    if cols.len() != model.dim() {
        return Err(CliError::Data(format!("model has {} dimensions but {} columns remain in the input", model.dim(), cols.len())));
    }
    let data = table.numeric(&cols, &a.input)?;
    let ld = model.log_density_rows(&data)?;
    let mut header = table.header.clone().unwrap_or_else(|| (1..=table.width()).map(|k| format!("c{k}")).collect());
    header.push("log_density".into());
    let rows = table.records.iter().zip(&ld).map(|(r, v)| {
        let mut r = r.clone();
        r.push(fmt(*v));
        r
    });
    write_atomic(&a.output, &csv_bytes(&header, rows)?)?;
    write_manifest(&a.output, "density", a, threads, json!({}))
}

fn write_graph(report: &IndependenceReport, threshold: f64, dot: Option<&Path>, edges: Option<&Path>) -> CliResult<usize> {
    let g = graph_extract(report, threshold).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(p) = dot {
        write_atomic(p, to_dot(&g).as_bytes())?;
    }
    if let Some(p) = edges {
        write_atomic(p, edge_list_csv(&g).as_bytes())?;
    }
    Ok(g.edges.len())
}

pub fn metrics(a: &MetricsArgs, threads: Option<usize>) -> CliResult<()> {
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(CliError::Usage(format!("--threshold must lie in [0, 1], got {}", a.threshold)));
    }
    let model = load(&a.model)?;
    let space = match a.space {
        Space::Latent => EvalSpace::Latent,
        Space::Data => EvalSpace::Data,
    };
    let report = ci_metrics(&model, a.samples, a.quad_n, space, a.seed)?;
    if report.warning {
        eprintln!("warning: more than 1% of the samples were excluded for some pair");
    }
    write_atomic(&a.output, pair_metrics_csv(&report).as_bytes())?;
    let n = write_graph(&report, a.threshold, a.dot.as_deref(), a.edges.as_deref())?;
    eprintln!("{} pairs, {n} edges at threshold {}", report.pairs.len(), a.threshold);
    let excluded: Vec<_> = report.pairs.iter().map(|p| json!({ "u": p.u + 1, "v": p.v + 1, "excluded": p.excluded, "kld_se": p.kld_se })).collect();
    write_manifest(&a.output, "metrics", a, threads, json!({ "seed": a.seed, "diagnostics": excluded }))
}

fn read_pair_metrics(path: &Path) -> CliResult<IndependenceReport> {
    let table = read_table(path)?;
    let header = table.header.as_ref().ok_or_else(|| CliError::Data(format!("{}: missing header row", path.display())))?;
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| CliError::Data(format!("{}: missing column `{name}`", path.display())))
    };
    let idx = [col("u")?, col("v")?, col("kld")?, col("iae")?, col("mean_abs_p")?, col("mean_abs_rho")?];
    let m = table.numeric(&idx, path)?;
    let mut pairs = Vec::with_capacity(m.rows());
    let mut dim = 0;
    for (i, r) in m.iter_rows().enumerate() {
        if r[0] < 1.0 || r[1] <= r[0] || r[0].fract() != 0.0 || r[1].fract() != 0.0 {
            return Err(CliError::Data(format!("{}: row {}: need integer indices 1 <= u < v", path.display(), i + 2)));
        }
        let (u, v) = (r[0] as usize - 1, r[1] as usize - 1);
        dim = dim.max(v + 1);
        pairs.push(PairMetrics { u, v, kld: r[2], kld_se: f64::NAN, iae: r[3], mean_abs_p: r[4], mean_abs_rho: r[5], excluded: 0 });
    }
    Ok(IndependenceReport { dim, pairs, samples: 0, quad_n: 0, space: EvalSpace::Latent, warning: false })
}

pub fn graph(a: &GraphArgs, threads: Option<usize>) -> CliResult<()> {
    let report = read_pair_metrics(&a.metrics)?;
    let n = write_graph(&report, a.threshold, Some(&a.dot), a.edges.as_deref())?;
    eprintln!("{n} edges at threshold {}", a.threshold);
    write_manifest(&a.dot, "graph", a, threads, json!({}))
}

pub fn classify(a: &ClassifyArgs, threads: Option<usize>) -> CliResult<()> {
    if !(a.prior > 0.0 && a.prior < 1.0) {
        return Err(CliError::Usage(format!("--prior must lie in (0, 1), got {}", a.prior)));
    }
    if let Some(f) = a.fpr.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(CliError::Usage(format!("--fpr values must lie in [0, 1], got {f}")));
    }
    let (ma, mb) = (load(&a.model_a)?, load(&a.model_b)?);
    if ma.dim() != mb.dim() {
        return Err(CliError::Data(format!("models disagree on dimension: {} vs {}", ma.dim(), mb.dim())));
    }
    let table = read_table(&a.input)?;
    let label = table.column_index(&a.label_col)?;
    let mut drop = a.drop_col.clone();
    drop.push((label + 1).to_string());
    let cols = table.kept_columns(&drop)?;
    if cols.len() != ma.dim() {
        return Err(CliError::Data(format!("models have {} dimensions but {} feature columns remain", ma.dim(), cols.len())));
    }
    let data = table.numeric(&cols, &a.input)?;
    let (la, lb) = (ma.log_density_rows(&data)?, mb.log_density_rows(&data)?);
    let prior_logit = (a.prior / (1.0 - a.prior)).ln();
    let scores: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| x - y).collect();
    let positive: Vec<bool> = table.records.iter().map(|r| r[label] == a.positive).collect();
    let pos: Vec<f64> = scores.iter().zip(&positive).filter(|(_, &p)| p).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(&positive).filter(|(_, &p)| !p).map(|(s, _)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(CliError::Data(format!("the label column needs rows of both classes (positive label `{}`)", a.positive)));
    }
    let tpr = a.fpr.iter().map(|&f| tpr_at_fpr(&pos, &neg, f)).collect::<Result<Vec<_>, _>>()?;
    let header: Vec<String> = std::iter::once("fpr".to_string()).chain(a.fpr.iter().map(|f| fmt(*f))).collect();
    let row: Vec<String> = std::iter::once("tpr".to_string()).chain(tpr.iter().map(|t| fmt(*t))).collect();
    write_atomic(&a.output, &csv_bytes(&header, [row])?)?;
    if let Some(p) = &a.posteriors {
        let rows = scores.iter().zip(&table.records).map(|(s, r)| {
            let post = 1.0 / (1.0 + (-(s + prior_logit)).exp());
            vec![r[label].clone(), fmt(post)]
        });
        write_atomic(p, &csv_bytes(&["label".into(), "posterior".into()], rows)?)?;
    }
    write_manifest(&a.output, "classify", a, threads, json!({}))
}

pub fn benchmark(a: &BenchmarkArgs, threads: Option<usize>) -> CliResult<()> {
    let text = match &a.spec {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
        None => BUNDLED_SPEC.to_string(),
    };
    let spec = SyntheticSpec::from_json_str(&text).map_err(|e| CliError::Data(e.to_string()))?;
    let cfg = BenchmarkConfig { n_test: a.n_test, metric_samples: a.samples, quad_n: a.quad_n, ..BenchmarkConfig::default() };
    let table = run_ci_benchmark(&spec, a.n_train, &cfg, a.seed)?;
    for e in &table.errors {
        eprintln!("cell failed: {e}");
    }
    write_atomic(&a.output, table.to_csv().as_bytes())?;
    write_manifest(&a.output, "benchmark", a, threads, json!({ "seed": a.seed, "spec": spec, "failed_cells": table.errors }))
}
