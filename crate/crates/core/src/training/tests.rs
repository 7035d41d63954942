use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::decorrelation::{local_precision, pairs, DecorrelationLayer};
use crate::testutil::{constant_layer, identity_model, normal_data, random_model};

fn lasso(tau3: f64) -> PenaltyConfig<f64> {
    PenaltyConfig { tau3, mode: LassoMode::Lasso, ..PenaltyConfig::default() }
}

#[test]
fn spline_penalty_examples() {
    let flat = constant_layer(3, 8, 0.7, false);
    assert_eq!(spline_penalty(&[flat], 5.0, 0.0), 0.0);
    let mut l = DecorrelationLayer::zeros(2, crate::testutil::cond_grid(4), false);
    l.set_pair_coeffs(1, 0, &[0.0, 1.0, 2.0, 3.0]).unwrap();
    assert!((spline_penalty(std::slice::from_ref(&l), 1.0, 0.0) - 3.0).abs() < 1e-15);
    assert_eq!(spline_penalty(std::slice::from_ref(&l), 0.0, 1.0), 0.0);
    let a = spline_penalty(std::slice::from_ref(&l), 0.0, 1.0);
    let b = spline_penalty(std::slice::from_ref(&l), 0.0, 2.0);
    assert_eq!(b, 2.0 * a);
}

#[test]
fn group_lasso_examples() {
    let data = normal_data(50, 3, 1);
    let zero = identity_model(3, vec![DecorrelationLayer::zeros(3, crate::testutil::cond_grid(8), false)]);
    let zt = latent_rows(&zero, &data);
    let v = group_lasso_penalty(&zero, &zt, &lasso(2.0)).unwrap();
    assert!((v - 2.0 * 3.0 * 1e-8f64.sqrt()).abs() < 1e-14);

    let half = identity_model(2, vec![constant_layer(2, 8, 0.5, false)]);
    let data = normal_data(4, 2, 2);
    let zt = latent_rows(&half, &data);
    let v = group_lasso_penalty(&half, &zt, &lasso(3.0)).unwrap();
    assert!((v - 3.0 * (4.0 * 0.25 + 1e-8f64).sqrt()).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = random_model(&mut rng, 4, 2, 8, 0.5);
    let zt = latent_rows(&m, &normal_data(200, 4, 4));
    let smooth = group_lasso_penalty(&m, &zt, &lasso(1.0)).unwrap();
    let exact = group_lasso_penalty(&m, &zt, &PenaltyConfig { epsilon_smooth: 0.0, ..lasso(1.0) }).unwrap();
    assert!((smooth - exact).abs() <= 1e-3);
}

#[test]
fn adaptive_requires_weights() {
    let pen = PenaltyConfig::<f64> { tau3: 1.0, mode: LassoMode::Adaptive, ..PenaltyConfig::default() };
    assert!(matches!(pen.validate(), Err(GtmError::Config(_))));
    let m = identity_model(2, vec![constant_layer(2, 8, 0.5, false)]);
    let zt = latent_rows(&m, &normal_data(4, 2, 2));
    assert!(matches!(group_lasso_penalty(&m, &zt, &pen), Err(GtmError::Config(_))));
    let bad = PenaltyConfig::<f64> { tau1: -1.0, ..PenaltyConfig::default() };
    assert!(bad.validate().is_err());
}

#[test]
fn adaptive_weight_examples() {
    let data = normal_data(100, 3, 5);
    let zero = identity_model(3, vec![DecorrelationLayer::zeros(3, crate::testutil::cond_grid(8), false)]);
    let w = compute_adaptive_weights(&zero, &data).unwrap();
    for (r, c) in pairs(3) {
        assert_eq!(w[(r, c)], ADAPTIVE_WEIGHT_FLOOR);
    }
    let half = identity_model(2, vec![constant_layer(2, 8, 0.5, false)]);
    let w = compute_adaptive_weights(&half, &normal_data(100, 2, 6)).unwrap();
    assert!((w[(1, 0)] - 0.5).abs() < 1e-14);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = random_model(&mut rng, 4, 3, 8, 0.5);
    let data = normal_data(150, 4, 8);
    let w = compute_adaptive_weights(&m, &data).unwrap();
    for (r, c) in pairs(4) {
        let mut s = 0.0;
        for i in 0..data.rows() {
            let zt = m.forward(data.row(i)).unwrap().z_tilde;
            s += local_precision(m.layers(), &zt).unwrap().matrix[(r, c)].abs();
        }
        assert!((w[(r, c)] - (s / 150.0).max(1e-6)).abs() <= 1e-10);
    }
}

#[test]
fn identity_objective_on_zero_data() {
    let m = identity_model(3, vec![DecorrelationLayer::zeros(3, crate::testutil::cond_grid(8), false)]);
    let data = Matrix::zeros(40, 3);
    let v = penalized_objective(&m, &data, &PenaltyConfig::default()).unwrap();
    let want = 40.0 * 3.0 * 0.5 * (2.0 * std::f64::consts::PI).ln();
    assert!((v - want).abs() < 1e-9);
}

fn all_penalties(dim: usize, rng: &mut ChaCha8Rng, mode: LassoMode) -> PenaltyConfig<f64> {
    let mut w = Matrix::identity(dim);
    for (r, c) in pairs(dim) {
        w[(r, c)] = rng.random_range(0.1..1.0);
    }
    PenaltyConfig {
        tau1: 0.7,
        tau2: 1.3,
        tau3: 2.0,
        tau4: 0.4,
        mode,
        adaptive_weights: (mode == LassoMode::Adaptive).then_some(w),
        epsilon_smooth: 1e-8,
    }
}

fn check_gradient(model: &GtmModel<f64>, data: &Matrix<f64>, pen: &PenaltyConfig<f64>, tied: bool, points: usize, seed: u64) {
    let layout = ParamLayout::new(model, tied);
    let obj = Objective { layout: &layout, template: model, data, penalties: pen };
    let base = layout.pack(model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let x: Vec<f64> = base.iter().map(|&v| v + rng.random_range(-0.2..0.2)).collect();
        let mut g = vec![0.0; x.len()];
        let f = obj.value_and_grad(&x, &mut g).unwrap();
        assert!((f - obj.value(&x).unwrap()).abs() <= 1e-9 * f.abs());
        for i in 0..x.len() {
            let h = 1e-5;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (obj.value(&xp).unwrap() - obj.value(&xm).unwrap()) / (2.0 * h);
            let err = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1.0);
            worst = worst.max(err);
        }
    }
    assert!(worst <= 1e-4, "worst relative gradient error {worst}");
}

#[test]
fn gradient_matches_finite_differences_with_every_penalty() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = random_model(&mut rng, 3, 2, 8, 0.3);
    let data = normal_data(60, 3, 10);
    for mode in [LassoMode::Lasso, LassoMode::Adaptive] {
        let pen = all_penalties(3, &mut rng, mode);
        check_gradient(&m, &data, &pen, false, 3, 11);
    }
}

#[test]
fn gradient_tied_layout() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let m = random_model(&mut rng, 3, 2, 8, 0.3);
    let data = normal_data(60, 3, 13);
    check_gradient(&m, &data, &all_penalties(3, &mut rng, LassoMode::Lasso), true, 2, 14);
}

#[test]
fn penalties_decompose_additively() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let m = random_model(&mut rng, 3, 2, 8, 0.3);
    let data = normal_data(80, 3, 16);
    let pen = all_penalties(3, &mut rng, LassoMode::Lasso);
    let layout = ParamLayout::new(&m, false);
    let x = layout.pack(&m);
    let with = Objective { layout: &layout, template: &m, data: &data, penalties: &pen }.parts(&x).unwrap();
    let none = PenaltyConfig::default();
    let without = Objective { layout: &layout, template: &m, data: &data, penalties: &none }.value(&x).unwrap();
    let zt = latent_rows(&m, &data);
    let separate = spline_penalty(m.layers(), pen.tau1, pen.tau2)
        + group_lasso_penalty(&m, &zt, &pen).unwrap()
        + m.transformation().transforms().iter().map(|t| crate::marginal::marginal_ridge(t.theta(), pen.tau4)).sum::<f64>();
    assert!((with.total() - without - separate).abs() <= 1e-10 * with.total().abs().max(1.0));

    let doubled = PenaltyConfig { tau2: 2.0 * pen.tau2, ..PenaltyConfig::default() };
    let single = PenaltyConfig { tau2: pen.tau2, ..PenaltyConfig::default() };
    let a = Objective { layout: &layout, template: &m, data: &data, penalties: &single }.parts(&x).unwrap().spline;
    let b = Objective { layout: &layout, template: &m, data: &data, penalties: &doubled }.parts(&x).unwrap().spline;
    assert_eq!(b, 2.0 * a);
}

#[test]
fn non_finite_objective_names_observation() {
    let m = identity_model(2, vec![constant_layer(2, 8, 0.5, false)]);
    let mut data = normal_data(30, 2, 17);
    data[(7, 1)] = 1e200;
    match penalized_objective(&m, &data, &PenaltyConfig::default()) {
        Err(GtmError::NonFiniteObjective { index }) => assert_eq!(index, 7),
        other => panic!("expected a non-finite objective error, got {other:?}"),
    }
}

#[test]
fn layout_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let m = random_model(&mut rng, 4, 3, 8, 0.3);
    let layout = ParamLayout::new(&m, false);
    let mut other = m.clone();
    layout.unpack(&layout.pack(&m), &mut other).unwrap();
    assert_eq!(other, m);
    let tied = ParamLayout::new(&m, true);
    assert_eq!(tied.len(), 4 * 15 + 3 * 6);
}

fn small_config() -> (ModelConfig<f64>, FitConfig<f64>) {
    let mc = ModelConfig { num_layers: 2, conditioner_knots: 10, ..ModelConfig::default() };
    let fc = FitConfig { max_iters: 60, seed: 3, ..FitConfig::default() };
    (mc, fc)
}

fn correlated(n: usize, seed: u64) -> Matrix<f64> {
    let z = normal_data(n, 2, seed);
    let mut m = Matrix::zeros(n, 2);
    for i in 0..n {
        m[(i, 0)] = z[(i, 0)];
        m[(i, 1)] = 0.6 * z[(i, 0)] + 0.8 * z[(i, 1)];
    }
    m
}

#[test]
fn fit_is_deterministic_and_monotone() {
    let data = correlated(300, 19);
    let (mc, fc) = small_config();
    let (m1, r1) = fit(&data, &mc, &PenaltyConfig::default(), &fc).unwrap();
    let (m2, r2) = fit(&data, &mc, &PenaltyConfig::default(), &fc).unwrap();
    assert_eq!(r1.objective_trace, r2.objective_trace);
    assert_eq!(r1.validation_trace, r2.validation_trace);
    assert_eq!(m1, m2);
    assert!(r1.objective_non_increasing());
    assert!(r1.stop_reason.is_some());
    assert_eq!(r1.validation_trace.len(), r1.iterations + 1);
    assert!(r1.best_validation_loglik.is_some());
}

#[test]
fn fit_preconditions() {
    let (mc, fc) = small_config();
    let data = correlated(15, 20);
    assert!(matches!(fit(&data, &mc, &PenaltyConfig::default(), &fc), Err(GtmError::Data(_))));
    let data = correlated(200, 20);
    let zero = ModelConfig { num_layers: 0, ..mc.clone() };
    assert!(matches!(fit(&data, &zero, &PenaltyConfig::default(), &fc), Err(GtmError::Config(_))));
    let bad = FitConfig { validation_fraction: 0.6, ..fc };
    assert!(matches!(fit(&data, &mc, &PenaltyConfig::default(), &bad), Err(GtmError::Config(_))));
}

#[test]
fn adaptive_stage_two_without_penalty_equals_plain_fit() {
    let data = correlated(300, 21);
    let (mc, fc) = small_config();
    let pen = PenaltyConfig::default();
    let ad = fit_adaptive(&data, &mc, &pen, &fc).unwrap();
    assert!(ad.stage2.objective_trace[0].is_finite());
    let (plain, rep) = fit(&data, &mc, &pen, &fc).unwrap();
    assert_eq!(ad.model.layers(), plain.layers());
    assert_eq!(ad.model.transformation(), plain.transformation());
    assert_eq!(ad.stage2.objective_trace, rep.objective_trace);
    assert_eq!(ad.stage1_model.transformation(), plain.transformation());
    assert_eq!(ad.model.meta.penalties.len(), 2);
}

#[test]
fn adaptive_stages_share_initial_marginals() {
    let data = correlated(300, 22);
    let (mc, fc) = small_config();
    let pen = PenaltyConfig { tau3: 5.0, ..PenaltyConfig::default() };
    let ad = fit_adaptive(&data, &mc, &pen, &fc).unwrap();
    assert!(ad.stage2.objective_trace[0].is_finite());
    assert!(ad.weights[(1, 0)] > 0.0);
    assert_eq!(ad.model.meta.penalties[1].mode, LassoMode::Adaptive);
}

#[test]
fn search_examples() {
    let data = correlated(300, 23);
    let (mc, fc) = small_config();
    let fc = FitConfig { max_iters: 25, ..fc };
    let base = PenaltyConfig::default();
    let space = SearchSpace::default();
    let one = hyperparameter_search(&data, &mc, &base, &space, &fc, 1, 5).unwrap();
    assert_eq!(one.best_index, 0);
    assert_eq!(one.best, space.draw(&base, 5, 0));

    let a = hyperparameter_search(&data, &mc, &base, &space, &fc, 3, 6).unwrap();
    let b = hyperparameter_search(&data, &mc, &base, &space, &fc, 3, 6).unwrap();
    assert_eq!(a.trials, b.trials);
    let scores: Vec<f64> = a.trials.iter().filter_map(|t| t.validation_loglik).collect();
    let best = a.trials[a.best_index].validation_loglik.unwrap();
    assert!(scores.iter().all(|&s| best >= s));
    for t in &a.trials {
        assert!((1e-4..=1e3).contains(&t.penalties.tau1));
        assert!((1e-4..=1e2).contains(&t.penalties.tau4));
    }
}

#[test]
fn search_with_failing_trials_reports_every_error() {
    let data = correlated(300, 24);
    let (mc, fc) = small_config();
    let broken = ModelConfig { num_layers: 0, ..mc };
    match hyperparameter_search(&data, &broken, &PenaltyConfig::default(), &SearchSpace::default(), &fc, 2, 1) {
        Err(GtmError::Search(msgs)) => assert_eq!(msgs.len(), 2),
        other => panic!("expected a search error, got {other:?}"),
    }
}
