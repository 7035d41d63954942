mod common;

use common::{correlated_pair, gaussian_iae_oracle, identity_model, random_model};
use gtm_core::independence::{ci_metrics, graph_extract, pair_metrics_csv, EvalSpace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn correlated_pair_kld_is_mutual_information() {
    let m = correlated_pair(0.5);
    let r = ci_metrics(&m, 2000, 40, EvalSpace::Latent, 1).unwrap();
    let want = -0.5 * (0.75f64).ln();
    assert!((r.pairs[0].kld - want).abs() <= 0.02, "{} vs {want}", r.pairs[0].kld);
}

#[test]
fn correlated_pair_iae_matches_dense_grid() {
    let m = correlated_pair(0.5);
    let lambda: f64 = -0.5 / 0.75f64.sqrt();
    let oracle = gaussian_iae_oracle(1.0, 1.0 + lambda * lambda, -lambda, 10.0, 1500);
    let r = ci_metrics(&m, 2000, 40, EvalSpace::Latent, 2).unwrap();
    assert!((r.pairs[0].iae - oracle).abs() <= 0.01, "{} vs {oracle}", r.pairs[0].iae);
}

#[test]
fn zero_layer_model_is_independent() {
    let m = identity_model(3, vec![]);
    let r = ci_metrics(&m, 5000, 20, EvalSpace::Latent, 3).unwrap();
    for p in &r.pairs {
        assert!(p.kld.abs() <= 0.01 && p.iae <= 0.01, "{p:?}");
        assert!(p.kld.abs() <= 3.0 * p.kld_se + 1e-12);
    }
    assert!(graph_extract(&r, 0.1).unwrap().edges.is_empty());
}

#[test]
fn metrics_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m = random_model(&mut rng, 3, 2, 8, 0.3);
    let a = ci_metrics(&m, 200, 12, EvalSpace::Data, 5).unwrap();
    let b = ci_metrics(&m, 200, 12, EvalSpace::Data, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(pair_metrics_csv(&a).lines().count(), 1 + 3);
}
