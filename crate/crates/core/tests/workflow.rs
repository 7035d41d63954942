mod common;

use gtm_core::independence::{ci_metrics, EvalSpace};
use gtm_core::model::GtmModel;
use gtm_core::training::{fit, FitConfig, ModelConfig, PenaltyConfig};

#[test]
fn fit_save_load_sample_and_score() {
    let data = common::normal_data(400, 3, 1);
    let mc = ModelConfig { num_layers: 2, conditioner_knots: 10, ..ModelConfig::default() };
    let (m, rep) = fit(&data, &mc, &PenaltyConfig::default(), &FitConfig { max_iters: 50, ..FitConfig::default() }).unwrap();
    assert!(rep.iterations > 0);
    let dir = tempfile_dir();
    let path = dir.join("model.json");
    m.save(&path).unwrap();
    let back = GtmModel::<f64>::load(&path).unwrap();
    assert_eq!(back, m);
    for row in data.iter_rows().take(20) {
        assert_eq!(back.log_density(row).unwrap().to_bits(), m.log_density(row).unwrap().to_bits());
    }
    let s = back.sample(50, 4).unwrap();
    assert!(s.as_slice().iter().all(|v| v.is_finite()));
    let r = ci_metrics(&back, 100, 8, EvalSpace::Data, 5).unwrap();
    assert_eq!(r.pairs.len(), 3);
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("gtm-workflow-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
