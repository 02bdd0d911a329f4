use std::fs;
use std::path::Path;

use rominv::pipeline::{
    cmd_compare, cmd_generate, cmd_invert, cmd_invert_all, cmd_train, ErrorClass, PipelineConfig, SurrogateKind,
};
use rominv::rom::RomModel;
use rominv::series::{Regime, TimeSeries, WindowSpec};

fn config(dir: &Path) -> PipelineConfig {
    PipelineConfig { out_dir: dir.join("out"), ..PipelineConfig::default() }
}

#[test]
fn generate_writes_four_series_of_115_rows_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let manifest = cmd_generate(&cfg).unwrap();
    assert_eq!(manifest.data.len(), 4);
    for &q in &cfg.rates {
        for path in [cfg.layout().clean_csv(q), cfg.layout().noisy_csv(q)] {
            let text = fs::read_to_string(&path).unwrap();
            assert_eq!(text.lines().count(), 116, "{}", path.display());
            assert!(text.starts_with("t,value\n"));
        }
    }
    let saved: serde_json::Value = serde_json::from_str(&fs::read_to_string(cfg.layout().manifest()).unwrap()).unwrap();
    assert_eq!(saved["config"]["noise"]["seed"], 100);
    assert_eq!(saved["data"][3]["noise_seed"], 103);
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    cmd_generate(&cfg).unwrap();
    let first = fs::read(cfg.layout().noisy_csv(300.0)).unwrap();
    cmd_generate(&cfg).unwrap();
    assert_eq!(fs::read(cfg.layout().noisy_csv(300.0)).unwrap(), first);
}

#[test]
fn noise_level_follows_the_signal_range() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let manifest = cmd_generate(&cfg).unwrap();
    for entry in &manifest.data {
        let clean = TimeSeries::read_csv(fs::File::open(cfg.layout().clean_csv(entry.rate)).unwrap(), "c").unwrap();
        assert_eq!(entry.noise_sigma, 0.01 * clean.range());
    }
}

#[test]
fn trained_models_carry_their_window_specs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.nonoverlapping.epochs = 1;
    cfg.sliding.epochs = 1;
    cmd_generate(&cfg).unwrap();
    for (regime, spec) in
        [(Regime::Nonoverlapping, WindowSpec::nonoverlapping(23)), (Regime::Sliding, WindowSpec::sliding(10))]
    {
        cmd_train(&cfg, regime).unwrap();
        let model = RomModel::from_json(&fs::read_to_string(cfg.layout().model(regime)).unwrap()).unwrap();
        assert_eq!(model.window, spec);
        assert_eq!((spec.length, spec.stride), if regime == Regime::Sliding { (10, 1) } else { (23, 23) });
        let log = fs::read_to_string(cfg.layout().loss_log(regime)).unwrap();
        assert_eq!(log.lines().count(), 3);
    }
}

#[test]
fn exact_surrogate_recovers_rate_100() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.exact_surrogate = true;
    cmd_generate(&cfg).unwrap();
    let cell = cmd_invert(&cfg, 100.0, SurrogateKind::Exact, 10_000).unwrap();
    assert!(cell.relative_error < 0.02, "{cell:?}");
    assert!(cfg.layout().chain_csv(SurrogateKind::Exact, 100.0, 10_000).exists());
}

#[test]
fn short_chains_are_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.exact_surrogate = true;
    cmd_generate(&cfg).unwrap();
    let err = cmd_invert(&cfg, 100.0, SurrogateKind::Exact, 50).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Config);
}

#[test]
fn report_grid_is_rates_by_surrogates_by_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.sweep = vec![200, 300, 400];
    cfg.nonoverlapping.epochs = 2;
    cfg.sliding.epochs = 2;
    cmd_generate(&cfg).unwrap();
    cmd_train(&cfg, Regime::Nonoverlapping).unwrap();
    cmd_train(&cfg, Regime::Sliding).unwrap();
    cmd_invert_all(&cfg).unwrap();
    let report = cmd_compare(&cfg).unwrap();
    assert_eq!(report.cells.len(), 4 * 2 * 3);
    assert_eq!(report.reconstruction.len(), 2);
    let again = cmd_compare(&cfg).unwrap();
    assert_eq!(again, report);
    let svgs = fs::read_dir(cfg.layout().report_dir())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg"))
        .count();
    assert_eq!(svgs, 24 * 2 + 4 * 2 + 1);
}
