use chrono::Datelike;
use soit2fnn::config::{ExperimentConfig, Source, WindowPreset};
use soit2fnn::data::Scheme;
use soit2fnn::eval::Forecaster;
use soit2fnn::experiment::{forecast_all, run_experiment};

fn quick(scheme: Scheme) -> ExperimentConfig {
    ExperimentConfig {
        scheme,
        n_clusters: 3,
        episode_max: 3,
        stage1_iterations: 15,
        stage2_iterations: 15,
        ..ExperimentConfig::default()
    }
}

fn microgrid(scheme: Scheme) -> ExperimentConfig {
    ExperimentConfig {
        source: Source::SyntheticMicrogrid,
        window: WindowPreset::Microgrid,
        synthetic_days: 60,
        mpe_epsilon: Some(1e-9),
        ..quick(scheme)
    }
}

#[test]
fn microgrid_schemes_produce_three_step_metrics() {
    for scheme in [Scheme::Sw, Scheme::Pm, Scheme::Mo] {
        let out = run_experiment(&microgrid(scheme), false).unwrap();
        let models = if scheme == Scheme::Pm { 3 } else { 1 };
        assert_eq!(out.forecaster.models.len(), models, "{scheme}");
        assert_eq!(out.report.test.per_step.len(), 3);
        assert_eq!(out.report.test.per_step.iter().map(|s| s.lead).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(out.report.test.avg_rmse.is_finite() && out.report.test.avg_mpe.is_finite());
        assert!(out.report.rules.iter().all(|m| (1..=3).contains(m)));
        // day-of-month split: every test origin falls after day 21
        let full = &out.data.full;
        assert!(full.raw.origin_times[full.n_train..].iter().all(|t| t.day() > 21));
    }
}

#[test]
fn saved_forecaster_reproduces_predictions() {
    let dir = tempfile::tempdir().unwrap();
    for scheme in [Scheme::Sw, Scheme::Pm] {
        let cfg = microgrid(scheme);
        let out = run_experiment(&cfg, false).unwrap();
        let path = dir.path().join(scheme.to_string());
        out.forecaster.save(&path).unwrap();
        let back = Forecaster::load(&path).unwrap();
        assert_eq!(forecast_all(&back, &out.data.full).unwrap(), out.predictions);
    }
}

#[test]
fn ablations_train_and_change_parameter_counts() {
    let base = run_experiment(&quick(Scheme::Mo), false).unwrap();
    let cfg = ExperimentConfig { no_layer4: true, no_layer9: true, shared_consequents: true, ..quick(Scheme::Mo) };
    let ablated = run_experiment(&cfg, false).unwrap();
    let p = &ablated.forecaster.models[0].params;
    assert_eq!(p.link.0, 0.0);
    assert_eq!(p.consequents.slots, 1);
    assert!(p.param_count() < base.forecaster.models[0].params.param_count());
    assert!(ablated.report.test.avg_rmse.is_finite());
}

#[test]
fn noisy_runs_use_independent_split_noise() {
    let clean = run_experiment(&quick(Scheme::Mo), false).unwrap();
    let cfg = ExperimentConfig { noise_train: 0.1, noise_test: 0.1, ..quick(Scheme::Mo) };
    let noisy = run_experiment(&cfg, false).unwrap();
    let (c, n) = (&clean.data.full, &noisy.data.full);
    assert_eq!(c.raw.origins, n.raw.origins);
    assert_ne!(c.raw_train_y(), n.raw_train_y());
    assert_ne!(c.raw_test_y(), n.raw_test_y());
}

#[test]
fn zero_iterations_report_the_initial_network() {
    let cfg = ExperimentConfig { stage1_iterations: 0, stage2_iterations: 0, ..quick(Scheme::Mo) };
    let out = run_experiment(&cfg, false).unwrap();
    assert!(out.report.test.avg_rmse.is_finite());
    assert!(out.report.rules[0] >= 1);
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 5);
}
