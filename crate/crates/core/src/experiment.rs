//! End-to-end experiments: data, windowing, clustering, structure learning,
//! evaluation and deterministic artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{Duration, NaiveDate};

use crate::clustering::{fcm, FcmConfig};
use crate::config::{ExperimentConfig, Source};
use crate::data::{
    add_noise, build_windows, load_csv, synthetic_microgrid, Scheme, SeriesInput, SplitRule, WindowedDataset,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport, Forecaster, SplitMetrics};
use crate::model_io::Model;
use crate::structure::{derive_seed, learn_with_clusters, EpisodeRecord, LearnOutcome};

const TAG_NOISE_TRAIN: u64 = 101;
const TAG_NOISE_TEST: u64 = 102;

/// Windowed data for one experiment.
#[derive(Debug, Clone)]
pub struct PreparedData {
    /// Multi-output windows with every lead; used for evaluation.
    pub full: WindowedDataset,
    /// What each model trains on (one per model).
    pub datasets: Vec<WindowedDataset>,
    /// Index of the first raw sample in physical time (MG `t` offset).
    pub time_offset: usize,
    pub sample_step: Duration,
}

/// Generate or load the series, inject noise and window it.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    cfg.validate()?;
    let (clean, timestamps, split, time_offset) = match cfg.source {
        Source::MackeyGlass => {
            let mg = cfg.mackey_glass();
            if !mg.is_chaotic() {
                eprintln!("warning: tau = {} < 17, the series is not in the chaotic regime", mg.tau);
            }
            let series: Vec<f64> = mg.generate(cfg.t_start, cfg.length)?.into_iter().map(|(_, x)| x).collect();
            (series, None, SplitRule::Range { train_len: cfg.train_len }, cfg.t_start)
        }
        Source::Csv => {
            let path = cfg.csv_path.as_ref().expect("validated");
            let table = load_csv(path, &[cfg.target_column.as_str()])?;
            (table.columns[0].clone(), Some(table.timestamps), SplitRule::DayOfMonth { train_days: cfg.train_days }, 0)
        }
        Source::SyntheticMicrogrid => {
            let start = NaiveDate::parse_from_str(&cfg.synthetic_start, "%Y-%m-%d")
                .map_err(|e| Error::Config(format!("synthetic_start: {e}")))?;
            let table = synthetic_microgrid(start, cfg.synthetic_days, cfg.seed);
            let col = table.column(&cfg.target_column)?.to_vec();
            (col, Some(table.timestamps), SplitRule::DayOfMonth { train_days: cfg.train_days }, 0)
        }
    };
    let train = add_noise(&clean, cfg.noise_train, derive_seed(cfg.seed, &[TAG_NOISE_TRAIN]))?;
    let test = add_noise(&clean, cfg.noise_test, derive_seed(cfg.seed, &[TAG_NOISE_TEST]))?;
    let input = SeriesInput { train: &train, test: &test, timestamps: timestamps.as_deref() };

    let spec = cfg.window_spec();
    let full_spec = crate::data::WindowSpec { scheme: Scheme::Mo, ..spec.clone() };
    let full = build_windows(&input, &full_spec, &split)?.remove(0);
    if full.n_train == 0 || full.n_train == full.x.len() {
        return Err(Error::Config(format!(
            "split leaves {} training and {} test windows; both must be non-empty",
            full.n_train,
            full.x.len() - full.n_train
        )));
    }
    let datasets = match spec.scheme {
        Scheme::Mo => vec![full.clone()],
        Scheme::Pm => (0..spec.n_outputs()).map(|k| full.select_output(k)).collect(),
        Scheme::Sw => vec![full.select_output(0)],
    };
    let sample_step = match &timestamps {
        Some(ts) if ts.len() > 1 => ts[1] - ts[0],
        _ => Duration::hours(1),
    };
    Ok(PreparedData { full, datasets, time_offset, sample_step })
}

/// Cluster once on the shared training inputs, then run structure learning
/// for every model of the scheme.
pub fn train_models(cfg: &ExperimentConfig, data: &PreparedData) -> Result<(Forecaster, Vec<LearnOutcome>)> {
    let learn_cfg = cfg.learn_config();
    let clusters = fcm(data.full.train_x(), &FcmConfig::new(learn_cfg.n_clusters, learn_cfg.seed))?.clusters;
    let mut models = Vec::with_capacity(data.datasets.len());
    let mut outcomes = Vec::with_capacity(data.datasets.len());
    for ds in &data.datasets {
        let outcome = learn_with_clusters(ds.train_x(), ds.train_y(), &learn_cfg, clusters.clone())?;
        let mut model = Model::new(outcome.params.clone(), ds.input_norm.clone(), ds.target_norm.clone());
        model.window = Some(ds.spec.clone());
        models.push(model);
        outcomes.push(outcome);
    }
    let mut forecaster = Forecaster::new(cfg.scheme, cfg.window_spec(), models)?;
    forecaster.sample_step = data.sample_step;
    Ok((forecaster, outcomes))
}

/// Raw-scale forecasts for every window of `full` (train rows first).
pub fn forecast_all(forecaster: &Forecaster, full: &WindowedDataset) -> Result<Vec<Vec<f64>>> {
    (0..full.raw.x.len())
        .map(|i| forecaster.predict(&full.raw.x[i], full.raw.origin_times.get(i).copied()))
        .collect()
}

/// Train and test metrics for a forecaster.
pub fn score(
    forecaster: &Forecaster,
    data: &PreparedData,
    mpe_epsilon: Option<f64>,
) -> Result<(SplitMetrics, SplitMetrics, Vec<Vec<f64>>)> {
    let full = &data.full;
    let preds = forecast_all(forecaster, full)?;
    let leads = &forecaster.spec.output_leads;
    let train = evaluate(&preds[..full.n_train], full.raw_train_y(), leads, mpe_epsilon)?;
    let test = evaluate(&preds[full.n_train..], full.raw_test_y(), leads, mpe_epsilon)?;
    Ok((train, test, preds))
}

/// Everything an experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: EvalReport,
    pub forecaster: Forecaster,
    pub logs: Vec<Vec<EpisodeRecord>>,
    pub predictions: Vec<Vec<f64>>,
    pub data: PreparedData,
}

/// Train, evaluate and (when `write` is set) persist every artifact into
/// `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, write: bool) -> Result<ExperimentOutcome> {
    let started = Instant::now();
    let data = prepare_data(cfg)?;
    let (forecaster, outcomes) = train_models(cfg, &data)?;
    let (train, test, predictions) = score(&forecaster, &data, cfg.mpe_epsilon)?;
    let logs: Vec<Vec<EpisodeRecord>> = outcomes.into_iter().map(|o| o.log).collect();
    let report = EvalReport {
        scheme: cfg.scheme,
        train,
        test,
        rules: forecaster.models.iter().map(Model::n_rules).collect(),
        learning_log: write.then(|| cfg.output_dir.join("learning_log.txt")),
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    let outcome = ExperimentOutcome { report, forecaster, logs, predictions, data };
    if write {
        write_artifacts(cfg, &outcome)?;
    }
    Ok(outcome)
}

fn write_file(path: PathBuf, text: String) -> Result<()> {
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn metrics_csv(train: &SplitMetrics, test: &SplitMetrics) -> String {
    let mut out = String::from("split,step,lead,rmse,mpe\n");
    for (name, m) in [("train", train), ("test", test)] {
        for s in &m.per_step {
            let _ = writeln!(out, "{name},{},{},{},{}", s.step, s.lead, s.rmse, s.mpe);
        }
        let _ = writeln!(out, "{name},avg,,{},{}", m.avg_rmse, m.avg_mpe);
    }
    out
}

/// `split,time,actual_1,predicted_1,...` with one row per window.
pub fn predictions_csv(data: &PreparedData, predictions: &[Vec<f64>]) -> String {
    let full = &data.full;
    let k = full.spec.n_outputs();
    let mut out = String::from("split,time");
    for step in 1..=k {
        let _ = write!(out, ",actual_{step},predicted_{step}");
    }
    out.push('\n');
    for (i, pred) in predictions.iter().enumerate() {
        let split = if i < full.n_train { "train" } else { "test" };
        let time = match full.raw.origin_times.get(i) {
            Some(ts) => ts.format("%Y-%m-%dT%H:%M:%S").to_string(),
            None => (full.raw.origins[i] + data.time_offset).to_string(),
        };
        let _ = write!(out, "{split},{time}");
        for (a, p) in full.raw.y[i].iter().zip(pred) {
            let _ = write!(out, ",{a},{p}");
        }
        out.push('\n');
    }
    out
}

/// Per test sample and rule: the rule-only firing interval and the
/// per-output intervals of every model.
pub fn firing_csv(forecaster: &Forecaster, data: &PreparedData) -> Result<String> {
    let full = &data.full;
    let k_max = forecaster.models.iter().map(Model::n_outputs).max().unwrap_or(0);
    let mut out = String::from("sample,model,rule,f_lower,f_upper");
    for k in 1..=k_max {
        let _ = write!(out, ",f_lower_{k},f_upper_{k}");
    }
    out.push('\n');
    for (sample, x) in full.raw_test_x().iter().enumerate() {
        for (mi, model) in forecaster.models.iter().enumerate() {
            let rep = model.firing_raw(x)?;
            for (i, f) in rep.rule.iter().enumerate() {
                let _ = write!(out, "{},{},{},{},{}", sample + 1, mi + 1, i + 1, f.lower, f.upper);
                for k in 0..k_max {
                    match rep.rule_output.get(i * rep.n_outputs + k).filter(|_| k < rep.n_outputs) {
                        Some(fk) => {
                            let _ = write!(out, ",{},{}", fk.lower, fk.upper);
                        }
                        None => out.push_str(",,"),
                    }
                }
                out.push('\n');
            }
        }
    }
    Ok(out)
}

pub fn learning_log_text(logs: &[Vec<EpisodeRecord>]) -> String {
    let mut out = String::new();
    for (i, log) in logs.iter().enumerate() {
        let _ = writeln!(out, "# model {}", i + 1);
        for rec in log {
            let _ = writeln!(out, "{rec}");
        }
    }
    out
}

/// Persist models, metrics, predictions, firing strengths and the learning
/// log. Every file is a pure function of the config.
pub fn write_artifacts(cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> Result<()> {
    let dir: &Path = &cfg.output_dir;
    outcome.forecaster.save(dir)?;
    write_file(dir.join("config.toml"), cfg.to_toml())?;
    write_file(dir.join("metrics.csv"), metrics_csv(&outcome.report.train, &outcome.report.test))?;
    write_file(dir.join("predictions.csv"), predictions_csv(&outcome.data, &outcome.predictions))?;
    write_file(dir.join("firing.csv"), firing_csv(&outcome.forecaster, &outcome.data)?)?;
    write_file(dir.join("learning_log.txt"), learning_log_text(&outcome.logs))?;
    Ok(())
}
