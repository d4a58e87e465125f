//! Accuracy metrics and the multi-step inference drivers.

use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::data::{calendar_features, Scheme, WindowSpec};
use crate::error::{Error, Result};
use crate::model_io::Model;

fn check_lengths(pred: &[f64], actual: &[f64]) -> Result<()> {
    if pred.is_empty() || pred.len() != actual.len() {
        return Err(Error::Shape(format!(
            "metric inputs must be non-empty and equally long ({} vs {})",
            pred.len(),
            actual.len()
        )));
    }
    Ok(())
}

/// Root mean square error.
pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(pred, actual)?;
    let sum: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((sum / pred.len() as f64).sqrt())
}

/// Mean absolute percentage error, `100 * mean(|pred - actual| / |actual|)`.
/// With `epsilon`, denominators are floored at `epsilon`; without it a zero
/// actual value is an error.
pub fn mpe(pred: &[f64], actual: &[f64], epsilon: Option<f64>) -> Result<f64> {
    check_lengths(pred, actual)?;
    let mut sum = 0.0;
    for (i, (p, a)) in pred.iter().zip(actual).enumerate() {
        let denom = match epsilon {
            Some(eps) => a.abs().max(eps),
            None if *a == 0.0 => return Err(Error::ZeroActual { index: i }),
            None => a.abs(),
        };
        sum += (p - a).abs() / denom;
    }
    Ok(100.0 * sum / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub lead: i64,
    pub rmse: f64,
    pub mpe: f64,
}

/// Per-step metrics and their arithmetic means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub per_step: Vec<StepMetrics>,
    pub avg_rmse: f64,
    pub avg_mpe: f64,
}

/// Score `[sample][step]` predictions against actual values.
pub fn evaluate(pred: &[Vec<f64>], actual: &[Vec<f64>], leads: &[i64], epsilon: Option<f64>) -> Result<SplitMetrics> {
    if pred.len() != actual.len() || pred.is_empty() {
        return Err(Error::Shape("prediction and actual matrices must be non-empty and equally long".into()));
    }
    let k = leads.len();
    let mut per_step = Vec::with_capacity(k);
    for (step, &lead) in leads.iter().enumerate() {
        let p: Vec<f64> = pred.iter().map(|r| r[step]).collect();
        let a: Vec<f64> = actual.iter().map(|r| r[step]).collect();
        per_step.push(StepMetrics { step: step + 1, lead, rmse: rmse(&p, &a)?, mpe: mpe(&p, &a, epsilon)? });
    }
    let avg_rmse = per_step.iter().map(|s| s.rmse).sum::<f64>() / k as f64;
    let avg_mpe = per_step.iter().map(|s| s.mpe).sum::<f64>() / k as f64;
    Ok(SplitMetrics { per_step, avg_rmse, avg_mpe })
}

/// Train and test metrics of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scheme: Scheme,
    pub train: SplitMetrics,
    pub test: SplitMetrics,
    /// Final rule count of every model (one entry for MO and SW).
    pub rules: Vec<usize>,
    pub learning_log: Option<PathBuf>,
    pub wall_clock_secs: f64,
}

impl EvalReport {
    /// Human-readable table with one row per step plus the average.
    pub fn table(&self) -> String {
        let mut out = format!("scheme {}  rules {:?}\n", self.scheme, self.rules);
        out.push_str("split  step  lead        rmse         mpe\n");
        for (name, m) in [("train", &self.train), ("test", &self.test)] {
            for s in &m.per_step {
                out.push_str(&format!("{name:<5}  {:>4}  {:>4}  {:>10.6}  {:>10.4}\n", s.step, s.lead, s.rmse, s.mpe));
            }
            out.push_str(&format!("{name:<5}   avg        {:>10.6}  {:>10.4}\n", m.avg_rmse, m.avg_mpe));
        }
        out
    }
}

/// The trained model(s) behind one multi-step forecasting scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecaster {
    pub scheme: Scheme,
    /// Full window with every lead to forecast.
    pub spec: WindowSpec,
    /// One model for MO and SW, one per lead for PM.
    pub models: Vec<Model>,
    /// Time between consecutive samples, used to advance calendar features.
    pub sample_step: Duration,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    scheme: Scheme,
    window: WindowSpec,
    sample_step_secs: i64,
    models: Vec<String>,
}

impl Forecaster {
    pub fn new(scheme: Scheme, spec: WindowSpec, models: Vec<Model>) -> Result<Self> {
        let f = Forecaster { scheme, spec, models, sample_step: Duration::hours(1) };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let k = self.spec.n_outputs();
        let n = self.spec.n_inputs();
        let want = match self.scheme {
            Scheme::Mo | Scheme::Sw => 1,
            Scheme::Pm => k,
        };
        if self.models.len() != want {
            return Err(Error::Scheme(format!("{} with K = {k} needs {want} model(s), got {}", self.scheme, self.models.len())));
        }
        for (i, m) in self.models.iter().enumerate() {
            let outputs = if self.scheme == Scheme::Mo { k } else { 1 };
            if m.n_inputs() != n || m.n_outputs() != outputs {
                return Err(Error::Scheme(format!(
                    "model {i} has {} inputs / {} outputs; {} expects {n} / {outputs}",
                    m.n_inputs(),
                    m.n_outputs(),
                    self.scheme
                )));
            }
        }
        if self.scheme == Scheme::Sw {
            sw_plan(&self.spec)?;
        }
        Ok(())
    }

    /// Forecast every lead from one raw input row. `origin` is the timestamp
    /// of the prediction origin; SW needs it to advance calendar features.
    pub fn predict(&self, x_raw: &[f64], origin: Option<NaiveDateTime>) -> Result<Vec<f64>> {
        predict_multistep(self, x_raw, origin)
    }

    /// Write a manifest plus one model file per model into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let names: Vec<String> = if self.models.len() == 1 {
            vec!["model.json".into()]
        } else {
            (1..=self.models.len()).map(|i| format!("model_step{i}.json")).collect()
        };
        let mut paths = Vec::new();
        for (m, name) in self.models.iter().zip(&names) {
            let p = dir.join(name);
            m.save(&p)?;
            paths.push(p);
        }
        let manifest = Manifest {
            scheme: self.scheme,
            window: self.spec.clone(),
            sample_step_secs: self.sample_step.num_seconds(),
            models: names,
        };
        let p = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        paths.push(p);
        Ok(paths)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let p = dir.join("manifest.json");
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let models = manifest.models.iter().map(|m| Model::load(dir.join(m))).collect::<Result<Vec<_>>>()?;
        let f = Forecaster {
            scheme: manifest.scheme,
            spec: manifest.window,
            models,
            sample_step: Duration::seconds(manifest.sample_step_secs),
        };
        f.validate()?;
        Ok(f)
    }
}

/// Where each value of an SW input window comes from after shifting.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Source {
    /// Column of the original input row.
    Input(usize),
    /// Prediction of an earlier step.
    Step(usize),
}

/// For every step beyond the first, the source of each lag value.
fn sw_plan(spec: &WindowSpec) -> Result<Vec<Vec<Source>>> {
    let cal = if spec.calendar { 3 } else { 0 };
    let lead0 = spec.output_leads[0];
    let mut plan = Vec::with_capacity(spec.n_outputs());
    for (step, &lead) in spec.output_leads.iter().enumerate() {
        let shift = lead - lead0;
        let mut row = Vec::with_capacity(spec.input_lags.len());
        for &lag in &spec.input_lags {
            let pos = lag + shift;
            let src = if let Some(i) = spec.input_lags.iter().position(|&l| l == pos) {
                Source::Input(cal + i)
            } else if let Some(j) = spec.output_leads[..step].iter().position(|&l| l == pos) {
                Source::Step(j)
            } else {
                return Err(Error::Scheme(format!(
                    "SW cannot reach lead {lead}: offset {pos} is neither an input lag nor an earlier lead"
                )));
            };
            row.push(src);
        }
        plan.push(row);
    }
    Ok(plan)
}

/// MO: one forward pass. PM: one single-output model per lead. SW: the
/// next-step model is applied repeatedly, each prediction shifted into the
/// input window in place of the oldest lag.
pub fn predict_multistep(f: &Forecaster, x_raw: &[f64], origin: Option<NaiveDateTime>) -> Result<Vec<f64>> {
    let spec = &f.spec;
    if x_raw.len() != spec.n_inputs() {
        return Err(Error::Shape(format!("expected {} raw inputs, got {}", spec.n_inputs(), x_raw.len())));
    }
    match f.scheme {
        Scheme::Mo => f.models[0].predict_raw(x_raw),
        Scheme::Pm => f.models.iter().map(|m| Ok(m.predict_raw(x_raw)?[0])).collect(),
        Scheme::Sw => {
            let plan = sw_plan(spec)?;
            let last_lag = *spec.input_lags.last().unwrap();
            let lead0 = spec.output_leads[0];
            let cal = if spec.calendar { 3 } else { 0 };
            let mut preds: Vec<f64> = Vec::with_capacity(plan.len());
            let mut row = x_raw.to_vec();
            for (step, sources) in plan.iter().enumerate() {
                let shift = spec.output_leads[step] - lead0;
                if spec.calendar && shift != 0 {
                    let t0 = origin.ok_or_else(|| Error::Scheme("SW with calendar features needs the origin timestamp".into()))?;
                    let ts = t0 + f.sample_step * (last_lag + shift) as i32;
                    row[..3].copy_from_slice(&calendar_features(&ts));
                }
                for (i, src) in sources.iter().enumerate() {
                    row[cal + i] = match *src {
                        Source::Input(c) => x_raw[c],
                        Source::Step(j) => preds[j],
                    };
                }
                preds.push(f.models[0].predict_raw(&row)?[0]);
            }
            Ok(preds)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Normalizer;
    use crate::fuzzy::It2Mf;
    use crate::network::{Ablation, NetworkParams};

    #[test]
    fn metric_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mpe(&[1.0, 2.0], &[1.0, 2.0], None).unwrap(), 0.0);
        assert!((rmse(&[1.1, 0.9], &[1.0, 1.0]).unwrap() - 0.1).abs() < 1e-12);
        assert!((mpe(&[1.1, 0.9], &[1.0, 1.0], None).unwrap() - 10.0).abs() < 1e-9);
        assert!((rmse(&[1.0, 1.0], &[0.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(mpe(&[1.0, 1.0], &[0.0, 2.0], None), Err(Error::ZeroActual { index: 0 })));
        assert!(mpe(&[1.0, 1.0], &[0.0, 2.0], Some(1e-3)).is_ok());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn averages_are_means_of_steps() {
        let pred = vec![vec![1.0, 2.0, 3.0], vec![1.5, 2.0, 2.0]];
        let act = vec![vec![1.0, 2.5, 3.0], vec![1.0, 2.0, 4.0]];
        let m = evaluate(&pred, &act, &[0, 2, 4], None).unwrap();
        let mean = m.per_step.iter().map(|s| s.rmse).sum::<f64>() / 3.0;
        assert_eq!(m.avg_rmse, mean);
        assert_eq!(m.per_step[2].lead, 4);
    }

    /// Single-output model that echoes its oldest input: one collapsed rule
    /// with consequent `2 x_1`, halved by type reduction.
    fn echo_model(n: usize) -> Model {
        let mut p = NetworkParams::empty(n, 1, 0.0, Ablation { no_layer9: true, ..Ablation::default() });
        let mut c = vec![0.0; n + 1];
        c[1] = 2.0;
        p.push_rule(&vec![It2Mf::new(0.5, 0.5, 10.0); n], &c, &vec![0.0; n + 1]);
        Model::new(p, Normalizer::from_bounds(vec![0.0; n], vec![1.0; n]).unwrap(), Normalizer::from_bounds(vec![0.0], vec![1.0]).unwrap())
    }

    #[test]
    fn sw_feeds_predictions_back() {
        let spec = WindowSpec { input_lags: vec![-2, -1], output_leads: vec![0, 1, 2], scheme: Scheme::Sw, calendar: false };
        let f = Forecaster::new(Scheme::Sw, spec, vec![echo_model(2)]).unwrap();
        // windows: (0.1, 0.3) -> 0.1, (0.3, 0.1) -> 0.3, (0.1, 0.3) -> 0.1
        let y = f.predict(&[0.1, 0.3], None).unwrap();
        assert!((y[0] - 0.1).abs() < 1e-12, "{y:?}");
        assert!((y[1] - 0.3).abs() < 1e-12, "{y:?}");
        assert!((y[2] - 0.1).abs() < 1e-12, "{y:?}");
    }

    #[test]
    fn sw_rejects_unreachable_leads() {
        let spec = WindowSpec { input_lags: vec![-4, -2], output_leads: vec![0, 1], scheme: Scheme::Sw, calendar: false };
        assert!(matches!(Forecaster::new(Scheme::Sw, spec, vec![echo_model(2)]), Err(Error::Scheme(_))));
    }

    #[test]
    fn model_count_checked() {
        let spec = WindowSpec { input_lags: vec![-1], output_leads: vec![0, 1], scheme: Scheme::Pm, calendar: false };
        assert!(matches!(Forecaster::new(Scheme::Pm, spec, vec![echo_model(1)]), Err(Error::Scheme(_))));
    }
}
