//! Trained model persistence: parameters plus the normalization needed at
//! inference, stored as self-describing JSON with nested tensors in
//! rule-then-output order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::Normalizer;
use crate::data::WindowSpec;
use crate::error::{Error, Result};
use crate::fuzzy::{CoMf, It2Mf};
use crate::network::{firing_report, predict, Ablation, ConsequentParams, FiringReport, LinkParam, NetworkParams, ReductionParams};

pub const FORMAT_NAME: &str = "soit2fnn-model";
pub const FORMAT_VERSION: u32 = 1;

/// A trained network with the scaling of its inputs and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: NetworkParams,
    pub input_norm: Normalizer,
    pub target_norm: Normalizer,
    /// Windowing the model was trained on, when known.
    pub window: Option<WindowSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Dims {
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "K")]
    k: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Normalization {
    input_min: Vec<f64>,
    input_max: Vec<f64>,
    target_min: Vec<f64>,
    target_max: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Consequents {
    /// `[rule][slot][0..=n]`
    c: Vec<Vec<Vec<f64>>>,
    s: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    dims: Dims,
    ablation: Ablation,
    normalization: Normalization,
    /// `[rule][input]`
    antecedents: Vec<Vec<It2Mf>>,
    /// `[output][input]`
    co_antecedents: Vec<Vec<CoMf>>,
    consequents: Consequents,
    reduction: ReductionParams,
    link: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    window: Option<WindowSpec>,
}

fn field_err(field: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::ModelField { field: field.into(), msg: msg.into() }
}

fn check_len(field: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(field_err(field, format!("expected {want} entries, found {got}")));
    }
    Ok(())
}

impl Model {
    pub fn new(params: NetworkParams, input_norm: Normalizer, target_norm: Normalizer) -> Self {
        Model { params, input_norm, target_norm, window: None }
    }

    pub fn n_inputs(&self) -> usize {
        self.params.n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.params.n_outputs
    }

    pub fn n_rules(&self) -> usize {
        self.params.n_rules()
    }

    /// Forecast in physical units from a raw input row.
    pub fn predict_raw(&self, x_raw: &[f64]) -> Result<Vec<f64>> {
        if x_raw.len() != self.n_inputs() {
            return Err(Error::Shape(format!("model expects {} inputs, got {}", self.n_inputs(), x_raw.len())));
        }
        let y = predict(&self.input_norm.apply(x_raw), &self.params);
        Ok(self.target_norm.invert(&y))
    }

    /// Rule firing strengths for a raw input row.
    pub fn firing_raw(&self, x_raw: &[f64]) -> Result<FiringReport> {
        if x_raw.len() != self.n_inputs() {
            return Err(Error::Shape(format!("model expects {} inputs, got {}", self.n_inputs(), x_raw.len())));
        }
        Ok(firing_report(&self.input_norm.apply(x_raw), &self.params))
    }

    fn to_file(&self) -> ModelFile {
        let p = &self.params;
        let (n, m, k) = (p.n_inputs, p.n_rules(), p.n_outputs);
        let cq = &p.consequents;
        let nest = |v: &[f64]| -> Vec<Vec<Vec<f64>>> {
            (0..m)
                .map(|i| (0..cq.slots).map(|s| v[(i * cq.slots + s) * cq.width..(i * cq.slots + s + 1) * cq.width].to_vec()).collect())
                .collect()
        };
        ModelFile {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            dims: Dims { n, m, k },
            ablation: p.ablation,
            normalization: Normalization {
                input_min: self.input_norm.min.clone(),
                input_max: self.input_norm.max.clone(),
                target_min: self.target_norm.min.clone(),
                target_max: self.target_norm.max.clone(),
            },
            antecedents: p.antecedents.chunks(n).map(<[It2Mf]>::to_vec).collect(),
            co_antecedents: p.co_antecedents.chunks(n).map(<[CoMf]>::to_vec).collect(),
            consequents: Consequents { c: nest(&cq.c), s: nest(&cq.s) },
            reduction: p.reduction.clone(),
            link: p.link.0,
            window: self.window.clone(),
        }
    }

    fn from_file(f: ModelFile) -> Result<Model> {
        if f.format != FORMAT_NAME {
            return Err(field_err("format", format!("expected `{FORMAT_NAME}`, found `{}`", f.format)));
        }
        if f.version != FORMAT_VERSION {
            return Err(field_err("version", format!("unsupported version {}", f.version)));
        }
        let Dims { n, m, k } = f.dims;
        if n == 0 || k == 0 {
            return Err(field_err("dims", "n and K must be positive"));
        }
        let slots = if f.ablation.shared_consequents { 1 } else { k };

        check_len("antecedents", f.antecedents.len(), m)?;
        for (i, row) in f.antecedents.iter().enumerate() {
            check_len(&format!("antecedents[{i}]"), row.len(), n)?;
        }
        check_len("co_antecedents", f.co_antecedents.len(), k)?;
        for (i, row) in f.co_antecedents.iter().enumerate() {
            check_len(&format!("co_antecedents[{i}]"), row.len(), n)?;
        }
        let flat = |name: &str, t: &[Vec<Vec<f64>>]| -> Result<Vec<f64>> {
            check_len(&format!("consequents.{name}"), t.len(), m)?;
            let mut out = Vec::with_capacity(m * slots * (n + 1));
            for (i, rule) in t.iter().enumerate() {
                check_len(&format!("consequents.{name}[{i}]"), rule.len(), slots)?;
                for (s, row) in rule.iter().enumerate() {
                    check_len(&format!("consequents.{name}[{i}][{s}]"), row.len(), n + 1)?;
                    out.extend_from_slice(row);
                }
            }
            Ok(out)
        };
        let c = flat("c", &f.consequents.c)?;
        let s = flat("s", &f.consequents.s)?;

        let nm = &f.normalization;
        check_len("normalization.input_min", nm.input_min.len(), n)?;
        check_len("normalization.input_max", nm.input_max.len(), n)?;
        check_len("normalization.target_min", nm.target_min.len(), k)?;
        check_len("normalization.target_max", nm.target_max.len(), k)?;
        let input_norm = Normalizer::from_bounds(nm.input_min.clone(), nm.input_max.clone())
            .map_err(|e| field_err("normalization.input", e.to_string()))?;
        let target_norm = Normalizer::from_bounds(nm.target_min.clone(), nm.target_max.clone())
            .map_err(|e| field_err("normalization.target", e.to_string()))?;

        if let Some(w) = &f.window {
            w.validate().map_err(|e| field_err("window", e.to_string()))?;
            if w.n_inputs() != n || w.n_outputs() != k {
                return Err(field_err("window", "lags/leads do not match dims"));
            }
        }

        let params = NetworkParams {
            n_inputs: n,
            n_outputs: k,
            antecedents: f.antecedents.into_iter().flatten().collect(),
            co_antecedents: f.co_antecedents.into_iter().flatten().collect(),
            consequents: ConsequentParams { c, s, slots, width: n + 1 },
            reduction: f.reduction,
            link: LinkParam(f.link),
            ablation: f.ablation,
        };
        params.validate()?;
        Ok(Model { params, input_norm, target_norm, window: f.window })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Model> {
        Model::from_file(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.params.validate()?;
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_model() -> Model {
        let mut p = NetworkParams::empty(2, 2, 0.1, Ablation::default());
        p.push_rule(
            &[It2Mf::new(0.1, 0.2, 0.3), It2Mf::new(0.4, 0.45, 0.2)],
            &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            &[0.01, 0.02, 0.03, 0.0, 0.05, 0.06],
        );
        p.push_rule(
            &[It2Mf::new(0.6, 0.7, 0.1), It2Mf::new(0.1, 0.1, 0.25)],
            &[-0.1, 0.7, 1.0 / 3.0, 0.2, 0.25, 0.125],
            &[0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        );
        p.reduction.q_l = vec![0.3, 0.7];
        Model::new(p, Normalizer::from_bounds(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap(), Normalizer::from_bounds(vec![-1.0; 2], vec![1.0; 2]).unwrap())
    }

    #[test]
    fn round_trip_is_exact() {
        let m = sample_model();
        let back = Model::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let text = m.to_json().unwrap();
        assert!(text.contains("\"M\": 2"));
    }

    #[test]
    fn negative_spread_rejected_with_path() {
        let mut m = sample_model();
        m.params.consequents.s[1] = -0.1;
        let text = m.to_json().unwrap();
        match Model::from_json(&text) {
            Err(Error::ModelField { field, .. }) => assert_eq!(field, "consequents.s[0][0][1]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_field_is_named() {
        let text = sample_model().to_json().unwrap().replace("\"link\"", "\"lnk\"");
        let err = Model::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("lnk") || err.contains("link"), "{err}");
    }

    #[test]
    fn wrong_row_length_is_named() {
        let m = sample_model();
        let mut v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        v["antecedents"][1].as_array_mut().unwrap().pop();
        match Model::from_json(&v.to_string()) {
            Err(Error::ModelField { field, .. }) => assert_eq!(field, "antecedents[1]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn predict_raw_denormalizes() {
        let m = sample_model();
        let y = m.predict_raw(&[1.0, 0.0]).unwrap();
        let yn = predict(&[0.5, 0.5], &m.params);
        for (a, b) in y.iter().zip(yn) {
            assert!((a - (b * 2.0 - 1.0)).abs() < 1e-12);
        }
        assert!(m.predict_raw(&[1.0]).is_err());
    }
}
