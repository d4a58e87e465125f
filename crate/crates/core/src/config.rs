//! Flat TOML experiment configuration. Every key is optional; defaults give
//! the clean chaotic Mackey-Glass MO experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{MackeyGlass, Scheme, WindowSpec};
use crate::error::{Error, Result};
use crate::network::Ablation;
use crate::structure::LearnConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    MackeyGlass,
    Csv,
    /// Generated hourly microgrid-like record.
    SyntheticMicrogrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowPreset {
    /// Lags t-18..t-2 step 2, leads t, t+2, t+4.
    Chaotic,
    /// Calendar features, lags t-9..t-1, leads t, t+1, t+2.
    Microgrid,
    /// `input_lags`, `output_leads` and `calendar` keys.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub source: Source,

    pub tau: f64,
    pub x0: f64,
    pub mg_step: f64,
    pub t_start: usize,
    pub length: usize,
    /// Leading raw samples used for training (range split).
    pub train_len: usize,

    pub csv_path: Option<PathBuf>,
    pub target_column: String,
    /// Days of each month assigned to training (day-of-month split).
    pub train_days: u32,
    pub synthetic_days: usize,
    pub synthetic_start: String,

    /// Noise standard deviation relative to the clean series, training split.
    pub noise_train: f64,
    /// Same for the test split.
    pub noise_test: f64,

    pub window: WindowPreset,
    pub input_lags: Vec<i64>,
    pub output_leads: Vec<i64>,
    pub calendar: bool,
    pub scheme: Scheme,

    pub no_layer4: bool,
    pub no_layer9: bool,
    pub shared_consequents: bool,

    pub t_g: f64,
    pub t_r: f64,
    pub eta: f64,
    pub n_clusters: usize,
    pub upsilon: f64,
    pub l_init: f64,
    pub episode_max: usize,
    pub stage1_iterations: usize,
    pub stage2_iterations: usize,

    pub seed: u64,
    pub mpe_epsilon: Option<f64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let learn = LearnConfig::default();
        let mg = MackeyGlass::default();
        ExperimentConfig {
            name: "chaotic_mo".into(),
            source: Source::MackeyGlass,
            tau: mg.tau,
            x0: mg.x0,
            mg_step: mg.step,
            t_start: 31,
            length: 1500,
            train_len: 1000,
            csv_path: None,
            target_column: "unmet_power".into(),
            train_days: 21,
            synthetic_days: 366,
            synthetic_start: "2020-01-01".into(),
            noise_train: 0.0,
            noise_test: 0.0,
            window: WindowPreset::Chaotic,
            input_lags: Vec::new(),
            output_leads: Vec::new(),
            calendar: false,
            scheme: Scheme::Mo,
            no_layer4: false,
            no_layer9: false,
            shared_consequents: false,
            t_g: learn.t_g,
            t_r: learn.t_r,
            eta: learn.eta,
            n_clusters: learn.n_clusters,
            upsilon: learn.upsilon,
            l_init: learn.l_init,
            episode_max: learn.episode_max,
            stage1_iterations: learn.stage1_iterations,
            stage2_iterations: learn.stage2_iterations,
            seed: 0,
            mpe_epsilon: None,
            output_dir: PathBuf::from("runs/chaotic_mo"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file. A relative `csv_path` resolves against the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let (Some(csv), Some(dir)) = (&cfg.csv_path, path.parent()) {
            if csv.is_relative() && !csv.exists() {
                cfg.csv_path = Some(dir.join(csv));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn ablation(&self) -> Ablation {
        Ablation { no_layer4: self.no_layer4, no_layer9: self.no_layer9, shared_consequents: self.shared_consequents }
    }

    pub fn mackey_glass(&self) -> MackeyGlass {
        MackeyGlass { tau: self.tau, x0: self.x0, step: self.mg_step }
    }

    pub fn window_spec(&self) -> WindowSpec {
        match self.window {
            WindowPreset::Chaotic => WindowSpec::chaotic(self.scheme),
            WindowPreset::Microgrid => WindowSpec::microgrid(self.scheme),
            WindowPreset::Custom => WindowSpec {
                input_lags: self.input_lags.clone(),
                output_leads: self.output_leads.clone(),
                scheme: self.scheme,
                calendar: self.calendar,
            },
        }
    }

    pub fn learn_config(&self) -> LearnConfig {
        LearnConfig {
            t_g: self.t_g,
            t_r: self.t_r,
            eta: self.eta,
            n_clusters: self.n_clusters,
            upsilon: self.upsilon,
            l_init: self.l_init,
            episode_max: self.episode_max,
            stage1_iterations: self.stage1_iterations,
            stage2_iterations: self.stage2_iterations,
            seed: self.seed,
            ablation: self.ablation(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.learn_config().validate()?;
        let spec = self.window_spec();
        spec.validate()?;
        if spec.calendar && self.source == Source::MackeyGlass {
            return Err(Error::Config("calendar features need a timestamped source".into()));
        }
        if self.source == Source::Csv && self.csv_path.is_none() {
            return Err(Error::Config("source = \"csv\" requires csv_path".into()));
        }
        if self.source == Source::MackeyGlass && self.train_len >= self.length {
            return Err(Error::Config(format!("train_len ({}) must be below length ({})", self.train_len, self.length)));
        }
        if !(self.noise_train >= 0.0 && self.noise_test >= 0.0) {
            return Err(Error::Config("noise fractions must be >= 0".into()));
        }
        if self.mpe_epsilon.is_some_and(|e| !(e > 0.0)) {
            return Err(Error::Config("mpe_epsilon must be positive".into()));
        }
        Ok(())
    }
}
