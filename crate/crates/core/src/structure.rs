//! Two-stage self-organizing learning: rule growing and removing with fixed
//! antecedents (stage 1) and joint fine-tuning of every parameter (stage 2),
//! driven by a status flag.
//!
//! Status flag values: 0 initial, 1 a rule was just grown, 2 a rule was just
//! removed, 3 the structure stalled and global optimization ran. A second
//! stall while the flag is 3 terminates learning.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::{fcm, init_co_antecedent, init_rule_antecedent, Cluster, ClusterBase, ClusterId, FcmConfig};
use crate::error::{Error, Result};
use crate::gradients::{train_epochs, TrainConfig, TrainMode};
use crate::network::{Ablation, NetworkParams};

/// Initial loss of the empty network, so the first candidate is always accepted.
pub const L_HR_SENTINEL: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnConfig {
    /// Minimum loss decrease for accepting a new rule.
    pub t_g: f64,
    /// Maximum loss increase tolerated when removing a rule.
    pub t_r: f64,
    pub eta: f64,
    pub n_clusters: usize,
    /// Relative uncertainty of the antecedent means around a cluster centroid.
    pub upsilon: f64,
    pub l_init: f64,
    pub episode_max: usize,
    /// SGD passes for every hypothetical network in stage 1.
    pub stage1_iterations: usize,
    /// SGD passes for global optimization in stage 2.
    pub stage2_iterations: usize,
    pub seed: u64,
    pub ablation: Ablation,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            t_g: 0.0025,
            t_r: 0.0025,
            eta: 0.03,
            n_clusters: 5,
            upsilon: 0.1,
            l_init: 0.1,
            episode_max: 100,
            stage1_iterations: 1000,
            stage2_iterations: 3000,
            seed: 0,
            ablation: Ablation::default(),
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.t_r <= self.t_g) {
            return bad(format!("T_r ({}) must not exceed T_g ({}) or learning may cycle", self.t_r, self.t_g));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.eta));
        }
        if self.n_clusters == 0 {
            return bad("need at least one cluster".into());
        }
        if !(0.0..1.0).contains(&self.upsilon) {
            return bad(format!("upsilon must lie in [0, 1), got {}", self.upsilon));
        }
        if !(0.0..=1.0).contains(&self.l_init) {
            return bad(format!("initial link weight must lie in [0, 1], got {}", self.l_init));
        }
        Ok(())
    }
}

/// Loss of the accepted network, status flag and episode counter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerState {
    pub l_hr: f64,
    pub f_s: u8,
    pub episode: usize,
}

impl Default for LearnerState {
    fn default() -> Self {
        LearnerState { l_hr: L_HR_SENTINEL, f_s: 0, episode: 0 }
    }
}

/// Origin cluster of every accepted rule, in rule order. The rule parameters
/// themselves live in [`NetworkParams`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleBase {
    pub provenance: Vec<ClusterId>,
}

impl RuleBase {
    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }
}

/// Growth test: accept when the loss drops by at least `t_g`.
pub fn accept_growth(l_hr: f64, l_g: f64, t_g: f64) -> bool {
    l_hr - l_g >= t_g
}

/// Removal test: remove when the loss rises by strictly less than `t_r`.
pub fn accept_removal(l_hr: f64, l_r: f64, t_r: f64) -> bool {
    l_r - l_hr < t_r
}

/// Best hypothetical network of a growing or removing step.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub loss: f64,
    /// Cluster added (growth) or released (removal).
    pub cluster: ClusterId,
    /// Index of the removed rule; for growth, the index of the new rule.
    pub rule: usize,
    pub params: NetworkParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    /// A rule was grown.
    Grow,
    /// Growth failed and a rule was removed.
    Remove,
    /// Neither growth nor removal succeeded; stage 2 runs.
    Stall,
    /// A second stall while the flag was 3.
    Stop,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Grow => "grow",
            Action::Remove => "remove",
            Action::Stall => "stall",
            Action::Stop => "stop",
        })
    }
}

/// One line of the learning log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub action: Action,
    pub cluster: Option<ClusterId>,
    pub rule: Option<usize>,
    /// Best growth loss of the episode, when a candidate existed.
    pub l_g: Option<f64>,
    /// Best removal loss, when removal was attempted.
    pub l_r: Option<f64>,
    pub m: usize,
    pub l_hr: f64,
    pub f_s_before: u8,
    pub f_s: u8,
    pub stage2: bool,
    pub available: usize,
    pub selected: usize,
}

fn opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), |v| v.to_string())
}

impl fmt::Display for EpisodeRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "episode={} action={} cluster={} rule={} L_g={} L_r={} M={} L_hr={} F_s={}->{} stage2={} available={} selected={}",
            self.episode,
            self.action,
            opt(&self.cluster),
            opt(&self.rule),
            opt(&self.l_g),
            opt(&self.l_r),
            self.m,
            self.l_hr,
            self.f_s_before,
            self.f_s,
            self.stage2,
            self.available,
            self.selected
        )
    }
}

/// SplitMix64 folding of several integers into one seed.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut z = base;
    for &p in parts {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p.wrapping_mul(0xD1B5_4A32_D192_ED03));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

const TAG_GROW: u64 = 1;
const TAG_REMOVE: u64 = 2;
const TAG_GLOBAL: u64 = 3;
const TAG_INIT: u64 = 4;

/// The learner: training data, accepted network and bookkeeping.
#[derive(Debug, Clone)]
pub struct Learner<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [Vec<f64>],
    pub config: LearnConfig,
    pub params: NetworkParams,
    pub state: LearnerState,
    pub rules: RuleBase,
    pub clusters: ClusterBase,
    pub log: Vec<EpisodeRecord>,
}

impl<'a> Learner<'a> {
    /// Prepare a learner with an explicit cluster pool.
    pub fn with_clusters(x: &'a [Vec<f64>], y: &'a [Vec<f64>], config: LearnConfig, clusters: Vec<Cluster>) -> Result<Self> {
        config.validate()?;
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Shape("training set must be non-empty with one target row per input row".into()));
        }
        let (n, k) = (x[0].len(), y[0].len());
        if x.iter().any(|r| r.len() != n) || y.iter().any(|r| r.len() != k) || n == 0 || k == 0 {
            return Err(Error::Shape("ragged or empty training rows".into()));
        }
        if clusters.iter().any(|c| c.centroid.len() != n || c.spread.len() != n) {
            return Err(Error::Shape(format!("cluster dimension must equal the input dimension {n}")));
        }
        let mut params = NetworkParams::empty(n, k, config.l_init, config.ablation);
        params.co_antecedents = init_co_antecedent(x, k);
        Ok(Learner {
            x,
            y,
            config,
            params,
            state: LearnerState::default(),
            rules: RuleBase::default(),
            clusters: ClusterBase::new(clusters),
            log: Vec::new(),
        })
    }

    /// Prepare a learner whose cluster pool comes from fuzzy c-means on `x`.
    pub fn new(x: &'a [Vec<f64>], y: &'a [Vec<f64>], config: LearnConfig) -> Result<Self> {
        config.validate()?;
        let result = fcm(x, &FcmConfig::new(config.n_clusters, config.seed))?;
        Self::with_clusters(x, y, config, result.clusters)
    }

    fn train(&self, params: &mut NetworkParams, iterations: usize, mode: TrainMode, seed: u64) -> Result<f64> {
        let cfg = TrainConfig { eta: self.config.eta, iterations, mode, seed };
        train_epochs(self.x, self.y, params, &cfg)
    }

    /// Try every available cluster as a new rule on top of the accepted
    /// network and return the lowest-loss hypothetical network. `None` when
    /// no cluster is left.
    pub fn grow_candidate(&self) -> Result<Option<Candidate>> {
        let episode = self.state.episode as u64;
        let mut best: Option<Candidate> = None;
        for cluster in &self.clusters.available {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, &[TAG_INIT, episode, cluster.id as u64]));
            let block = self.params.consequents.block_len();
            let c: Vec<f64> = (0..block).map(|_| rng.gen_range(-0.5..=0.5)).collect();
            let s: Vec<f64> = (0..block).map(|_| rng.gen_range(0.0..=0.1)).collect();
            let mut params = self.params.clone();
            params.push_rule(&init_rule_antecedent(cluster, self.config.upsilon), &c, &s);
            let k = params.n_outputs;
            params.reduction = crate::network::ReductionParams::uniform(k, 0.5);
            let seed = derive_seed(self.config.seed, &[TAG_GROW, episode, cluster.id as u64]);
            let loss = self.train(&mut params, self.config.stage1_iterations, TrainMode::Local, seed)?;
            if best.as_ref().is_none_or(|b| loss < b.loss) {
                best = Some(Candidate { loss, cluster: cluster.id, rule: params.n_rules() - 1, params });
            }
        }
        Ok(best)
    }

    /// Retrain the network without each rule in turn and return the removal
    /// with the lowest loss.
    pub fn remove_candidate(&self) -> Result<Candidate> {
        let m = self.params.n_rules();
        if m < 2 {
            return Err(Error::Learning(format!("removal needs at least two rules, have {m}")));
        }
        let episode = self.state.episode as u64;
        let mut best: Option<Candidate> = None;
        for rule in 0..m {
            let mut params = self.params.clone();
            params.remove_rule(rule);
            let seed = derive_seed(self.config.seed, &[TAG_REMOVE, episode, rule as u64]);
            let loss = self.train(&mut params, self.config.stage1_iterations, TrainMode::Local, seed)?;
            if best.as_ref().is_none_or(|b| loss < b.loss) {
                best = Some(Candidate { loss, cluster: self.rules.provenance[rule], rule, params });
            }
        }
        Ok(best.expect("at least two candidates"))
    }

    /// Adopt a grown network if it passes the growth test.
    pub fn try_grow(&mut self, candidate: &Candidate) -> Result<bool> {
        if !accept_growth(self.state.l_hr, candidate.loss, self.config.t_g) {
            return Ok(false);
        }
        self.clusters.select(candidate.cluster)?;
        self.rules.provenance.push(candidate.cluster);
        self.params = candidate.params.clone();
        self.state.l_hr = candidate.loss;
        self.state.f_s = 1;
        Ok(true)
    }

    /// Adopt a pruned network if it passes the removal test.
    pub fn try_remove(&mut self, candidate: &Candidate) -> Result<bool> {
        if !accept_removal(self.state.l_hr, candidate.loss, self.config.t_r) {
            return Ok(false);
        }
        let cluster = self.rules.provenance.remove(candidate.rule);
        self.clusters.release(cluster)?;
        self.params = candidate.params.clone();
        self.state.l_hr = candidate.loss;
        self.state.f_s = 2;
        Ok(true)
    }

    /// Jointly optimize every parameter, antecedents included.
    pub fn global_optimize(&mut self) -> Result<f64> {
        if self.params.n_rules() == 0 {
            return Err(Error::Learning("global optimization needs at least one rule".into()));
        }
        let seed = derive_seed(self.config.seed, &[TAG_GLOBAL, self.state.episode as u64]);
        let mut params = self.params.clone();
        let loss = self.train(&mut params, self.config.stage2_iterations, TrainMode::Global, seed)?;
        self.params = params;
        self.state.l_hr = loss;
        Ok(loss)
    }

    /// Run one episode. Returns `false` once learning has terminated.
    pub fn step(&mut self) -> Result<bool> {
        self.state.episode += 1;
        let f_s_before = self.state.f_s;
        let mut record = EpisodeRecord {
            episode: self.state.episode,
            action: Action::Stall,
            cluster: None,
            rule: None,
            l_g: None,
            l_r: None,
            m: 0,
            l_hr: 0.0,
            f_s_before,
            f_s: 0,
            stage2: false,
            available: 0,
            selected: 0,
        };

        let grow = self.grow_candidate()?;
        record.l_g = grow.as_ref().map(|c| c.loss);
        let grown = match &grow {
            Some(c) => self.try_grow(c)?,
            None => false,
        };
        let mut stalled = false;
        if grown {
            let c = grow.unwrap();
            record.action = Action::Grow;
            record.cluster = Some(c.cluster);
            record.rule = Some(c.rule);
        } else if self.params.n_rules() <= 1 {
            stalled = true;
        } else {
            let c = self.remove_candidate()?;
            record.l_r = Some(c.loss);
            if self.try_remove(&c)? {
                record.action = Action::Remove;
                record.cluster = Some(c.cluster);
                record.rule = Some(c.rule);
            } else {
                stalled = true;
            }
        }

        let mut running = true;
        if stalled {
            if self.params.n_rules() == 0 {
                return Err(Error::Learning("no rule could be grown from the cluster pool".into()));
            }
            if self.state.f_s == 3 {
                record.action = Action::Stop;
                running = false;
            } else {
                self.state.f_s = 3;
            }
        }
        if running && self.state.f_s == 3 {
            self.global_optimize()?;
            record.stage2 = true;
        }

        record.m = self.params.n_rules();
        record.l_hr = self.state.l_hr;
        record.f_s = self.state.f_s;
        record.available = self.clusters.available.len();
        record.selected = self.clusters.selected.len();
        self.log.push(record);
        Ok(running)
    }

    /// Run episodes until termination or the episode budget is spent.
    pub fn run(&mut self) -> Result<()> {
        while self.state.episode < self.config.episode_max {
            if !self.step()? {
                break;
            }
        }
        Ok(())
    }
}

/// Result of a complete structure-learning run.
#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub params: NetworkParams,
    pub log: Vec<EpisodeRecord>,
    pub rules: RuleBase,
    pub clusters: ClusterBase,
    pub state: LearnerState,
}

fn finish(learner: Learner) -> LearnOutcome {
    LearnOutcome { params: learner.params, log: learner.log, rules: learner.rules, clusters: learner.clusters, state: learner.state }
}

/// Cluster the inputs and run the full two-stage learning loop.
pub fn learn(x: &[Vec<f64>], y: &[Vec<f64>], config: &LearnConfig) -> Result<LearnOutcome> {
    let mut learner = Learner::new(x, y, config.clone())?;
    learner.run()?;
    Ok(finish(learner))
}

/// Run the learning loop on a caller-supplied cluster pool.
pub fn learn_with_clusters(x: &[Vec<f64>], y: &[Vec<f64>], config: &LearnConfig, clusters: Vec<Cluster>) -> Result<LearnOutcome> {
    let mut learner = Learner::with_clusters(x, y, config.clone(), clusters)?;
    learner.run()?;
    Ok(finish(learner))
}
