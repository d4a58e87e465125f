//! Pre-stage: max-min normalization, fuzzy c-means, and initialization of the
//! antecedent and co-antecedent memberships from cluster statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{CoMf, It2Mf};
use crate::network::SIGMA_MIN;

/// Per-dimension affine scaling onto `[0, 1]` fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let dims = rows.first().map(|r| r.len()).ok_or_else(|| Error::Shape("cannot fit a normalizer on no rows".into()))?;
        let mut min = vec![f64::INFINITY; dims];
        let mut max = vec![f64::NEG_INFINITY; dims];
        for row in rows {
            if row.len() != dims {
                return Err(Error::Shape("ragged rows".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Self::from_bounds(min, max)
    }

    pub fn from_bounds(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::Shape("min/max length mismatch".into()));
        }
        for (dim, (lo, hi)) in min.iter().zip(&max).enumerate() {
            if !(hi > lo) {
                return Err(Error::ConstantColumn { dim, value: *lo });
            }
        }
        Ok(Normalizer { min, max })
    }

    pub fn dims(&self) -> usize {
        self.min.len()
    }

    /// Single-dimension scaler taken from column `dim`.
    pub fn column(&self, dim: usize) -> Normalizer {
        Normalizer { min: vec![self.min[dim]], max: vec![self.max[dim]] }
    }

    #[inline]
    pub fn apply_value(&self, dim: usize, v: f64) -> f64 {
        (v - self.min[dim]) / (self.max[dim] - self.min[dim])
    }

    #[inline]
    pub fn invert_value(&self, dim: usize, v: f64) -> f64 {
        v * (self.max[dim] - self.min[dim]) + self.min[dim]
    }

    /// Values outside the fitted range extrapolate linearly; nothing is clipped.
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, &v)| self.apply_value(j, v)).collect()
    }

    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, &v)| self.invert_value(j, v)).collect()
    }
}

/// Column means and population standard deviations.
pub fn column_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.first().map_or(0, |r| r.len());
    let count = rows.len() as f64;
    let mut mean = vec![0.0; n];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; n];
    for row in rows {
        for j in 0..n {
            let d = row[j] - mean[j];
            var[j] += d * d;
        }
    }
    let std = var.into_iter().map(|v| (v / count).sqrt()).collect();
    (mean, std)
}

pub type ClusterId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: ClusterId,
    pub centroid: Vec<f64>,
    pub spread: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcmConfig {
    pub n_clusters: usize,
    pub fuzzifier: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl FcmConfig {
    pub fn new(n_clusters: usize, seed: u64) -> Self {
        FcmConfig { n_clusters, fuzzifier: 2.0, tol: 1e-6, max_iter: 300, seed }
    }
}

#[derive(Debug, Clone)]
pub struct FcmResult {
    pub clusters: Vec<Cluster>,
    /// `[sample][cluster]`, each row sums to one.
    pub memberships: Vec<Vec<f64>>,
    /// Objective `J_m` after each iteration.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn objective(data: &[Vec<f64>], u: &[Vec<f64>], centroids: &[Vec<f64>], fuzzifier: f64) -> f64 {
    data.iter()
        .zip(u)
        .map(|(x, row)| row.iter().zip(centroids).map(|(uic, v)| uic.powf(fuzzifier) * sq_dist(x, v)).sum::<f64>())
        .sum()
}

fn update_centroids(data: &[Vec<f64>], u: &[Vec<f64>], c: usize, fuzzifier: f64) -> Vec<Vec<f64>> {
    let n = data[0].len();
    let mut centroids = vec![vec![0.0; n]; c];
    let mut weight = vec![0.0; c];
    for (x, row) in data.iter().zip(u) {
        for cl in 0..c {
            let w = row[cl].powf(fuzzifier);
            weight[cl] += w;
            for j in 0..n {
                centroids[cl][j] += w * x[j];
            }
        }
    }
    for (v, w) in centroids.iter_mut().zip(&weight) {
        v.iter_mut().for_each(|e| *e /= w);
    }
    centroids
}

fn update_memberships(data: &[Vec<f64>], centroids: &[Vec<f64>], fuzzifier: f64, u: &mut [Vec<f64>]) {
    let exponent = 1.0 / (fuzzifier - 1.0);
    for (x, row) in data.iter().zip(u.iter_mut()) {
        let d: Vec<f64> = centroids.iter().map(|v| sq_dist(x, v)).collect();
        let zeros = d.iter().filter(|&&v| v == 0.0).count();
        if zeros > 0 {
            // coincident with one or more centroids: share full membership among them
            for (uic, dc) in row.iter_mut().zip(&d) {
                *uic = if *dc == 0.0 { 1.0 / zeros as f64 } else { 0.0 };
            }
            continue;
        }
        // u_ic = 1 / sum_l (d_ic / d_il)^(1/(m-1)) with squared distances
        for c in 0..d.len() {
            let s: f64 = d.iter().map(|dl| (d[c] / dl).powf(exponent)).sum();
            row[c] = 1.0 / s;
        }
    }
}

/// Bezdek fuzzy c-means on the rows of `data`.
pub fn fcm(data: &[Vec<f64>], config: &FcmConfig) -> Result<FcmResult> {
    let c = config.n_clusters;
    if c == 0 || data.len() < c {
        return Err(Error::Config(format!("fcm needs 1 <= N_c <= N (N_c = {c}, N = {})", data.len())));
    }
    if !(config.fuzzifier > 1.0) {
        return Err(Error::Config("fcm fuzzifier must exceed 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut u: Vec<Vec<f64>> = data
        .iter()
        .map(|_| {
            let raw: Vec<f64> = (0..c).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        })
        .collect();

    let mut centroids = update_centroids(data, &u, c, config.fuzzifier);
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..config.max_iter {
        iterations += 1;
        update_memberships(data, &centroids, config.fuzzifier, &mut u);
        let next = update_centroids(data, &u, c, config.fuzzifier);
        let shift = next
            .iter()
            .zip(&centroids)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        history.push(objective(data, &u, &centroids, config.fuzzifier));
        if shift < config.tol {
            break;
        }
    }

    let n = data[0].len();
    let clusters = (0..c)
        .map(|cl| {
            let mut num = vec![0.0; n];
            let mut den = 0.0;
            for (x, row) in data.iter().zip(&u) {
                let w = row[cl].powf(config.fuzzifier);
                den += w;
                for j in 0..n {
                    let d = x[j] - centroids[cl][j];
                    num[j] += w * d * d;
                }
            }
            let spread = num.iter().map(|v| (v / den).sqrt().max(SIGMA_MIN)).collect();
            Cluster { id: cl, centroid: centroids[cl].clone(), spread }
        })
        .collect();
    Ok(FcmResult { clusters, memberships: u, objective: history, iterations })
}

/// IT2 antecedent row from a cluster: means `m (1 - upsilon)` and
/// `m (1 + upsilon)` (sorted), standard deviation from the cluster spread.
pub fn init_rule_antecedent(cluster: &Cluster, upsilon: f64) -> Vec<It2Mf> {
    cluster
        .centroid
        .iter()
        .zip(&cluster.spread)
        .map(|(&m, &s)| {
            let (a, b) = (m * (1.0 - upsilon), m * (1.0 + upsilon));
            It2Mf { m1: a.min(b), m2: a.max(b), sigma: s.max(SIGMA_MIN) }
        })
        .collect()
}

/// Co-antecedent memberships for `k` outputs: every output starts from the
/// global column mean and population standard deviation.
pub fn init_co_antecedent(data: &[Vec<f64>], k: usize) -> Vec<CoMf> {
    let (mean, std) = column_stats(data);
    let row: Vec<CoMf> = mean.iter().zip(&std).map(|(&m, &s)| CoMf::new(m, s.max(SIGMA_MIN))).collect();
    (0..k).flat_map(|_| row.iter().copied()).collect()
}

/// Available (`B^C`) and consumed (`B^S`) clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterBase {
    pub available: Vec<Cluster>,
    pub selected: Vec<Cluster>,
}

impl ClusterBase {
    pub fn new(clusters: Vec<Cluster>) -> Self {
        ClusterBase { available: clusters, selected: Vec::new() }
    }

    pub fn total(&self) -> usize {
        self.available.len() + self.selected.len()
    }

    pub fn get(&self, id: ClusterId) -> Option<&Cluster> {
        self.available.iter().chain(&self.selected).find(|c| c.id == id)
    }

    /// Move a cluster from available to selected.
    pub fn select(&mut self, id: ClusterId) -> Result<()> {
        let pos = self
            .available
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| Error::Learning(format!("cluster {id} is not available")))?;
        let cl = self.available.remove(pos);
        self.selected.push(cl);
        Ok(())
    }

    /// Move a cluster from selected back to available, keeping id order.
    pub fn release(&mut self, id: ClusterId) -> Result<()> {
        let pos = self
            .selected
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| Error::Learning(format!("cluster {id} is not selected")))?;
        let cl = self.selected.remove(pos);
        let at = self.available.partition_point(|c| c.id < id);
        self.available.insert(at, cl);
        Ok(())
    }

    pub fn is_disjoint(&self) -> bool {
        self.available.iter().all(|a| self.selected.iter().all(|s| s.id != a.id))
    }
}
