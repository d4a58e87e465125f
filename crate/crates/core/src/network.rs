//! The nine-layer network: parameter storage, forward pass and the
//! interpretability firing report.
//!
//! Layer order: input, antecedent (IT2 Gaussians), rule, co-antecedent,
//! log-sum transformation, interval TSK consequents, q-weighted type
//! reduction, defuzzification, link.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{clamped_ln, eval_lmf, eval_umf, transform_log_sums, CoMf, FiringInterval, It2Mf};

/// Lower bound kept on every standard deviation after a training step.
pub const SIGMA_MIN: f64 = 1e-3;

/// Structural switches that remove or rewire layers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    /// Bypass the co-antecedent layer; firing uses rule memberships only.
    #[serde(default)]
    pub no_layer4: bool,
    /// Freeze the link weight at zero.
    #[serde(default)]
    pub no_layer9: bool,
    /// One interval consequent per rule, shared by every output.
    #[serde(default)]
    pub shared_consequents: bool,
}

impl Ablation {
    pub fn all() -> Self {
        Ablation { no_layer4: true, no_layer9: true, shared_consequents: true }
    }
}

/// Interval TSK consequents, stored row-major as `[rule][slot][0..=n]`, where
/// index 0 is the bias term and `slot` is the output (or always 0 when the
/// consequents are shared across outputs).
#[derive(Debug, Clone, PartialEq)]
pub struct ConsequentParams {
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub slots: usize,
    pub width: usize,
}

impl ConsequentParams {
    pub fn zeros(n_rules: usize, slots: usize, n_inputs: usize) -> Self {
        let len = n_rules * slots * (n_inputs + 1);
        ConsequentParams { c: vec![0.0; len], s: vec![0.0; len], slots, width: n_inputs + 1 }
    }

    #[inline]
    pub fn offset(&self, rule: usize, output: usize) -> usize {
        let slot = if self.slots == 1 { 0 } else { output };
        (rule * self.slots + slot) * self.width
    }

    pub fn block_len(&self) -> usize {
        self.slots * self.width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionParams {
    pub q_l: Vec<f64>,
    pub q_r: Vec<f64>,
    pub q_o: Vec<f64>,
}

impl ReductionParams {
    pub fn uniform(k: usize, q: f64) -> Self {
        ReductionParams { q_l: vec![q; k], q_r: vec![q; k], q_o: vec![q; k] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParam(pub f64);

/// The complete trainable parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub n_inputs: usize,
    pub n_outputs: usize,
    /// `[rule][input]`, row-major.
    pub antecedents: Vec<It2Mf>,
    /// `[output][input]`, row-major.
    pub co_antecedents: Vec<CoMf>,
    pub consequents: ConsequentParams,
    pub reduction: ReductionParams,
    pub link: LinkParam,
    pub ablation: Ablation,
}

impl NetworkParams {
    /// A network shell with no rules. Co-antecedents start at unit Gaussians
    /// centred at 0.5, q-weights at 0.5.
    pub fn empty(n_inputs: usize, n_outputs: usize, link: f64, ablation: Ablation) -> Self {
        let slots = if ablation.shared_consequents { 1 } else { n_outputs };
        NetworkParams {
            n_inputs,
            n_outputs,
            antecedents: Vec::new(),
            co_antecedents: vec![CoMf::new(0.5, 1.0); n_outputs * n_inputs],
            consequents: ConsequentParams::zeros(0, slots, n_inputs),
            reduction: ReductionParams::uniform(n_outputs, 0.5),
            link: LinkParam(if ablation.no_layer9 { 0.0 } else { link }),
            ablation,
        }
    }

    #[inline]
    pub fn n_rules(&self) -> usize {
        if self.n_inputs == 0 {
            0
        } else {
            self.antecedents.len() / self.n_inputs
        }
    }

    pub fn antecedent(&self, rule: usize, input: usize) -> &It2Mf {
        &self.antecedents[rule * self.n_inputs + input]
    }

    pub fn antecedent_row(&self, rule: usize) -> &[It2Mf] {
        &self.antecedents[rule * self.n_inputs..(rule + 1) * self.n_inputs]
    }

    pub fn co_antecedent_row(&self, output: usize) -> &[CoMf] {
        &self.co_antecedents[output * self.n_inputs..(output + 1) * self.n_inputs]
    }

    /// Append a rule. `c` and `s` hold `slots * (n + 1)` entries.
    pub fn push_rule(&mut self, antecedent: &[It2Mf], c: &[f64], s: &[f64]) {
        assert_eq!(antecedent.len(), self.n_inputs);
        assert_eq!(c.len(), self.consequents.block_len());
        assert_eq!(s.len(), self.consequents.block_len());
        self.antecedents.extend_from_slice(antecedent);
        self.consequents.c.extend_from_slice(c);
        self.consequents.s.extend_from_slice(s);
    }

    pub fn remove_rule(&mut self, rule: usize) {
        let n = self.n_inputs;
        self.antecedents.drain(rule * n..(rule + 1) * n);
        let b = self.consequents.block_len();
        self.consequents.c.drain(rule * b..(rule + 1) * b);
        self.consequents.s.drain(rule * b..(rule + 1) * b);
    }

    /// Number of trainable scalars when every parameter is optimized.
    pub fn param_count(&self) -> usize {
        let (n, m, k) = (self.n_inputs, self.n_rules(), self.n_outputs);
        let mut count = n * 3 * m;
        if !self.ablation.no_layer4 {
            count += 2 * k * n;
        }
        count += (n + 1) * 2 * m * self.consequents.slots;
        count += 2 * k + k;
        if !self.ablation.no_layer9 {
            count += 1;
        }
        count
    }

    /// Flatten every trainable scalar in a fixed order: antecedents
    /// (m1, m2, sigma per rule/input), co-antecedents (m, sigma), consequent
    /// centres, consequent spreads, q_l, q_r, q_o, link.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for mf in &self.antecedents {
            out.extend_from_slice(&[mf.m1, mf.m2, mf.sigma]);
        }
        if !self.ablation.no_layer4 {
            for mf in &self.co_antecedents {
                out.extend_from_slice(&[mf.m, mf.sigma]);
            }
        }
        out.extend_from_slice(&self.consequents.c);
        out.extend_from_slice(&self.consequents.s);
        out.extend_from_slice(&self.reduction.q_l);
        out.extend_from_slice(&self.reduction.q_r);
        out.extend_from_slice(&self.reduction.q_o);
        if !self.ablation.no_layer9 {
            out.push(self.link.0);
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten). No projection is applied.
    pub fn unflatten(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.param_count());
        let mut it = values.iter().copied();
        let mut next = || it.next().unwrap();
        for mf in &mut self.antecedents {
            mf.m1 = next();
            mf.m2 = next();
            mf.sigma = next();
        }
        if !self.ablation.no_layer4 {
            for mf in &mut self.co_antecedents {
                mf.m = next();
                mf.sigma = next();
            }
        }
        for v in self.consequents.c.iter_mut() {
            *v = next();
        }
        for v in self.consequents.s.iter_mut() {
            *v = next();
        }
        for v in self.reduction.q_l.iter_mut() {
            *v = next();
        }
        for v in self.reduction.q_r.iter_mut() {
            *v = next();
        }
        for v in self.reduction.q_o.iter_mut() {
            *v = next();
        }
        if !self.ablation.no_layer9 {
            self.link.0 = next();
        }
    }

    /// Restore every invariant: spreads non-negative, q-weights and link in
    /// `[0, 1]`, standard deviations at least [`SIGMA_MIN`], and `m1 <= m2`
    /// (both set to their midpoint when violated).
    pub fn project(&mut self) {
        for mf in &mut self.antecedents {
            if mf.m1 > mf.m2 {
                let mid = 0.5 * (mf.m1 + mf.m2);
                mf.m1 = mid;
                mf.m2 = mid;
            }
            if !(mf.sigma >= SIGMA_MIN) {
                mf.sigma = SIGMA_MIN;
            }
        }
        for mf in &mut self.co_antecedents {
            if !(mf.sigma >= SIGMA_MIN) {
                mf.sigma = SIGMA_MIN;
            }
        }
        for s in &mut self.consequents.s {
            if *s < 0.0 {
                *s = 0.0;
            }
        }
        let r = &mut self.reduction;
        for q in r.q_l.iter_mut().chain(r.q_r.iter_mut()).chain(r.q_o.iter_mut()) {
            *q = q.clamp(0.0, 1.0);
        }
        self.link.0 = if self.ablation.no_layer9 { 0.0 } else { self.link.0.clamp(0.0, 1.0) };
    }

    /// Check shapes and every parameter constraint, naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        let (n, k) = (self.n_inputs, self.n_outputs);
        let bad = |field: String, msg: &str| Err(Error::ModelField { field, msg: msg.to_string() });
        if n == 0 || k == 0 {
            return bad("dims".into(), "n and K must be positive");
        }
        if !self.antecedents.len().is_multiple_of(n) {
            return bad("antecedents".into(), "length is not a multiple of n");
        }
        let m = self.n_rules();
        if self.co_antecedents.len() != k * n {
            return bad("co_antecedents".into(), "expected K x n entries");
        }
        let slots = if self.ablation.shared_consequents { 1 } else { k };
        let want = m * slots * (n + 1);
        if self.consequents.slots != slots || self.consequents.c.len() != want || self.consequents.s.len() != want {
            return bad("consequents".into(), "shape does not match dims");
        }
        for (name, v) in [("q_l", &self.reduction.q_l), ("q_r", &self.reduction.q_r), ("q_o", &self.reduction.q_o)] {
            if v.len() != k {
                return bad(format!("reduction.{name}"), "expected K entries");
            }
            for (i, q) in v.iter().enumerate() {
                if !(0.0..=1.0).contains(q) {
                    return bad(format!("reduction.{name}[{i}]"), "must lie in [0, 1]");
                }
            }
        }
        for (idx, mf) in self.antecedents.iter().enumerate() {
            if !mf.is_valid() {
                return bad(
                    format!("antecedents[{}][{}]", idx / n, idx % n),
                    "requires finite m1 <= m2 and sigma > 0",
                );
            }
        }
        for (idx, mf) in self.co_antecedents.iter().enumerate() {
            if !mf.is_valid() {
                return bad(format!("co_antecedents[{}][{}]", idx / n, idx % n), "requires sigma > 0");
            }
        }
        let w = n + 1;
        for (idx, s) in self.consequents.s.iter().enumerate() {
            if !(*s >= 0.0) || !s.is_finite() {
                return bad(
                    format!("consequents.s[{}][{}][{}]", idx / (slots * w), (idx / w) % slots, idx % w),
                    "spread must be finite and >= 0",
                );
            }
        }
        for (idx, c) in self.consequents.c.iter().enumerate() {
            if !c.is_finite() {
                return bad(
                    format!("consequents.c[{}][{}][{}]", idx / (slots * w), (idx / w) % slots, idx % w),
                    "must be finite",
                );
            }
        }
        if !(0.0..=1.0).contains(&self.link.0) {
            return bad("link".into(), "must lie in [0, 1]");
        }
        if self.ablation.no_layer9 && self.link.0 != 0.0 {
            return bad("link".into(), "must be 0 when the link layer is disabled");
        }
        Ok(())
    }
}

/// Interval consequent `[w_l, w_r]` of one rule for one output.
pub fn consequent_interval(x: &[f64], rule: usize, output: usize, params: &ConsequentParams) -> (f64, f64) {
    let off = params.offset(rule, output);
    let c = &params.c[off..off + params.width];
    let s = &params.s[off..off + params.width];
    let mut centre = c[0];
    let mut spread = s[0];
    for (j, &xj) in x.iter().enumerate() {
        centre += c[j + 1] * xj;
        spread += s[j + 1] * xj.abs();
    }
    (centre - spread, centre + spread)
}

/// Left and right end points of one output's type-reduced interval.
/// The denominator is the sum of `lower + upper` over every rule.
pub fn type_reduce(f: &[FiringInterval], w_l: &[f64], w_r: &[f64], q_l: f64, q_r: f64) -> (f64, f64) {
    let mut denom = 0.0;
    let (mut lo_l, mut up_l, mut lo_r, mut up_r) = (0.0, 0.0, 0.0, 0.0);
    for ((fi, &wl), &wr) in f.iter().zip(w_l).zip(w_r) {
        denom += fi.lower + fi.upper;
        lo_l += fi.lower * wl;
        up_l += fi.upper * wl;
        lo_r += fi.lower * wr;
        up_r += fi.upper * wr;
    }
    (
        ((1.0 - q_l) * lo_l + q_l * up_l) / denom,
        ((1.0 - q_r) * lo_r + q_r * up_r) / denom,
    )
}

#[inline]
pub fn defuzzify(y_l: f64, y_r: f64, q_o: f64) -> f64 {
    q_o * y_l + (1.0 - q_o) * y_r
}

/// Recursive link: each output blends its own prediction with the previous
/// linked output (the last input for the first step).
pub fn link_chain(y_prime: &[f64], x_n: f64, l: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(y_prime.len());
    let mut prev = x_n;
    for &yp in y_prime {
        prev = (1.0 - l) * yp + l * prev;
        out.push(prev);
    }
    out
}

/// Unrolled form of [`link_chain`]:
/// `y^K = sum_k l^(K-k) (1-l) y'^k + l^K x_n`.
pub fn link_closed_form(y_prime: &[f64], x_n: f64, l: f64) -> Vec<f64> {
    (1..=y_prime.len())
        .map(|big_k| {
            let mut acc = l.powi(big_k as i32) * x_n;
            for k in 1..=big_k {
                acc += l.powi((big_k - k) as i32) * (1.0 - l) * y_prime[k - 1];
            }
            acc
        })
        .collect()
}

/// Every intermediate of one forward pass, kept for the gradient pass.
/// Buffers are reused across calls to [`forward_into`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForwardTrace {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    /// `[rule][input]`
    pub mu_lower: Vec<f64>,
    pub mu_upper: Vec<f64>,
    /// Raw products (may underflow; informational only).
    pub rule_lower: Vec<f64>,
    pub rule_upper: Vec<f64>,
    pub ln_rule_lower: Vec<f64>,
    pub ln_rule_upper: Vec<f64>,
    /// `[output][input]`
    pub co_grades: Vec<f64>,
    pub co: Vec<f64>,
    pub ln_co: Vec<f64>,
    /// `[rule][output]`
    pub f_lower: Vec<f64>,
    pub f_upper: Vec<f64>,
    pub w_l: Vec<f64>,
    pub w_r: Vec<f64>,
    /// `[output]`
    pub denom: Vec<f64>,
    pub y_l: Vec<f64>,
    pub y_r: Vec<f64>,
    pub y_prime: Vec<f64>,
    pub y: Vec<f64>,
    pub x_n: f64,
}

impl ForwardTrace {
    fn resize(&mut self, n: usize, m: usize, k: usize) {
        self.n = n;
        self.m = m;
        self.k = k;
        for v in [&mut self.mu_lower, &mut self.mu_upper] {
            v.resize(m * n, 0.0);
        }
        for v in [&mut self.rule_lower, &mut self.rule_upper, &mut self.ln_rule_lower, &mut self.ln_rule_upper] {
            v.resize(m, 0.0);
        }
        self.co_grades.resize(k * n, 0.0);
        for v in [&mut self.co, &mut self.ln_co, &mut self.denom, &mut self.y_l, &mut self.y_r, &mut self.y_prime, &mut self.y] {
            v.resize(k, 0.0);
        }
        for v in [&mut self.f_lower, &mut self.f_upper, &mut self.w_l, &mut self.w_r] {
            v.resize(m * k, 0.0);
        }
    }

    pub fn firing(&self, rule: usize, output: usize) -> FiringInterval {
        let idx = rule * self.k + output;
        FiringInterval { lower: self.f_lower[idx], upper: self.f_upper[idx] }
    }
}

/// Run layers 1 to 9 on one normalized input, writing every intermediate into `trace`.
pub fn forward_into(x: &[f64], params: &NetworkParams, trace: &mut ForwardTrace) {
    let (n, m, k) = (params.n_inputs, params.n_rules(), params.n_outputs);
    assert_eq!(x.len(), n, "input length must equal n");
    assert!(m >= 1, "forward pass needs at least one rule");
    trace.resize(n, m, k);

    // layers 2-3
    for i in 0..m {
        let (mut prod_lo, mut prod_up, mut ln_lo, mut ln_up) = (1.0, 1.0, 0.0, 0.0);
        for j in 0..n {
            let mf = &params.antecedents[i * n + j];
            let lo = eval_lmf(x[j], mf);
            let up = eval_umf(x[j], mf);
            trace.mu_lower[i * n + j] = lo;
            trace.mu_upper[i * n + j] = up;
            prod_lo *= lo;
            prod_up *= up;
            ln_lo += clamped_ln(lo).0;
            ln_up += clamped_ln(up).0;
        }
        trace.rule_lower[i] = prod_lo;
        trace.rule_upper[i] = prod_up;
        trace.ln_rule_lower[i] = ln_lo;
        trace.ln_rule_upper[i] = ln_up;
    }

    // layer 4
    for kk in 0..k {
        if params.ablation.no_layer4 {
            trace.co[kk] = 1.0;
            trace.ln_co[kk] = 0.0;
            continue;
        }
        let (mut prod, mut ln) = (1.0, 0.0);
        for j in 0..n {
            let g = params.co_antecedents[kk * n + j].eval(x[j]);
            trace.co_grades[kk * n + j] = g;
            prod *= g;
            ln += clamped_ln(g).0;
        }
        trace.co[kk] = prod;
        trace.ln_co[kk] = ln;
    }

    // layers 5-6
    for i in 0..m {
        for kk in 0..k {
            let f = transform_log_sums(trace.ln_rule_lower[i], trace.ln_rule_upper[i], trace.ln_co[kk]);
            let (wl, wr) = consequent_interval(x, i, kk, &params.consequents);
            let idx = i * k + kk;
            trace.f_lower[idx] = f.lower;
            trace.f_upper[idx] = f.upper;
            trace.w_l[idx] = wl;
            trace.w_r[idx] = wr;
        }
    }

    // layers 7-8
    let red = &params.reduction;
    for kk in 0..k {
        let mut denom = 0.0;
        let (mut lo_l, mut up_l, mut lo_r, mut up_r) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..m {
            let idx = i * k + kk;
            let (fl, fu) = (trace.f_lower[idx], trace.f_upper[idx]);
            denom += fl + fu;
            lo_l += fl * trace.w_l[idx];
            up_l += fu * trace.w_l[idx];
            lo_r += fl * trace.w_r[idx];
            up_r += fu * trace.w_r[idx];
        }
        let yl = ((1.0 - red.q_l[kk]) * lo_l + red.q_l[kk] * up_l) / denom;
        let yr = ((1.0 - red.q_r[kk]) * lo_r + red.q_r[kk] * up_r) / denom;
        trace.denom[kk] = denom;
        trace.y_l[kk] = yl;
        trace.y_r[kk] = yr;
        trace.y_prime[kk] = defuzzify(yl, yr, red.q_o[kk]);
    }

    // layer 9
    let l = params.link.0;
    trace.x_n = x[n - 1];
    let mut prev = trace.x_n;
    for kk in 0..k {
        prev = (1.0 - l) * trace.y_prime[kk] + l * prev;
        trace.y[kk] = prev;
    }
}

/// Forward pass returning the predictions and a fresh trace.
pub fn forward(x: &[f64], params: &NetworkParams) -> (Vec<f64>, ForwardTrace) {
    let mut trace = ForwardTrace::default();
    forward_into(x, params, &mut trace);
    (trace.y.clone(), trace)
}

/// Prediction only.
pub fn predict(x: &[f64], params: &NetworkParams) -> Vec<f64> {
    forward(x, params).0
}

/// Firing strengths for interpretability dumps: the rule-only interval `F^i`
/// and the per-output interval `F^{i,k}` (`[rule][output]`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiringReport {
    pub rule: Vec<FiringInterval>,
    pub rule_output: Vec<FiringInterval>,
    pub n_outputs: usize,
}

pub fn firing_report(x: &[f64], params: &NetworkParams) -> FiringReport {
    let (_, trace) = forward(x, params);
    let rule = (0..trace.m)
        .map(|i| transform_log_sums(trace.ln_rule_lower[i], trace.ln_rule_upper[i], 0.0))
        .collect();
    let rule_output = (0..trace.m * trace.k)
        .map(|idx| FiringInterval { lower: trace.f_lower[idx], upper: trace.f_upper[idx] })
        .collect();
    FiringReport { rule, rule_output, n_outputs: trace.k }
}
