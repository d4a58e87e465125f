//! Loss, analytic gradients, projected SGD and the finite-difference oracle.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fuzzy::{CoMf, It2Mf, GRADE_EPS};
use crate::network::{forward_into, Ablation, ForwardTrace, NetworkParams};

/// Which parameters receive gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Antecedent IT2 memberships are frozen (structure-learning fits).
    Local,
    /// Every parameter is optimized (fine-tuning).
    Global,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub eta: f64,
    pub iterations: usize,
    pub mode: TrainMode,
    pub seed: u64,
}

/// One partial derivative per trainable scalar, laid out like [`NetworkParams`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientSet {
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub sigma: Vec<f64>,
    pub co_m: Vec<f64>,
    pub co_sigma: Vec<f64>,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub q_l: Vec<f64>,
    pub q_r: Vec<f64>,
    pub q_o: Vec<f64>,
    pub l: f64,
    no_layer4: bool,
    no_layer9: bool,
}

impl GradientSet {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        let mut g = GradientSet::default();
        g.reset(params);
        g
    }

    fn reset(&mut self, params: &NetworkParams) {
        let a = params.antecedents.len();
        let co = params.co_antecedents.len();
        let cs = params.consequents.c.len();
        let k = params.n_outputs;
        for (v, len) in [
            (&mut self.m1, a),
            (&mut self.m2, a),
            (&mut self.sigma, a),
            (&mut self.co_m, co),
            (&mut self.co_sigma, co),
            (&mut self.c, cs),
            (&mut self.s, cs),
            (&mut self.q_l, k),
            (&mut self.q_r, k),
            (&mut self.q_o, k),
        ] {
            v.clear();
            v.resize(len, 0.0);
        }
        self.l = 0.0;
        self.no_layer4 = params.ablation.no_layer4;
        self.no_layer9 = params.ablation.no_layer9;
    }

    /// Same order as [`NetworkParams::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for idx in 0..self.m1.len() {
            out.extend_from_slice(&[self.m1[idx], self.m2[idx], self.sigma[idx]]);
        }
        if !self.no_layer4 {
            for idx in 0..self.co_m.len() {
                out.extend_from_slice(&[self.co_m[idx], self.co_sigma[idx]]);
            }
        }
        out.extend_from_slice(&self.c);
        out.extend_from_slice(&self.s);
        out.extend_from_slice(&self.q_l);
        out.extend_from_slice(&self.q_r);
        out.extend_from_slice(&self.q_o);
        if !self.no_layer9 {
            out.push(self.l);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

/// `E = 0.5 * sum_k (y_k - target_k)^2`.
pub fn loss(predictions: &[f64], targets: &[f64]) -> f64 {
    assert_eq!(predictions.len(), targets.len());
    0.5 * predictions.iter().zip(targets).map(|(y, t)| (y - t) * (y - t)).sum::<f64>()
}

/// Derivative of every linked output `y^K` (K = 1..=len) with respect to the
/// link weight, obtained by differentiating the unrolled form
/// `y^K = sum_k l^(K-k) (1-l) y'^k + l^K x_n`.
pub fn link_output_derivatives(y_prime: &[f64], x_n: f64, l: f64) -> Vec<f64> {
    (1..=y_prime.len())
        .map(|big_k| {
            let mut acc = big_k as f64 * l.powi(big_k as i32 - 1) * x_n;
            for k in 1..=big_k {
                let p = big_k - k;
                // d/dl [l^p (1 - l)] = p l^(p-1) (1 - l) - l^p
                let dp = if p == 0 { 0.0 } else { p as f64 * l.powi(p as i32 - 1) };
                acc += (dp * (1.0 - l) - l.powi(p as i32)) * y_prime[k - 1];
            }
            acc
        })
        .collect()
}

/// `dE/dl` summed over all outputs.
pub fn grad_l(trace: &ForwardTrace, targets: &[f64], params: &NetworkParams) -> f64 {
    let dy = link_output_derivatives(&trace.y_prime, trace.x_n, params.link.0);
    trace.y.iter().zip(targets).zip(dy).map(|((y, t), d)| (y - t) * d).sum()
}

/// Analytic gradient of the per-sample loss. `trace` must come from
/// [`forward_into`] on the same `x` and `params`.
pub fn backward(
    trace: &ForwardTrace,
    x: &[f64],
    targets: &[f64],
    params: &NetworkParams,
    mode: TrainMode,
) -> GradientSet {
    let mut g = GradientSet::default();
    backward_into(trace, x, targets, params, mode, &mut g, &mut Scratch::default());
    g
}

/// Reusable buffers for [`backward_into`].
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    g_y: Vec<f64>,
    g_yp: Vec<f64>,
    g_ln_lo: Vec<f64>,
    g_ln_up: Vec<f64>,
    g_ln_co: Vec<f64>,
}

pub fn backward_into(
    trace: &ForwardTrace,
    x: &[f64],
    targets: &[f64],
    params: &NetworkParams,
    mode: TrainMode,
    g: &mut GradientSet,
    scratch: &mut Scratch,
) {
    let (n, m, k) = (trace.n, trace.m, trace.k);
    assert_eq!(targets.len(), k);
    g.reset(params);
    let l = params.link.0;
    let red = &params.reduction;

    // dE/dy^k
    scratch.g_y.clear();
    scratch.g_y.extend(trace.y.iter().zip(targets).map(|(y, t)| y - t));

    // dE/dy'^k = sum_{K >= k} dE/dy^K l^(K-k) (1-l)
    scratch.g_yp.clear();
    scratch.g_yp.resize(k, 0.0);
    let mut carry = 0.0;
    for kk in (0..k).rev() {
        carry = scratch.g_y[kk] + l * carry;
        scratch.g_yp[kk] = (1.0 - l) * carry;
    }

    if !params.ablation.no_layer9 {
        let dy = link_output_derivatives(&trace.y_prime, trace.x_n, l);
        g.l = scratch.g_y.iter().zip(&dy).map(|(a, b)| a * b).sum();
    }

    scratch.g_ln_lo.clear();
    scratch.g_ln_lo.resize(m, 0.0);
    scratch.g_ln_up.clear();
    scratch.g_ln_up.resize(m, 0.0);
    scratch.g_ln_co.clear();
    scratch.g_ln_co.resize(k, 0.0);

    let w = n + 1;
    for kk in 0..k {
        let g_yp = scratch.g_yp[kk];
        let (ql, qr, qo) = (red.q_l[kk], red.q_r[kk], red.q_o[kk]);
        let (yl, yr, denom) = (trace.y_l[kk], trace.y_r[kk], trace.denom[kk]);
        g.q_o[kk] = g_yp * (yl - yr);
        let g_yl = g_yp * qo;
        let g_yr = g_yp * (1.0 - qo);

        let (mut spread_l, mut spread_r) = (0.0, 0.0);
        for i in 0..m {
            let idx = i * k + kk;
            let (fl, fu) = (trace.f_lower[idx], trace.f_upper[idx]);
            let (wl, wr) = (trace.w_l[idx], trace.w_r[idx]);
            spread_l += (fu - fl) * wl;
            spread_r += (fu - fl) * wr;

            // consequents
            let g_wl = g_yl * ((1.0 - ql) * fl + ql * fu) / denom;
            let g_wr = g_yr * ((1.0 - qr) * fl + qr * fu) / denom;
            let off = params.consequents.offset(i, kk);
            let (gc, gs) = (g_wl + g_wr, g_wr - g_wl);
            g.c[off] += gc;
            g.s[off] += gs;
            for j in 0..n {
                g.c[off + 1 + j] += gc * x[j];
                g.s[off + 1 + j] += gs * x[j].abs();
            }
            debug_assert!(off + w <= g.c.len());

            // firing strengths, then through f = -1 / S (df/dS = f^2)
            let g_fu = (g_yl * (ql * wl - yl) + g_yr * (qr * wr - yr)) / denom;
            let g_fl = (g_yl * ((1.0 - ql) * wl - yl) + g_yr * ((1.0 - qr) * wr - yr)) / denom;
            let s_lo = g_fl * fl * fl;
            let s_up = g_fu * fu * fu;
            scratch.g_ln_lo[i] += s_lo;
            scratch.g_ln_up[i] += s_up;
            scratch.g_ln_co[kk] += s_lo + s_up;
        }
        g.q_l[kk] = g_yl * spread_l / denom;
        g.q_r[kk] = g_yr * spread_r / denom;
    }

    if !params.ablation.no_layer4 {
        for kk in 0..k {
            let gco = scratch.g_ln_co[kk];
            for j in 0..n {
                let idx = kk * n + j;
                if grade_clamped(trace.co_grades[idx]) {
                    continue;
                }
                let mf = &params.co_antecedents[idx];
                let d = x[j] - mf.m;
                let s2 = mf.sigma * mf.sigma;
                g.co_m[idx] = gco * d / s2;
                g.co_sigma[idx] = gco * d * d / (s2 * mf.sigma);
            }
        }
    }

    if mode == TrainMode::Local {
        return;
    }

    for i in 0..m {
        let (glo, gup) = (scratch.g_ln_lo[i], scratch.g_ln_up[i]);
        for j in 0..n {
            let idx = i * n + j;
            let mf = &params.antecedents[idx];
            let xj = x[j];
            let s2 = mf.sigma * mf.sigma;
            let s3 = s2 * mf.sigma;
            // upper membership
            if !grade_clamped(trace.mu_upper[idx]) {
                if xj < mf.m1 {
                    let d = xj - mf.m1;
                    g.m1[idx] += gup * d / s2;
                    g.sigma[idx] += gup * d * d / s3;
                } else if xj > mf.m2 {
                    let d = xj - mf.m2;
                    g.m2[idx] += gup * d / s2;
                    g.sigma[idx] += gup * d * d / s3;
                }
            }
            // lower membership
            if !grade_clamped(trace.mu_lower[idx]) {
                if xj <= mf.midpoint() {
                    let d = xj - mf.m2;
                    g.m2[idx] += glo * d / s2;
                    g.sigma[idx] += glo * d * d / s3;
                } else {
                    let d = xj - mf.m1;
                    g.m1[idx] += glo * d / s2;
                    g.sigma[idx] += glo * d * d / s3;
                }
            }
        }
    }
}

#[inline]
fn grade_clamped(grade: f64) -> bool {
    !(GRADE_EPS..=1.0 - GRADE_EPS).contains(&grade)
}

/// `V <- V - eta * dE/dV`, then projection onto the feasible set.
pub fn sgd_step(params: &mut NetworkParams, grads: &GradientSet, eta: f64) {
    for (idx, mf) in params.antecedents.iter_mut().enumerate() {
        mf.m1 -= eta * grads.m1[idx];
        mf.m2 -= eta * grads.m2[idx];
        mf.sigma -= eta * grads.sigma[idx];
    }
    if !params.ablation.no_layer4 {
        for (idx, mf) in params.co_antecedents.iter_mut().enumerate() {
            mf.m -= eta * grads.co_m[idx];
            mf.sigma -= eta * grads.co_sigma[idx];
        }
    }
    for (v, d) in params.consequents.c.iter_mut().zip(&grads.c) {
        *v -= eta * d;
    }
    for (v, d) in params.consequents.s.iter_mut().zip(&grads.s) {
        *v -= eta * d;
    }
    let r = &mut params.reduction;
    for (v, d) in r.q_l.iter_mut().zip(&grads.q_l) {
        *v -= eta * d;
    }
    for (v, d) in r.q_r.iter_mut().zip(&grads.q_r) {
        *v -= eta * d;
    }
    for (v, d) in r.q_o.iter_mut().zip(&grads.q_o) {
        *v -= eta * d;
    }
    if !params.ablation.no_layer9 {
        params.link.0 -= eta * grads.l;
    }
    params.project();
}

/// Mean squared error over all samples and outputs.
pub fn mse(params: &NetworkParams, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let mut trace = ForwardTrace::default();
    let mut total = 0.0;
    let mut count = 0usize;
    for (x, t) in inputs.iter().zip(targets) {
        forward_into(x, params, &mut trace);
        for (y, a) in trace.y.iter().zip(t) {
            total += (y - a) * (y - a);
            count += 1;
        }
    }
    total / count.max(1) as f64
}

/// Per-sample SGD over `config.iterations` shuffled passes. Returns the
/// whole-set MSE of the final parameters.
pub fn train_epochs(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    params: &mut NetworkParams,
    config: &TrainConfig,
) -> Result<f64> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::Shape("training set must be non-empty with one target row per input row".into()));
    }
    if !(config.eta > 0.0) {
        return Err(Error::Config("learning rate must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut trace = ForwardTrace::default();
    let mut grads = GradientSet::zeros_like(params);
    let mut scratch = Scratch::default();
    for epoch in 0..config.iterations {
        order.shuffle(&mut rng);
        for &idx in &order {
            forward_into(&inputs[idx], params, &mut trace);
            backward_into(&trace, &inputs[idx], &targets[idx], params, config.mode, &mut grads, &mut scratch);
            sgd_step(params, &grads, config.eta);
        }
        if !params.link.0.is_finite() || !params.consequents.c.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite(format!(
                "parameters diverged in epoch {epoch} (eta = {}); lower the learning rate",
                config.eta
            )));
        }
    }
    let loss = mse(params, inputs, targets);
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!(
            "training loss is {loss} after {} passes (eta = {}); lower the learning rate",
            config.iterations, config.eta
        )));
    }
    Ok(loss)
}

/// Central finite differences of the per-sample loss with respect to every
/// flattened parameter. Uses only the forward pass.
pub fn finite_difference_gradient(params: &NetworkParams, x: &[f64], targets: &[f64], step: f64) -> Vec<f64> {
    let base = params.flatten();
    let mut probe = params.clone();
    let mut trace = ForwardTrace::default();
    let mut eval = |values: &[f64], probe: &mut NetworkParams| {
        probe.unflatten(values);
        forward_into(x, probe, &mut trace);
        loss(&trace.y, targets)
    };
    let mut out = Vec::with_capacity(base.len());
    let mut values = base.clone();
    for p in 0..base.len() {
        values[p] = base[p] + step;
        let up = eval(&values, &mut probe);
        values[p] = base[p] - step;
        let down = eval(&values, &mut probe);
        values[p] = base[p];
        out.push((up - down) / (2.0 * step));
    }
    out
}

/// Outcome of comparing analytic and numeric gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub skipped: usize,
    /// Largest relative error among components above the absolute floor.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub failures: usize,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Compare [`backward`] against [`finite_difference_gradient`]. A component
/// passes when its absolute error is at most `abs_floor` or its relative error
/// is below `rel_tol`. Antecedent entries whose input lies within `boundary`
/// of `m1`, `m2` or their midpoint are skipped.
pub fn check_gradients(
    params: &NetworkParams,
    x: &[f64],
    targets: &[f64],
    step: f64,
    rel_tol: f64,
    abs_floor: f64,
    boundary: f64,
) -> GradCheck {
    let mut trace = ForwardTrace::default();
    forward_into(x, params, &mut trace);
    let analytic = backward(&trace, x, targets, params, TrainMode::Global).flatten();
    let numeric = finite_difference_gradient(params, x, targets, step);
    let n = params.n_inputs;
    let n_antecedent = params.antecedents.len() * 3;
    let mut report = GradCheck { checked: 0, skipped: 0, max_rel_error: 0.0, max_abs_error: 0.0, failures: 0 };
    for (p, (a, f)) in analytic.iter().zip(&numeric).enumerate() {
        if p < n_antecedent {
            let mf = &params.antecedents[p / 3];
            let xj = x[(p / 3) % n];
            if [mf.m1, mf.m2, mf.midpoint()].iter().any(|b| (xj - b).abs() < boundary) {
                report.skipped += 1;
                continue;
            }
        }
        report.checked += 1;
        let abs = (a - f).abs();
        report.max_abs_error = report.max_abs_error.max(abs);
        let rel = abs / a.abs().max(f.abs()).max(f64::MIN_POSITIVE);
        if abs > abs_floor {
            report.max_rel_error = report.max_rel_error.max(rel);
            if rel >= rel_tol {
                report.failures += 1;
            }
        }
    }
    report
}

/// Random valid network for property checks: means in `[0, 1]` with
/// uncertainty below 0.3, spreads in `[0.2, 0.8]`, consequents in `[-1, 1]`.
pub fn random_network(rng: &mut ChaCha8Rng, n: usize, m: usize, k: usize, ablation: Ablation) -> NetworkParams {
    let mut p = NetworkParams::empty(n, k, rng.gen_range(0.05..0.9), ablation);
    for mf in &mut p.co_antecedents {
        *mf = CoMf::new(rng.gen_range(0.0..1.0), rng.gen_range(0.2..0.8));
    }
    let b = p.consequents.block_len();
    for _ in 0..m {
        let row: Vec<It2Mf> = (0..n)
            .map(|_| {
                let a = rng.gen_range(0.0..1.0);
                let d = rng.gen_range(0.0..0.3);
                It2Mf::new(a, a + d, rng.gen_range(0.2..0.8))
            })
            .collect();
        let c: Vec<f64> = (0..b).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s: Vec<f64> = (0..b).map(|_| rng.gen_range(0.01..0.3)).collect();
        p.push_rule(&row, &c, &s);
    }
    for q in p.reduction.q_l.iter_mut().chain(p.reduction.q_r.iter_mut()).chain(p.reduction.q_o.iter_mut()) {
        *q = rng.gen_range(0.05..0.95);
    }
    p
}

/// Gradient check over `configs` random networks (`n <= 4`, `M <= 3`,
/// `K <= 3`, every ablation mix) at random inputs and targets.
pub fn random_gradient_check(seed: u64, configs: usize) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = GradCheck { checked: 0, skipped: 0, max_rel_error: 0.0, max_abs_error: 0.0, failures: 0 };
    for _ in 0..configs {
        let (n, m, k) = (rng.gen_range(1..=4), rng.gen_range(1..=3), rng.gen_range(1..=3));
        let ablation = Ablation {
            no_layer4: rng.gen_bool(0.25),
            no_layer9: rng.gen_bool(0.25),
            shared_consequents: rng.gen_bool(0.25),
        };
        let params = random_network(&mut rng, n, m, k, ablation);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let t: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        let r = check_gradients(&params, &x, &t, 1e-6, 1e-4, 1e-8, 1e-5);
        total.checked += r.checked;
        total.skipped += r.skipped;
        total.failures += r.failures;
        total.max_rel_error = total.max_rel_error.max(r.max_rel_error);
        total.max_abs_error = total.max_abs_error.max(r.max_abs_error);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{forward, link_chain};

    #[test]
    fn loss_examples() {
        assert_eq!(loss(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(loss(&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]), 0.5);
        assert!((loss(&[0.1, 0.2, 0.3], &[0.0, 0.0, 0.0]) - 0.07).abs() < 1e-15);
    }

    #[test]
    fn zero_error_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_network(&mut rng, 3, 2, 2, Ablation::default());
        let x = [0.2, 0.5, 0.9];
        let (y, trace) = forward(&x, &p);
        let g = backward(&trace, &x, &y, &p, TrainMode::Global);
        assert!(g.flatten().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn link_derivative_examples() {
        // l = 0, K = 1: dy/dl = x_n - y'
        let d = link_output_derivatives(&[0.7], 1.3, 0.0);
        assert!((d[0] - (1.3 - 0.7)).abs() < 1e-15);
        // constant chain is independent of l
        let d = link_output_derivatives(&[0.4; 4], 0.4, 0.37);
        assert!(d.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn link_derivative_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let k = rng.gen_range(1..=8);
            let yp: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let xn = rng.gen_range(-2.0..2.0);
            let l = rng.gen_range(0.01..0.99);
            let h = 1e-6;
            let up = link_chain(&yp, xn, l + h);
            let down = link_chain(&yp, xn, l - h);
            let d = link_output_derivatives(&yp, xn, l);
            for kk in 0..k {
                let fd = (up[kk] - down[kk]) / (2.0 * h);
                assert!((fd - d[kk]).abs() < 1e-6, "k={kk} fd={fd} analytic={}", d[kk]);
            }
        }
    }

    #[test]
    fn identity_link_passes_gradients_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = random_network(&mut rng, 2, 1, 3, Ablation::default());
        p.link.0 = 0.0;
        let x = [0.3, 0.8];
        let (y, trace) = forward(&x, &p);
        let targets: Vec<f64> = y.iter().map(|v| v - 1.0).collect();
        let g = backward(&trace, &x, &targets, &p, TrainMode::Global);
        // dE/dy' = dE/dy = 1 for every output when l = 0
        for kk in 0..3 {
            assert!((g.q_o[kk] - (trace.y_l[kk] - trace.y_r[kk])).abs() < 1e-12);
        }
    }

    #[test]
    fn small_network_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for ablation in [Ablation::default(), Ablation::all()] {
            let p = random_network(&mut rng, 2, 2, 2, ablation);
            let x = [0.13, 0.77];
            let t = [0.4, -0.2];
            let report = check_gradients(&p, &x, &t, 1e-6, 1e-4, 1e-8, 1e-5);
            assert!(report.passed(), "{report:?}");
            assert!(report.checked > 20);
        }
    }

    #[test]
    fn local_mode_zeroes_antecedents() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_network(&mut rng, 3, 2, 2, Ablation::default());
        let x = [0.9, 0.05, 0.5];
        let t = [1.0, 0.0];
        let (_, trace) = forward(&x, &p);
        let local = backward(&trace, &x, &t, &p, TrainMode::Local);
        let global = backward(&trace, &x, &t, &p, TrainMode::Global);
        assert!(local.m1.iter().chain(&local.m2).chain(&local.sigma).all(|v| *v == 0.0));
        assert!(global.m1.iter().chain(&global.m2).chain(&global.sigma).any(|v| *v != 0.0));
        assert_eq!(local.c, global.c);
        assert_eq!(global.flatten().len(), p.param_count());
    }

    #[test]
    fn sgd_zero_gradient_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_network(&mut rng, 2, 2, 2, Ablation::default());
        let mut q = p.clone();
        sgd_step(&mut q, &GradientSet::zeros_like(&p), 0.5);
        assert_eq!(p, q);
    }

    #[test]
    fn zero_iterations_leaves_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_network(&mut rng, 2, 1, 1, Ablation::default());
        let xs = vec![vec![0.1, 0.2], vec![0.7, 0.4]];
        let ys = vec![vec![0.3], vec![0.5]];
        let mut q = p.clone();
        let cfg = TrainConfig { eta: 0.03, iterations: 0, mode: TrainMode::Global, seed: 0 };
        let l = train_epochs(&xs, &ys, &mut q, &cfg).unwrap();
        assert_eq!(p, q);
        assert_eq!(l, mse(&p, &xs, &ys));
    }

    #[test]
    fn convex_toy_loss_non_increasing() {
        // one rule, crisp consequent, frozen antecedents: a linear least-squares model
        let mut p = NetworkParams::empty(1, 1, 0.0, Ablation { no_layer9: true, ..Ablation::default() });
        p.push_rule(&[It2Mf::new(0.5, 0.5, 0.5)], &[0.0, 0.0], &[0.0, 0.0]);
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![0.5 * x[0] + 0.1]).collect();
        let mut last = mse(&p, &xs, &ys);
        for epoch in 0..30 {
            let cfg = TrainConfig { eta: 0.01, iterations: 1, mode: TrainMode::Local, seed: epoch };
            let l = train_epochs(&xs, &ys, &mut p, &cfg).unwrap();
            assert!(l <= last + 1e-12, "epoch {epoch}: {l} > {last}");
            last = l;
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let mut p = NetworkParams::empty(1, 1, 0.0, Ablation::default());
        p.push_rule(&[It2Mf::new(0.5, 0.5, 0.5)], &[0.0, 0.0], &[0.0, 0.0]);
        let xs = vec![vec![0.0], vec![1.0]];
        let ys = vec![vec![1e200], vec![-1e200]];
        let cfg = TrainConfig { eta: 1e10, iterations: 3, mode: TrainMode::Global, seed: 0 };
        assert!(matches!(train_epochs(&xs, &ys, &mut p, &cfg), Err(Error::NonFinite(_))));
    }
}
