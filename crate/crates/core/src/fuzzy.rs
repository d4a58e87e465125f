//! Antecedent mathematics: interval type-2 Gaussian memberships, rule firing,
//! co-antecedent memberships and the log-sum transformation of firing strengths.
//!
//! Every log is the natural logarithm. Individual membership grades are clamped
//! to `[GRADE_EPS, 1 - GRADE_EPS]` before the log is taken, so the aggregated
//! firing strength `-1 / sum(ln grade)` is always finite and strictly positive.

use serde::{Deserialize, Serialize};

/// Clamp applied to every membership grade before taking its logarithm.
pub const GRADE_EPS: f64 = 1e-12;

/// Gaussian `exp(-0.5 * ((x - mean) / sigma)^2)`.
#[inline]
pub fn gaussian(mean: f64, sigma: f64, x: f64) -> f64 {
    let z = (x - mean) / sigma;
    (-0.5 * z * z).exp()
}

/// Log of a membership grade after clamping. Returns the log and whether the
/// clamp was active (in which case the grade carries no gradient).
#[inline]
pub fn clamped_ln(grade: f64) -> (f64, bool) {
    if grade < GRADE_EPS {
        (GRADE_EPS.ln(), true)
    } else if grade > 1.0 - GRADE_EPS {
        ((1.0 - GRADE_EPS).ln(), true)
    } else {
        (grade.ln(), false)
    }
}

/// Sum of clamped logs of a list of grades.
pub fn log_grade_sum(grades: &[f64]) -> f64 {
    grades.iter().map(|&g| clamped_ln(g).0).sum()
}

/// Gaussian interval type-2 membership function with uncertain mean `[m1, m2]`
/// and a shared standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct It2Mf {
    pub m1: f64,
    pub m2: f64,
    pub sigma: f64,
}

impl It2Mf {
    pub fn new(m1: f64, m2: f64, sigma: f64) -> Self {
        debug_assert!(m1 <= m2 && sigma > 0.0);
        It2Mf { m1, m2, sigma }
    }

    pub fn is_valid(&self) -> bool {
        self.m1.is_finite() && self.m2.is_finite() && self.sigma.is_finite() && self.m1 <= self.m2 && self.sigma > 0.0
    }

    #[inline]
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.m1 + self.m2)
    }

    #[inline]
    pub fn upper(&self, x: f64) -> f64 {
        eval_umf(x, self)
    }

    #[inline]
    pub fn lower(&self, x: f64) -> f64 {
        eval_lmf(x, self)
    }
}

/// Upper membership: left Gaussian tail, unit plateau on `[m1, m2]`, right tail.
#[inline]
pub fn eval_umf(x: f64, mf: &It2Mf) -> f64 {
    if x < mf.m1 {
        gaussian(mf.m1, mf.sigma, x)
    } else if x > mf.m2 {
        gaussian(mf.m2, mf.sigma, x)
    } else {
        1.0
    }
}

/// Lower membership: the Gaussian centred on the farther mean. The midpoint
/// itself belongs to the `m2` branch.
#[inline]
pub fn eval_lmf(x: f64, mf: &It2Mf) -> f64 {
    if x <= mf.midpoint() {
        gaussian(mf.m2, mf.sigma, x)
    } else {
        gaussian(mf.m1, mf.sigma, x)
    }
}

/// Type-1 Gaussian used by the per-output co-antecedent layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoMf {
    pub m: f64,
    pub sigma: f64,
}

impl CoMf {
    pub fn new(m: f64, sigma: f64) -> Self {
        CoMf { m, sigma }
    }

    pub fn is_valid(&self) -> bool {
        self.m.is_finite() && self.sigma.is_finite() && self.sigma > 0.0
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        gaussian(self.m, self.sigma, x)
    }
}

/// Aggregated firing strength interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiringInterval {
    pub lower: f64,
    pub upper: f64,
}

/// Raw rule firing interval: product of lower grades and product of upper grades.
///
/// For many inputs the lower product underflows; route grades through
/// [`transform_log_sums`] instead of comparing these products against zero.
pub fn fire_rule(memberships_lower: &[f64], memberships_upper: &[f64]) -> (f64, f64) {
    assert_eq!(memberships_lower.len(), memberships_upper.len());
    let lo = memberships_lower.iter().product();
    let up = memberships_upper.iter().product();
    (lo, up)
}

/// Co-antecedent grade `prod_j N(m_j, sigma_j; x_j)`.
pub fn eval_co_antecedent(x: &[f64], mfs: &[CoMf]) -> f64 {
    assert_eq!(x.len(), mfs.len());
    x.iter().zip(mfs).map(|(&xj, mf)| mf.eval(xj)).product()
}

/// Firing interval from already accumulated log sums.
#[inline]
pub fn transform_log_sums(ln_rule_lower: f64, ln_rule_upper: f64, ln_co: f64) -> FiringInterval {
    FiringInterval {
        lower: -1.0 / (ln_rule_lower + ln_co),
        upper: -1.0 / (ln_rule_upper + ln_co),
    }
}

/// Firing interval from individual grades: lower/upper rule memberships and
/// co-antecedent memberships (pass an empty slice when there is no
/// co-antecedent layer).
pub fn transform_grades(lower: &[f64], upper: &[f64], co: &[f64]) -> FiringInterval {
    transform_log_sums(log_grade_sum(lower), log_grade_sum(upper), log_grade_sum(co))
}

/// Firing interval from the three aggregate grades. Each is clamped and logged
/// separately; prefer [`transform_grades`] when the individual grades are known.
pub fn transform_firing(rule_lower: f64, rule_upper: f64, co: f64) -> FiringInterval {
    transform_log_sums(clamped_ln(rule_lower).0, clamped_ln(rule_upper).0, clamped_ln(co).0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MF: It2Mf = It2Mf { m1: 0.4, m2: 0.6, sigma: 0.1 };

    #[test]
    fn umf_plateau_and_tails() {
        for x in [0.4, 0.45, 0.5, 0.6] {
            assert_eq!(eval_umf(x, &MF), 1.0);
        }
        assert!((eval_umf(0.3, &MF) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((eval_umf(0.8, &MF) - (-2.0f64).exp()).abs() < 1e-14);
        assert!((eval_umf(0.3, &MF) - 0.60653).abs() < 1e-5);
        assert!((eval_umf(0.8, &MF) - 0.13534).abs() < 1e-5);
    }

    #[test]
    fn lmf_branches() {
        assert!((eval_lmf(0.4, &MF) - (-2.0f64).exp()).abs() < 1e-14);
        // midpoint goes to the m2 branch
        assert_eq!(eval_lmf(0.5, &MF), gaussian(0.6, 0.1, 0.5));
        let point = It2Mf::new(0.3, 0.3, 0.2);
        for x in [-1.0, 0.0, 0.3, 0.7] {
            assert_eq!(eval_lmf(x, &point), eval_umf(x, &point));
            assert_eq!(eval_lmf(x, &point), gaussian(0.3, 0.2, x));
        }
    }

    #[test]
    fn rule_products() {
        assert_eq!(fire_rule(&[1.0, 1.0], &[1.0, 1.0]), (1.0, 1.0));
        let (lo, up) = fire_rule(&[0.5, 0.4], &[0.8, 0.5]);
        assert!((lo - 0.2).abs() < 1e-15 && (up - 0.4).abs() < 1e-15);
    }

    #[test]
    fn co_antecedent_examples() {
        let mfs = [CoMf::new(0.2, 0.3), CoMf::new(0.7, 0.1)];
        assert_eq!(eval_co_antecedent(&[0.2, 0.7], &mfs), 1.0);
        let one = [CoMf::new(0.0, 0.5)];
        assert!((eval_co_antecedent(&[0.5], &one) - (-0.5f64).exp()).abs() < 1e-15);
        let two = [CoMf::new(0.0, 0.5), CoMf::new(1.0, 0.2)];
        assert!((eval_co_antecedent(&[0.5, 1.2], &two) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn transform_examples() {
        let e1 = (-1.0f64).exp();
        assert!((transform_firing(e1, 1.0 - 1e-6, 1.0 - 1e-13).lower - 1.0).abs() < 1e-10);
        let f = transform_grades(&[e1], &[e1], &[]);
        assert!((f.lower - 1.0).abs() < 1e-12);
        let e2 = (-2.0f64).exp();
        let f = transform_grades(&[e2.sqrt()], &[e2.sqrt()], &[e2.sqrt()]);
        assert!((f.lower - 0.5).abs() < 1e-12);
    }

    #[test]
    fn twelve_small_grades_stay_well_scaled() {
        let grades = [0.1; 12];
        let (raw, _) = fire_rule(&grades, &grades);
        assert!(raw < 1.1e-12);
        let f = transform_grades(&grades, &grades, &[]);
        // -1 / (12 ln 0.1)
        assert!((f.lower - 0.036191206825271).abs() < 1e-12, "{}", f.lower);
        assert!(f.lower.is_finite() && f.lower > 0.0);
    }

    #[test]
    fn clamp_prevents_division_by_zero() {
        let f = transform_grades(&[1.0], &[1.0], &[1.0]);
        assert!(f.lower.is_finite() && f.lower > 0.0);
        let f = transform_grades(&[0.0], &[0.0], &[]);
        assert!(f.lower.is_finite() && f.lower > 0.0);
    }
}
