//! Closed-form Bayes risk of the terminal decision for one test.
//!
//! After all observations are in, the cheapest decision rule declares the
//! alternative exactly where the weighted predictive density of the
//! alternative dominates. Its expected cost, with a false alarm costing 1
//! and a miss costing `c`, is
//!
//! ```text
//! R = integral min{ (1 - p) f0(y), c p f1(y) } dy
//! ```
//!
//! with `f_h(y) = N(y; mu_h, S_h)` and `S_h = var_h + nu2 / u` the
//! predictive variance under effort `u`. Shifting coordinates so the null
//! mean sits at zero and writing `m = mu1 - mu0`, the boundary between the
//! decision regions solves a quadratic in `y` whose discriminant is
//!
//! ```text
//! D = m^2 + (S1 - S0) * ( ln(S1/S0) + 2 ln((1 - p) / (c p)) )
//! ```
//!
//! For `S0 < S1` the null region is the interval between the two roots
//! (empty when `D < 0`, in which case the alternative is declared
//! everywhere and `R = 1 - p`). For equal variances the quadratic collapses
//! to a single threshold. With no observation at all (`u = 0`) the decision
//! rests on the prior alone and `R = min{1 - p, c p}`.
//!
//! Everything here is evaluated through `Phi`, the standard normal CDF,
//! computed from the complementary error function. Probabilities of 0 or 1
//! short-circuit to zero risk, and variance pairs within 1e-12 relative of
//! each other are routed through the equal-variance branch before the
//! difference `S1 - S0` can shred precision.

use crate::model::{NoiseModel, TestBelief};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RiskError {
    #[error("probability must lie in [0,1], got {0}")]
    ProbabilityRange(f64),
    #[error("miss cost must be finite and positive, got {0}")]
    CostRange(f64),
    #[error("mean separation must be finite, got {0}")]
    MeanRange(f64),
    #[error("predictive variance must be finite and positive, got {0}")]
    VarianceRange(f64),
    #[error("predictive variances must satisfy S0 <= S1, got S0 = {s0}, S1 = {s1}")]
    VarianceOrder { s0: f64, s1: f64 },
    #[error("effort must be finite and non-negative, got {0}")]
    EffortRange(f64),
}

/// Inputs of the closed form: belief, cost and the two predictive variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskParams {
    /// Probability of the alternative.
    pub p: f64,
    /// Cost of a miss relative to a false alarm.
    pub c: f64,
    /// Mean separation `mu1 - mu0`.
    pub mu_diff: f64,
    /// Predictive variance under the null, `var0 + nu2/u`.
    pub s0: f64,
    /// Predictive variance under the alternative, `var1 + nu2/u`.
    pub s1: f64,
}

impl RiskParams {
    pub fn new(p: f64, c: f64, mu_diff: f64, s0: f64, s1: f64) -> Result<Self, RiskError> {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(RiskError::ProbabilityRange(p));
        }
        if !c.is_finite() || c <= 0.0 {
            return Err(RiskError::CostRange(c));
        }
        if !mu_diff.is_finite() {
            return Err(RiskError::MeanRange(mu_diff));
        }
        for s in [s0, s1] {
            if !s.is_finite() || s <= 0.0 {
                return Err(RiskError::VarianceRange(s));
            }
        }
        if s0 > s1 {
            return Err(RiskError::VarianceOrder { s0, s1 });
        }
        Ok(RiskParams { p, c, mu_diff, s0, s1 })
    }

    /// Parameters for one test under effort `u > 0`.
    pub fn from_belief(
        t: &TestBelief,
        noise: NoiseModel,
        c: f64,
        u: f64,
    ) -> Result<Self, RiskError> {
        if !u.is_finite() || u <= 0.0 {
            return Err(RiskError::EffortRange(u));
        }
        let obs = noise.nu2() / u;
        RiskParams::new(t.p, c, t.mu1 - t.mu0, t.var0 + obs, t.var1 + obs)
    }
}

/// Standard normal CDF through the complementary error function:
/// `Phi(z) = erfc(-z / sqrt(2)) / 2`.
pub fn gaussian_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Expected cost of deciding now, without any observation.
pub fn no_observation_risk(p: f64, c: f64) -> f64 {
    (1.0 - p).min(c * p)
}

/// Where the alternative is declared: the complement of the null region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecisionRegions {
    /// The null region is empty; the alternative is declared everywhere.
    AltEverywhere,
    /// The null region is all of the line.
    NullEverywhere,
    /// Null for `y <= cut`, alternative above.
    NullBelow { cut: f64 },
    /// Null for `y >= cut`, alternative below.
    NullAbove { cut: f64 },
    /// Null on `[lo, hi]`, alternative outside.
    NullBetween { lo: f64, hi: f64 },
}

/// Relative variance gap below which the two predictive variances are
/// treated as equal.
const EQUAL_VARIANCE_SEAM: f64 = 1e-12;

/// Discriminant magnitude below which tangency is collapsed to a point.
const DISCRIMINANT_CLAMP: f64 = 1e-14;

/// Bayes risk of the optimal terminal decision, in closed form.
///
/// Degenerate beliefs (`p` equal to 0 or 1) have zero risk regardless of
/// the variances.
pub fn bayes_risk(params: &RiskParams) -> f64 {
    let &RiskParams { p, c, mu_diff: m, s0, s1 } = params;
    if p == 0.0 || p == 1.0 {
        return 0.0;
    }
    let log_ratio = ((1.0 - p) / (c * p)).ln();
    if s1 - s0 < EQUAL_VARIANCE_SEAM * s1 {
        return equal_variance_risk(p, c, m, s1, log_ratio);
    }
    let mut d = m * m + (s1 - s0) * ((s1 / s0).ln() + 2.0 * log_ratio);
    if d.abs() < DISCRIMINANT_CLAMP {
        d = 0.0;
    }
    if d < 0.0 {
        return 1.0 - p;
    }
    let root = (s0 * s1 * d).sqrt();
    let gap = s1 - s0;
    let y_lo = (-s0 * m - root) / gap;
    let y_hi = (-s0 * m + root) / gap;
    let sd0 = s0.sqrt();
    let sd1 = s1.sqrt();
    let false_alarm = gaussian_cdf(-y_hi / sd0) + gaussian_cdf(y_lo / sd0);
    let miss = gaussian_cdf((y_hi - m) / sd1) - gaussian_cdf((y_lo - m) / sd1);
    (1.0 - p) * false_alarm + c * p * miss
}

fn equal_variance_risk(p: f64, c: f64, m: f64, s: f64, log_ratio: f64) -> f64 {
    if m == 0.0 {
        // Identical predictive densities: observing changes nothing.
        return no_observation_risk(p, c);
    }
    let cut = 0.5 * m + (s / m) * log_ratio;
    let sd = s.sqrt();
    if m > 0.0 {
        (1.0 - p) * gaussian_cdf(-cut / sd) + c * p * gaussian_cdf((cut - m) / sd)
    } else {
        (1.0 - p) * gaussian_cdf(cut / sd) + c * p * gaussian_cdf((m - cut) / sd)
    }
}

/// Risk of one test under effort `u >= 0`, dispatching `u = 0` to the
/// no-observation form.
pub fn bayes_risk_for_effort(t: &TestBelief, noise: NoiseModel, c: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return no_observation_risk(t.p, c);
    }
    match RiskParams::from_belief(t, noise, c, u) {
        Ok(params) => bayes_risk(&params),
        Err(_) => no_observation_risk(t.p, c),
    }
}

/// The optimal decision regions behind [`bayes_risk`].
pub fn decision_regions(params: &RiskParams) -> DecisionRegions {
    let &RiskParams { p, c, mu_diff: m, s0, s1 } = params;
    if p == 0.0 {
        return DecisionRegions::NullEverywhere;
    }
    if p == 1.0 {
        return DecisionRegions::AltEverywhere;
    }
    let log_ratio = ((1.0 - p) / (c * p)).ln();
    if s1 - s0 < EQUAL_VARIANCE_SEAM * s1 {
        if m == 0.0 {
            return if c * p <= 1.0 - p {
                DecisionRegions::NullEverywhere
            } else {
                DecisionRegions::AltEverywhere
            };
        }
        let cut = 0.5 * m + (s1 / m) * log_ratio;
        return if m > 0.0 {
            DecisionRegions::NullBelow { cut }
        } else {
            DecisionRegions::NullAbove { cut }
        };
    }
    let mut d = m * m + (s1 - s0) * ((s1 / s0).ln() + 2.0 * log_ratio);
    if d.abs() < DISCRIMINANT_CLAMP {
        d = 0.0;
    }
    if d < 0.0 {
        return DecisionRegions::AltEverywhere;
    }
    let root = (s0 * s1 * d).sqrt();
    let gap = s1 - s0;
    DecisionRegions::NullBetween {
        lo: (-s0 * m - root) / gap,
        hi: (-s0 * m + root) / gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BeliefState, NoiseModel, TestPrior};
    use adaptive_alloc_oracles::normal::{normal_cdf_series, normal_pdf};
    use adaptive_alloc_oracles::quad::integrate;

    /// Quadrature reference for the risk integral, independent of the
    /// closed form: integrate the pointwise minimum over a wide window.
    fn risk_by_quadrature(p: f64, c: f64, m: f64, s0: f64, s1: f64) -> f64 {
        let lo = (-12.0 * s0.sqrt()).min(m - 12.0 * s1.sqrt());
        let hi = (12.0 * s0.sqrt()).max(m + 12.0 * s1.sqrt());
        let f = |y: f64| {
            ((1.0 - p) * normal_pdf(y, 0.0, s0)).min(c * p * normal_pdf(y, m, s1))
        };
        integrate(&f, lo, hi, 1e-10)
    }

    #[test]
    fn cdf_matches_series_oracle_across_range() {
        let mut z = -8.0;
        while z <= 8.0 {
            let got = gaussian_cdf(z);
            let want = normal_cdf_series(z);
            assert!((got - want).abs() < 1e-13, "z = {z}: {got} vs {want}");
            z += 0.0625;
        }
    }

    #[test]
    fn cdf_handles_extremes() {
        assert_eq!(gaussian_cdf(0.0), 0.5);
        assert_eq!(gaussian_cdf(f64::INFINITY), 1.0);
        assert_eq!(gaussian_cdf(f64::NEG_INFINITY), 0.0);
        assert!(gaussian_cdf(-40.0) >= 0.0);
        assert!(gaussian_cdf(40.0) <= 1.0);
    }

    #[test]
    fn quantile_round_trips_through_cdf() {
        for k in 1..40 {
            let p = k as f64 / 40.0;
            let z = crate::rng::standard_normal_quantile(p);
            let back = gaussian_cdf(z);
            assert!((back - p).abs() < 1e-13, "p = {p}: z = {z}, back = {back}");
        }
        for p in [1e-12, 1e-9, 1e-6, 1.0 - 1e-6, 1.0 - 1e-9] {
            let back = gaussian_cdf(crate::rng::standard_normal_quantile(p));
            assert!(
                (back - p).abs() < 1e-12 * (1.0 + 1.0 / p.min(1.0 - p) * 1e-12) + 1e-15 + p * 1e-9,
                "p = {p}, back = {back}"
            );
        }
    }

    #[test]
    fn no_observation_risk_examples() {
        assert_eq!(no_observation_risk(0.4, 1.5), 0.6);
        assert_eq!(no_observation_risk(0.1, 1.0), 0.1);
        assert_eq!(no_observation_risk(0.0, 2.0), 0.0);
        assert_eq!(no_observation_risk(1.0, 2.0), 0.0);
    }

    #[test]
    fn equal_variance_example_is_phi_of_minus_half() {
        // p = 1/2, c = 1, unit predictive variances, unit mean gap: the
        // threshold sits at 1/2 and both error terms equal Phi(-1/2).
        let params = RiskParams::new(0.5, 1.0, 1.0, 1.0, 1.0).unwrap();
        let got = bayes_risk(&params);
        assert!((got - 0.3085375387259869).abs() < 1e-12, "got {got}");
        match decision_regions(&params) {
            DecisionRegions::NullBelow { cut } => assert!((cut - 0.5).abs() < 1e-15),
            other => panic!("unexpected regions {other:?}"),
        }
    }

    #[test]
    fn negative_discriminant_declares_alt_everywhere() {
        // Zero mean gap with a strong null prior: ln(S1/S0) + 2 ln((1-p)/(cp))
        // = ln 2 - 2 ln 9 < 0, so the null region vanishes.
        let params = RiskParams::new(0.9, 1.0, 0.0, 1.0, 2.0).unwrap();
        assert_eq!(decision_regions(&params), DecisionRegions::AltEverywhere);
        let got = bayes_risk(&params);
        assert!((got - 0.1).abs() < 1e-15, "got {got}");
        let want = risk_by_quadrature(0.9, 1.0, 0.0, 1.0, 2.0);
        assert!((got - want).abs() < 1e-8, "quadrature {want}");
    }

    #[test]
    fn degenerate_probabilities_have_zero_risk() {
        for p in [0.0, 1.0] {
            let params = RiskParams::new(p, 2.0, 1.0, 0.5, 1.5).unwrap();
            assert_eq!(bayes_risk(&params), 0.0);
        }
    }

    #[test]
    fn closed_form_matches_quadrature_on_parameter_grid() {
        let mut worst = 0.0f64;
        for &p in &[0.01, 0.1, 0.5, 0.9, 0.99] {
            for &c in &[0.5, 1.0, 3.0] {
                for &m in &[-1.5, 0.0, 0.3, 1.0] {
                    for &(s0, s1) in &[(0.25, 0.25), (0.2, 1.0), (1.0, 1.0001), (0.05, 4.0)] {
                        let params = RiskParams::new(p, c, m, s0, s1).unwrap();
                        let got = bayes_risk(&params);
                        let want = risk_by_quadrature(p, c, m, s0, s1);
                        worst = worst.max((got - want).abs());
                        assert!(
                            (got - want).abs() < 1e-7,
                            "p={p} c={c} m={m} s0={s0} s1={s1}: {got} vs {want}"
                        );
                    }
                }
            }
        }
        assert!(worst < 1e-7, "worst gap {worst}");
    }

    #[test]
    fn risk_is_bounded_by_prior_decision() {
        for &p in &[0.02, 0.3, 0.5, 0.77] {
            for &u in &[0.0, 0.01, 0.4, 2.0, 50.0] {
                let t = TestPrior::new(p, 0.0, 0.0, 1.0, 0.0625).unwrap().into();
                let noise = NoiseModel::new(1.0).unwrap();
                let r = bayes_risk_for_effort(&t, noise, 1.0, u);
                assert!(r >= 0.0, "negative risk {r}");
                assert!(
                    r <= no_observation_risk(p, 1.0) + 1e-12,
                    "p = {p}, u = {u}: {r} exceeds prior risk"
                );
            }
        }
    }

    #[test]
    fn risk_decreases_with_effort() {
        let t: TestBelief = TestPrior::new(0.3, 0.0, 0.1, 1.0, 0.5).unwrap().into();
        let noise = NoiseModel::new(1.0).unwrap();
        let mut prev = no_observation_risk(0.3, 1.0);
        for k in 0..60 {
            let u = 1e-3 * (10.0f64).powf(k as f64 * 0.1);
            let r = bayes_risk_for_effort(&t, noise, 1.0, u);
            assert!(r <= prev + 1e-9, "risk rose from {prev} to {r} at u = {u}");
            prev = r;
        }
    }

    #[test]
    fn variance_seam_is_continuous() {
        // Approach the equal-variance branch from the unequal side.
        let base = RiskParams::new(0.35, 1.2, 0.8, 0.5, 0.5).unwrap();
        let at_seam = bayes_risk(&base);
        let near = RiskParams::new(0.35, 1.2, 0.8, 0.5, 0.5 * (1.0 + 1e-6)).unwrap();
        let nearby = bayes_risk(&near);
        assert!(
            (at_seam - nearby).abs() < 1e-4,
            "seam jump: {at_seam} vs {nearby}"
        );
    }

    #[test]
    fn boundary_points_satisfy_density_crossing() {
        let cases = [
            (0.5, 1.0, 1.0, 0.2, 1.0),
            (0.2, 2.0, 0.7, 0.1, 0.9),
            (0.8, 0.7, -1.1, 0.3, 2.0),
        ];
        for (p, c, m, s0, s1) in cases {
            let params = RiskParams::new(p, c, m, s0, s1).unwrap();
            match decision_regions(&params) {
                DecisionRegions::NullBetween { lo, hi } => {
                    for y in [lo, hi] {
                        let a = (1.0 - p) * normal_pdf(y, 0.0, s0);
                        let b = c * p * normal_pdf(y, m, s1);
                        assert!(
                            (a - b).abs() <= 1e-8 * a.max(b),
                            "crossing residual at y = {y}: {a} vs {b}"
                        );
                    }
                }
                other => panic!("expected an interval, got {other:?}"),
            }
        }
    }

    #[test]
    fn effort_dispatch_matches_belief_state() {
        let prior = TestPrior::new(0.5, 0.0, 0.0, 1.0, 0.0625).unwrap();
        let state = BeliefState::from_priors(&[prior], NoiseModel::new(1.0).unwrap(), 8.0).unwrap();
        let t = state.tests()[0];
        assert_eq!(
            bayes_risk_for_effort(&t, state.noise(), 1.0, 0.0),
            no_observation_risk(0.5, 1.0)
        );
        let r = bayes_risk_for_effort(&t, state.noise(), 1.0, 2.0);
        let want = risk_by_quadrature(0.5, 1.0, 1.0, 0.5, 0.0625 + 0.5);
        assert!((r - want).abs() < 1e-8, "{r} vs {want}");
    }
}
