//! Belief state for many parallel two-hypothesis Gaussian tests, and the
//! conjugate single-observation update.
//!
//! Each test `i` carries an unknown binary label. Under hypothesis `h` the
//! latent mean is `x_i ~ N(mu_h, var_h)`, and an observation taken with
//! effort `u > 0` is
//!
//! ```text
//! y | x_i ~ N(x_i, nu2 / u)
//! ```
//!
//! so effort buys precision. No effort, no observation. Conditioned on a
//! hypothesis, everything is Gaussian, and one observation updates the
//! belief in closed form:
//!
//! ```text
//! p'      = p f1(y) / (p f1(y) + (1 - p) f0(y))
//! mu_h'   = (nu2 mu_h + var_h u y) / (nu2 + var_h u)
//! var_h'  = nu2 var_h / (nu2 + var_h u)
//! ```
//!
//! where `f_h` is the predictive density `N(y; mu_h, var_h + nu2/u)`. The
//! probability update is evaluated in log space, dividing through by the
//! larger of the two densities, so far-out observations saturate to 0 or 1
//! instead of producing 0/0.
//!
//! Variances are kept in the canonical order `var0 <= var1`. Point-mass
//! components (`var_h = 0`) are preserved exactly: their location never
//! moves and their variance stays zero, bit for bit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which hypothesis holds for a test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    Null,
    Alt,
}

impl Hypothesis {
    pub fn index(self) -> usize {
        match self {
            Hypothesis::Null => 0,
            Hypothesis::Alt => 1,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("probability must lie in [0,1], got {0}")]
    ProbabilityRange(f64),
    #[error("variance must be finite and non-negative, got {0}")]
    VarianceRange(f64),
    #[error("variances must satisfy var0 <= var1, got var0 = {var0}, var1 = {var1}")]
    VarianceOrder { var0: f64, var1: f64 },
    #[error("mean must be finite, got {0}")]
    MeanRange(f64),
    #[error("noise variance must be finite and positive, got {0}")]
    NoiseRange(f64),
    #[error("budget must be finite and non-negative, got {0}")]
    BudgetRange(f64),
    #[error("effort must be finite and non-negative, got {0}")]
    EffortRange(f64),
    #[error("effort must be positive for a predictive density, got {0}")]
    NoObservation(f64),
    #[error("test index {index} out of range for {len} tests")]
    TestIndex { index: usize, len: usize },
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("test {index}: observation present iff its effort is positive (u = {effort})")]
    ObservationMismatch { index: usize, effort: f64 },
    #[error("allocation spends {spent} but only {available} remains")]
    BudgetExceeded { spent: f64, available: f64 },
}

/// Observation noise scale: an observation with effort `u` has variance
/// `nu2 / u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    nu2: f64,
}

impl NoiseModel {
    pub fn new(nu2: f64) -> Result<Self, ModelError> {
        if !nu2.is_finite() || nu2 <= 0.0 {
            return Err(ModelError::NoiseRange(nu2));
        }
        Ok(NoiseModel { nu2 })
    }

    pub fn nu2(self) -> f64 {
        self.nu2
    }
}

/// Prior description of one test before any observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestPrior {
    pub p: f64,
    pub mu0: f64,
    pub var0: f64,
    pub mu1: f64,
    pub var1: f64,
}

impl TestPrior {
    pub fn new(p: f64, mu0: f64, var0: f64, mu1: f64, var1: f64) -> Result<Self, ModelError> {
        validate_component(p, mu0, var0, mu1, var1)?;
        Ok(TestPrior { p, mu0, var0, mu1, var1 })
    }
}

/// Evolving belief in one test: alternative probability plus the two
/// conditional mean distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestBelief {
    pub p: f64,
    pub mu0: f64,
    pub var0: f64,
    pub mu1: f64,
    pub var1: f64,
}

impl From<TestPrior> for TestBelief {
    fn from(t: TestPrior) -> Self {
        TestBelief { p: t.p, mu0: t.mu0, var0: t.var0, mu1: t.mu1, var1: t.var1 }
    }
}

fn validate_component(p: f64, mu0: f64, var0: f64, mu1: f64, var1: f64) -> Result<(), ModelError> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(ModelError::ProbabilityRange(p));
    }
    for mu in [mu0, mu1] {
        if !mu.is_finite() {
            return Err(ModelError::MeanRange(mu));
        }
    }
    for var in [var0, var1] {
        if !var.is_finite() || var < 0.0 {
            return Err(ModelError::VarianceRange(var));
        }
    }
    if var0 > var1 {
        return Err(ModelError::VarianceOrder { var0, var1 });
    }
    Ok(())
}

/// Joint belief over all tests plus the remaining budget and stage counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    tests: Vec<TestBelief>,
    noise: NoiseModel,
    remaining_budget: f64,
    stage: usize,
}

impl BeliefState {
    pub fn from_priors(
        priors: &[TestPrior],
        noise: NoiseModel,
        budget: f64,
    ) -> Result<Self, ModelError> {
        if !budget.is_finite() || budget < 0.0 {
            return Err(ModelError::BudgetRange(budget));
        }
        Ok(BeliefState {
            tests: priors.iter().map(|&t| t.into()).collect(),
            noise,
            remaining_budget: budget,
            stage: 0,
        })
    }

    /// A state holding `n` copies of the same prior.
    pub fn homogeneous(
        prior: TestPrior,
        n: usize,
        noise: NoiseModel,
        budget: f64,
    ) -> Result<Self, ModelError> {
        if !budget.is_finite() || budget < 0.0 {
            return Err(ModelError::BudgetRange(budget));
        }
        Ok(BeliefState {
            tests: vec![prior.into(); n],
            noise,
            remaining_budget: budget,
            stage: 0,
        })
    }

    pub fn tests(&self) -> &[TestBelief] {
        &self.tests
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn remaining_budget(&self) -> f64 {
        self.remaining_budget
    }

    pub fn stage(&self) -> usize {
        self.stage
    }
}

/// Non-negative per-test efforts for one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation(Vec<f64>);

impl Allocation {
    pub fn new(u: Vec<f64>) -> Result<Self, ModelError> {
        for &v in &u {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::EffortRange(v));
            }
        }
        Ok(Allocation(u))
    }

    /// Spread `total` evenly over `n` tests.
    pub fn uniform(n: usize, total: f64) -> Result<Self, ModelError> {
        if !total.is_finite() || total < 0.0 {
            return Err(ModelError::BudgetRange(total));
        }
        Ok(Allocation(vec![total / n as f64; n]))
    }

    pub fn zeros(n: usize) -> Self {
        Allocation(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total effort, summed with compensation.
    pub fn total(&self) -> f64 {
        crate::sum::neumaier(&self.0)
    }
}

/// Absorb one stage of observations and return the next belief state.
///
/// `obs[i]` must be `Some` exactly when `alloc[i] > 0`. The spent effort is
/// deducted from the remaining budget (tolerating 1e-9 relative overdraw
/// from accumulated rounding) and the stage counter advances by one.
pub fn posterior_update(
    state: &BeliefState,
    alloc: &Allocation,
    obs: &[Option<f64>],
) -> Result<BeliefState, ModelError> {
    let n = state.len();
    if alloc.len() != n {
        return Err(ModelError::LengthMismatch { expected: n, got: alloc.len() });
    }
    if obs.len() != n {
        return Err(ModelError::LengthMismatch { expected: n, got: obs.len() });
    }
    for (i, (&u, y)) in alloc.as_slice().iter().zip(obs).enumerate() {
        if (u > 0.0) != y.is_some() {
            return Err(ModelError::ObservationMismatch { index: i, effort: u });
        }
    }
    let spent = alloc.total();
    let available = state.remaining_budget;
    if spent > available + 1e-9 * available.max(1.0) {
        return Err(ModelError::BudgetExceeded { spent, available });
    }
    let nu2 = state.noise.nu2();
    let tests = state
        .tests
        .iter()
        .zip(alloc.as_slice().iter().zip(obs))
        .map(|(t, (&u, y))| match y {
            Some(y) => update_one(t, nu2, u, *y),
            None => *t,
        })
        .collect();
    Ok(BeliefState {
        tests,
        noise: state.noise,
        remaining_budget: (available - spent).max(0.0),
        stage: state.stage + 1,
    })
}

fn update_one(t: &TestBelief, nu2: f64, u: f64, y: f64) -> TestBelief {
    let p = posterior_probability(t, nu2, u, y);
    let (mu0, var0) = update_component(t.mu0, t.var0, nu2, u, y);
    let (mu1, var1) = update_component(t.mu1, t.var1, nu2, u, y);
    TestBelief { p, mu0, var0, mu1, var1 }
}

fn update_component(mu: f64, var: f64, nu2: f64, u: f64, y: f64) -> (f64, f64) {
    if var == 0.0 {
        return (mu, 0.0);
    }
    let denom = nu2 + var * u;
    ((nu2 * mu + var * u * y) / denom, nu2 * var / denom)
}

fn posterior_probability(t: &TestBelief, nu2: f64, u: f64, y: f64) -> f64 {
    if t.p == 0.0 || t.p == 1.0 {
        return t.p;
    }
    let ld0 = log_predictive(y, t.mu0, t.var0 + nu2 / u);
    let ld1 = log_predictive(y, t.mu1, t.var1 + nu2 / u);
    let m = ld0.max(ld1);
    let w1 = t.p * (ld1 - m).exp();
    let w0 = (1.0 - t.p) * (ld0 - m).exp();
    w1 / (w1 + w0)
}

fn log_predictive(y: f64, mu: f64, s: f64) -> f64 {
    let z = y - mu;
    -0.5 * ((2.0 * std::f64::consts::PI * s).ln() + z * z / s)
}

/// Density of the next observation for test `index` under hypothesis `h`,
/// when effort `u > 0` is applied:
///
/// ```text
/// y | h ~ N(mu_h, var_h + nu2 / u)
/// ```
pub fn predictive_density(
    state: &BeliefState,
    index: usize,
    h: Hypothesis,
    u: f64,
    y: f64,
) -> Result<f64, ModelError> {
    let t = state
        .tests
        .get(index)
        .ok_or(ModelError::TestIndex { index, len: state.len() })?;
    if !u.is_finite() || u <= 0.0 {
        return Err(ModelError::NoObservation(u));
    }
    let (mu, var) = match h {
        Hypothesis::Null => (t.mu0, t.var0),
        Hypothesis::Alt => (t.mu1, t.var1),
    };
    let s = var + state.noise.nu2() / u;
    Ok(log_predictive(y, mu, s).exp())
}

/// Terminal decision that minimizes expected cost when a false alarm costs
/// 1 and a miss costs `c`: declare the alternative iff `c p > 1 - p`.
/// Exact ties go to the null.
pub fn map_decide(p: f64, c: f64) -> Hypothesis {
    if c * p > 1.0 - p {
        Hypothesis::Alt
    } else {
        Hypothesis::Null
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use adaptive_alloc_oracles::bayes::bayes_update_by_quadrature;
    use adaptive_alloc_oracles::normal::normal_pdf;
    use adaptive_alloc_oracles::quad::integrate;
    use adaptive_alloc_oracles::sample::standard_normals;

    fn point_null_prior() -> TestPrior {
        TestPrior::new(0.5, 0.0, 0.0, 1.0, 0.0625).unwrap()
    }

    fn noise() -> NoiseModel {
        NoiseModel::new(1.0).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TestPrior::new(1.2, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(TestPrior::new(0.5, 0.0, 2.0, 1.0, 1.0).is_err(), "variance order");
        assert!(TestPrior::new(0.5, f64::NAN, 0.0, 1.0, 1.0).is_err());
        assert!(NoiseModel::new(0.0).is_err());
        assert!(Allocation::new(vec![1.0, -0.5]).is_err());
    }

    #[test]
    fn zero_effort_leaves_test_untouched() {
        let state =
            BeliefState::from_priors(&[point_null_prior().into()], noise(), 4.0).unwrap();
        let next = posterior_update(&state, &Allocation::zeros(1), &[None]).unwrap();
        assert_eq!(next.tests()[0], state.tests()[0]);
        assert_eq!(next.remaining_budget(), 4.0);
        assert_eq!(next.stage(), 1);
    }

    #[test]
    fn point_mass_observation_matches_logistic_form() {
        // Point masses at 0 and 1, unit noise, y = 1: the posterior is
        // 1 / (1 + exp(-1/2)).
        let prior = TestPrior::new(0.5, 0.0, 0.0, 1.0, 0.0).unwrap();
        let state = BeliefState::from_priors(&[prior], noise(), 1.0).unwrap();
        let alloc = Allocation::new(vec![1.0]).unwrap();
        let next = posterior_update(&state, &alloc, &[Some(1.0)]).unwrap();
        let expect = 1.0 / (1.0 + (-0.5f64).exp());
        assert!(
            (next.tests()[0].p - expect).abs() < 1e-15,
            "p = {}, expected {expect}",
            next.tests()[0].p
        );
        assert!((expect - 0.6224593312018546).abs() < 1e-15);
    }

    #[test]
    fn point_mass_components_are_bit_exact() {
        let prior = TestPrior::new(0.3, 0.1, 0.0, 0.9, 0.0).unwrap();
        let state = BeliefState::from_priors(&[prior], noise(), 10.0).unwrap();
        let alloc = Allocation::new(vec![3.7]).unwrap();
        let next = posterior_update(&state, &alloc, &[Some(0.55)]).unwrap();
        let t = next.tests()[0];
        assert_eq!(t.mu0.to_bits(), 0.1f64.to_bits());
        assert_eq!(t.mu1.to_bits(), 0.9f64.to_bits());
        assert_eq!(t.var0, 0.0);
        assert_eq!(t.var1, 0.0);
    }

    #[test]
    fn shrinkage_example() {
        // var = 1, nu2 = 1, u = 1 halves the variance; y = 2 pulls the mean
        // of a component centered at 0 to exactly 1.
        let prior = TestPrior::new(0.5, 0.0, 1.0, 0.0, 1.0).unwrap();
        let state = BeliefState::from_priors(&[prior], noise(), 1.0).unwrap();
        let next =
            posterior_update(&state, &Allocation::new(vec![1.0]).unwrap(), &[Some(2.0)]).unwrap();
        let t = next.tests()[0];
        assert!((t.var0 - 0.5).abs() < 1e-15);
        assert!((t.mu0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identical_components_never_move_probability() {
        let prior = TestPrior::new(0.37, 0.4, 0.2, 0.4, 0.2).unwrap();
        let state = BeliefState::from_priors(&[prior], noise(), 5.0).unwrap();
        for y in [-3.0, 0.0, 0.4, 2.5] {
            let next =
                posterior_update(&state, &Allocation::new(vec![2.0]).unwrap(), &[Some(y)])
                    .unwrap();
            assert!((next.tests()[0].p - 0.37).abs() < 1e-15, "y = {y}");
        }
    }

    #[test]
    fn degenerate_probabilities_absorb() {
        for p in [0.0, 1.0] {
            let prior = TestPrior::new(p, 0.0, 0.0, 1.0, 0.0625).unwrap();
            let state = BeliefState::from_priors(&[prior], noise(), 5.0).unwrap();
            let next =
                posterior_update(&state, &Allocation::new(vec![2.0]).unwrap(), &[Some(-9.0)])
                    .unwrap();
            assert_eq!(next.tests()[0].p, p);
        }
    }

    #[test]
    fn observation_effort_mismatch_is_rejected() {
        let state =
            BeliefState::from_priors(&[point_null_prior().into()], noise(), 4.0).unwrap();
        let err =
            posterior_update(&state, &Allocation::new(vec![1.0]).unwrap(), &[None]).unwrap_err();
        assert!(matches!(err, ModelError::ObservationMismatch { .. }));
        let err =
            posterior_update(&state, &Allocation::zeros(1), &[Some(0.5)]).unwrap_err();
        assert!(matches!(err, ModelError::ObservationMismatch { .. }));
    }

    #[test]
    fn overdraw_is_rejected() {
        let state =
            BeliefState::from_priors(&[point_null_prior().into()], noise(), 1.0).unwrap();
        let err = posterior_update(&state, &Allocation::new(vec![1.5]).unwrap(), &[Some(0.0)])
            .unwrap_err();
        assert!(matches!(err, ModelError::BudgetExceeded { .. }));
    }

    #[test]
    fn update_matches_quadrature_oracle() {
        let cases = [
            (0.5, 0.0, 0.0, 1.0, 0.0625, 1.0, 2.0, 0.8),
            (0.1, -0.5, 0.3, 0.7, 0.9, 2.0, 0.6, -0.2),
            (0.9, 0.0, 0.05, 0.2, 0.05, 0.5, 3.0, 0.11),
            (0.25, 1.0, 0.0, 1.0, 2.0, 1.5, 1.2, 2.4),
        ];
        for (p, mu0, var0, mu1, var1, nu2, u, y) in cases {
            let prior = TestPrior::new(p, mu0, var0, mu1, var1).unwrap();
            let state =
                BeliefState::from_priors(&[prior], NoiseModel::new(nu2).unwrap(), 100.0).unwrap();
            let next =
                posterior_update(&state, &Allocation::new(vec![u]).unwrap(), &[Some(y)]).unwrap();
            let got = next.tests()[0];
            let want = bayes_update_by_quadrature(p, mu0, var0, mu1, var1, nu2, u, y);
            assert!((got.p - want.p).abs() < 1e-9, "p: {} vs {}", got.p, want.p);
            assert!((got.mu0 - want.mean0).abs() < 1e-9, "mu0: {} vs {}", got.mu0, want.mean0);
            assert!((got.var0 - want.var0).abs() < 1e-9, "var0: {} vs {}", got.var0, want.var0);
            assert!((got.mu1 - want.mean1).abs() < 1e-9, "mu1: {} vs {}", got.mu1, want.mean1);
            assert!((got.var1 - want.var1).abs() < 1e-9, "var1: {} vs {}", got.var1, want.var1);
        }
    }

    #[test]
    fn posterior_probability_is_a_martingale() {
        // Drawing y from the prior predictive must keep E[p'] = p.
        let (p, mu0, var0, mu1, var1, nu2, u) = (0.3, 0.0, 0.1, 1.0, 0.4, 1.0, 2.0);
        let prior = TestPrior::new(p, mu0, var0, mu1, var1).unwrap();
        let state =
            BeliefState::from_priors(&[prior], NoiseModel::new(nu2).unwrap(), 1e6).unwrap();
        let alloc = Allocation::new(vec![u]).unwrap();
        let zs = standard_normals(300_000, 314);
        let mut acc = 0.0;
        let mut accsq = 0.0;
        for triple in zs.chunks_exact(3) {
            // CDF of a standard normal draw is uniform, so this flips the
            // label with probability exactly p.
            let is_alt = adaptive_alloc_oracles::normal::normal_cdf_series(triple[0]) < p;
            let (mu, var) = if is_alt { (mu1, var1) } else { (mu0, var0) };
            let x = mu + var.sqrt() * triple[1];
            let y = x + (nu2 / u).sqrt() * triple[2];
            let next = posterior_update(&state, &alloc, &[Some(y)]).unwrap();
            let q = next.tests()[0].p;
            acc += q;
            accsq += q * q;
        }
        let k = (zs.len() / 3) as f64;
        let mean = acc / k;
        let se = ((accsq / k - mean * mean) / k).sqrt();
        assert!(
            (mean - p).abs() < 4.0 * se + 1e-4,
            "E[p'] = {mean} vs p = {p} (se = {se})"
        );
    }

    #[test]
    fn predictive_density_matches_convolved_normal() {
        let prior = point_null_prior();
        let state = BeliefState::from_priors(&[prior], noise(), 4.0).unwrap();
        for (h, mu, var) in [(Hypothesis::Null, 0.0, 0.0), (Hypothesis::Alt, 1.0, 0.0625)] {
            for y in [-1.0, 0.2, 1.4] {
                let got = predictive_density(&state, 0, h, 4.0, y).unwrap();
                let want = normal_pdf(y, mu, var + 1.0 / 4.0);
                assert!((got - want).abs() < 1e-13, "h = {h:?}, y = {y}");
            }
        }
    }

    #[test]
    fn predictive_density_integrates_to_one() {
        let prior = TestPrior::new(0.4, -0.3, 0.2, 0.8, 0.7).unwrap();
        let state = BeliefState::from_priors(&[prior], noise(), 4.0).unwrap();
        let f = |y: f64| predictive_density(&state, 0, Hypothesis::Alt, 2.5, y).unwrap();
        let mass = integrate(&f, -15.0, 15.0, 1e-10);
        assert!((mass - 1.0).abs() < 1e-8, "mass = {mass}");
    }

    #[test]
    fn predictive_density_requires_effort() {
        let state =
            BeliefState::from_priors(&[point_null_prior().into()], noise(), 4.0).unwrap();
        assert!(predictive_density(&state, 0, Hypothesis::Null, 0.0, 0.0).is_err());
        assert!(predictive_density(&state, 1, Hypothesis::Null, 1.0, 0.0).is_err());
    }

    #[test]
    fn map_decision_breaks_ties_toward_null() {
        assert_eq!(map_decide(0.5, 1.0), Hypothesis::Null);
        assert_eq!(map_decide(0.5 + 1e-12, 1.0), Hypothesis::Alt);
        assert_eq!(map_decide(0.25, 3.0), Hypothesis::Null);
        assert_eq!(map_decide(0.26, 3.0), Hypothesis::Alt);
        assert_eq!(map_decide(0.0, 10.0), Hypothesis::Null);
        assert_eq!(map_decide(1.0, 0.1), Hypothesis::Alt);
    }
}
