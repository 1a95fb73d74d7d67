//! Non-adaptive and rule-based multistage policies used as comparison
//! points: a uniform single pass, distilled sensing (cull the unpromising
//! half-space each stage), and sequential thresholding (retain a fixed
//! share each stage).
//!
//! Each multistage policy exists in two flavors. The original flavor
//! culls and decides on the raw stage observations; the posterior flavor
//! applies the same budget mechanics but tracks Bayes posteriors, culls on
//! posterior probability, and decides by the cost-weighted posterior mode.
//! Outcomes record which basis produced the decisions.

use crate::model::{
    map_decide, posterior_update, Allocation, BeliefState, Hypothesis, ModelError,
};
use crate::rng::RngKey;
use crate::sim::sample_observations;
use crate::sum::neumaier;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("schedule must have at least one stage")]
    EmptySchedule,
    #[error("schedule fraction {0} is not positive and finite")]
    FractionRange(f64),
    #[error("schedule fractions sum to {0}, expected 1")]
    FractionSum(f64),
    #[error("retention share must be in (0, 1], got {0}")]
    RhoRange(f64),
    #[error("truth vector has {got} entries for {expected} tests")]
    TruthLength { expected: usize, got: usize },
}

/// Per-stage budget shares, positive and summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSchedule {
    fractions: Vec<f64>,
}

impl StageSchedule {
    pub fn new(fractions: Vec<f64>) -> Result<Self, BaselineError> {
        if fractions.is_empty() {
            return Err(BaselineError::EmptySchedule);
        }
        for &f in &fractions {
            if !f.is_finite() || f <= 0.0 {
                return Err(BaselineError::FractionRange(f));
            }
        }
        let total = neumaier(&fractions);
        if (total - 1.0).abs() > 1e-12 {
            return Err(BaselineError::FractionSum(total));
        }
        Ok(StageSchedule { fractions })
    }

    /// Halving schedule: stage `t` gets a share proportional to `2^-t`.
    pub fn geometric(stages: usize) -> Result<Self, BaselineError> {
        if stages == 0 {
            return Err(BaselineError::EmptySchedule);
        }
        let raw: Vec<f64> = (0..stages).map(|t| 0.5f64.powi(t as i32)).collect();
        let z = neumaier(&raw);
        StageSchedule::new(raw.into_iter().map(|f| f / z).collect())
    }

    /// Equal share per stage.
    pub fn equal_split(stages: usize) -> Result<Self, BaselineError> {
        if stages == 0 {
            return Err(BaselineError::EmptySchedule);
        }
        StageSchedule::new(vec![1.0 / stages as f64; stages])
    }

    pub fn stages(&self) -> usize {
        self.fractions.len()
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    /// Stage budgets for a concrete total; the last stage absorbs the
    /// floating-point remainder so the budgets sum to `total` exactly.
    pub fn stage_budgets(&self, total: f64) -> Vec<f64> {
        let mut budgets: Vec<f64> = self.fractions.iter().map(|f| f * total).collect();
        let lead = neumaier(&budgets[..budgets.len() - 1]);
        let last = budgets.len() - 1;
        budgets[last] = (total - lead).max(0.0);
        budgets
    }
}

/// How multistage rules rank and cut tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CullStatistic {
    /// Raw stage observation, centered at the null mean.
    Observation,
    /// Posterior probability of the alternative, compared to its prior.
    Posterior,
}

/// Retention rule for sequential thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdRule {
    /// Keep tests whose statistic leans toward the alternative.
    SignThreshold,
    /// Keep the top `rho` share of active tests by statistic.
    QuantileRetain { rho: f64 },
}

impl ThresholdRule {
    fn validate(&self) -> Result<(), BaselineError> {
        if let ThresholdRule::QuantileRetain { rho } = *self {
            if !rho.is_finite() || rho <= 0.0 || rho > 1.0 {
                return Err(BaselineError::RhoRange(rho));
            }
        }
        Ok(())
    }
}

/// What the reported decisions were computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionBasis {
    /// Surviving the final stage's rule means the alternative; being
    /// culled at any stage means the null.
    FinalRule,
    /// Cost-weighted posterior mode for every test.
    Posterior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineStage {
    pub stage: usize,
    pub budget: f64,
    /// Tests observed this stage.
    pub active: Vec<usize>,
    /// Observations for this stage, `None` where nothing was measured.
    pub observations: Vec<Option<f64>>,
    /// Tests still in play after this stage's cut.
    pub retained: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub decisions: Vec<Hypothesis>,
    pub decision_basis: DecisionBasis,
    pub stages: Vec<BaselineStage>,
    pub final_state: BeliefState,
    pub spent: f64,
}

/// Uniform single-stage pass: split the whole budget evenly, observe every
/// test once, decide from the posteriors.
pub fn run_na(
    state0: &BeliefState,
    truth: &[f64],
    c: f64,
    key: RngKey,
) -> Result<BaselineOutcome, BaselineError> {
    check_truth(state0, truth)?;
    let n = state0.len();
    let total = state0.remaining_budget();
    let alloc = Allocation::uniform(n, total)?;
    let obs = sample_observations(truth, &alloc, state0.noise().nu2(), key.child(0));
    let state = posterior_update(state0, &alloc, &obs)?;
    let decisions = state.tests().iter().map(|t| map_decide(t.p, c)).collect();
    Ok(BaselineOutcome {
        decisions,
        decision_basis: DecisionBasis::Posterior,
        stages: vec![BaselineStage {
            stage: 0,
            budget: total,
            active: (0..n).collect(),
            observations: obs,
            retained: (0..n).collect(),
        }],
        final_state: state,
        spent: total,
    })
}

/// Distilled sensing: spend the stage budget evenly over the active set,
/// then cull every test whose statistic leans toward the null. The
/// geometric schedule is the customary choice.
pub fn run_ds(
    state0: &BeliefState,
    truth: &[f64],
    schedule: &StageSchedule,
    statistic: CullStatistic,
    c: f64,
    key: RngKey,
) -> Result<BaselineOutcome, BaselineError> {
    run_culling_policy(state0, truth, schedule, statistic, ThresholdRule::SignThreshold, c, key)
}

/// Sequential thresholding: like distilled sensing, but with an equal
/// budget split across stages and a configurable retention rule.
pub fn run_st(
    state0: &BeliefState,
    truth: &[f64],
    schedule: &StageSchedule,
    rule: ThresholdRule,
    statistic: CullStatistic,
    c: f64,
    key: RngKey,
) -> Result<BaselineOutcome, BaselineError> {
    run_culling_policy(state0, truth, schedule, statistic, rule, c, key)
}

fn check_truth(state: &BeliefState, truth: &[f64]) -> Result<(), BaselineError> {
    if truth.len() != state.len() {
        return Err(BaselineError::TruthLength {
            expected: state.len(),
            got: truth.len(),
        });
    }
    Ok(())
}

fn run_culling_policy(
    state0: &BeliefState,
    truth: &[f64],
    schedule: &StageSchedule,
    statistic: CullStatistic,
    rule: ThresholdRule,
    c: f64,
    key: RngKey,
) -> Result<BaselineOutcome, BaselineError> {
    check_truth(state0, truth)?;
    rule.validate()?;
    let n = state0.len();
    let total = state0.remaining_budget();
    let budgets = schedule.stage_budgets(total);
    let nu2 = state0.noise().nu2();
    let mut state = state0.clone();
    let mut active: Vec<usize> = (0..n).collect();
    let mut stages = Vec::with_capacity(budgets.len());
    let mut spent = 0.0;
    let mut final_survivors: Vec<usize> = Vec::new();
    for (t, &budget) in budgets.iter().enumerate() {
        if active.is_empty() || budget <= 0.0 {
            // Nothing left to measure; the stage budget goes unspent.
            stages.push(BaselineStage {
                stage: t,
                budget: 0.0,
                active: active.clone(),
                observations: vec![None; n],
                retained: active.clone(),
            });
            final_survivors = active.clone();
            continue;
        }
        let per_test = budget / active.len() as f64;
        let mut u = vec![0.0; n];
        for &i in &active {
            u[i] = per_test;
        }
        let alloc = Allocation::new(u)?;
        let obs = sample_observations(truth, &alloc, nu2, key.child(t as u64));
        state = posterior_update(&state, &alloc, &obs)?;
        spent += budget;
        let survivors = cull(&state, state0, &active, &obs, statistic, rule);
        stages.push(BaselineStage {
            stage: t,
            budget,
            active: active.clone(),
            observations: obs,
            retained: survivors.clone(),
        });
        final_survivors = survivors.clone();
        if t + 1 < budgets.len() {
            active = survivors;
        }
    }
    let (decisions, decision_basis) = match statistic {
        CullStatistic::Observation => {
            let mut d = vec![Hypothesis::Null; n];
            for &i in &final_survivors {
                d[i] = Hypothesis::Alt;
            }
            (d, DecisionBasis::FinalRule)
        }
        CullStatistic::Posterior => (
            state.tests().iter().map(|t| map_decide(t.p, c)).collect(),
            DecisionBasis::Posterior,
        ),
    };
    Ok(BaselineOutcome {
        decisions,
        decision_basis,
        stages,
        final_state: state,
        spent,
    })
}

/// Apply the retention rule to the active tests.
///
/// Statistics lean toward the alternative when the centered observation is
/// positive, or when the posterior probability has not fallen below its
/// prior. Quantile retention keeps the strongest `rho` share (at least one
/// test), breaking ties by index for determinism.
fn cull(
    state: &BeliefState,
    state0: &BeliefState,
    active: &[usize],
    obs: &[Option<f64>],
    statistic: CullStatistic,
    rule: ThresholdRule,
) -> Vec<usize> {
    let score = |i: usize| -> f64 {
        match statistic {
            // Centered at the prior null mean: the raw rule has no notion
            // of updated beliefs.
            CullStatistic::Observation => {
                obs[i].expect("active test observed") - state0.tests()[i].mu0
            }
            CullStatistic::Posterior => state.tests()[i].p - state0.tests()[i].p,
        }
    };
    match rule {
        ThresholdRule::SignThreshold => active
            .iter()
            .copied()
            .filter(|&i| score(i) >= 0.0)
            .collect(),
        ThresholdRule::QuantileRetain { rho } => {
            let keep = ((rho * active.len() as f64).round() as usize)
                .clamp(1, active.len());
            let mut ranked: Vec<usize> = active.to_vec();
            ranked.sort_by(|&a, &b| {
                score(b)
                    .partial_cmp(&score(a))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            ranked.truncate(keep);
            ranked.sort_unstable();
            ranked
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NoiseModel, TestPrior};

    fn prior(p: f64) -> TestPrior {
        TestPrior::new(p, 0.0, 0.0, 1.0, 0.0625).unwrap()
    }

    fn noise() -> NoiseModel {
        NoiseModel::new(1.0).unwrap()
    }

    #[test]
    fn geometric_schedule_halves_each_stage() {
        let s = StageSchedule::geometric(3).unwrap();
        let want = [4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0];
        for (got, want) in s.fractions().iter().zip(want) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn stage_budgets_sum_exactly_to_total() {
        let s = StageSchedule::equal_split(3).unwrap();
        let budgets = s.stage_budgets(1.0);
        let sum: f64 = budgets.iter().sum();
        assert_eq!(sum, 1.0, "last stage must absorb the remainder");
    }

    #[test]
    fn schedule_validation_catches_bad_inputs() {
        assert!(StageSchedule::new(vec![]).is_err());
        assert!(StageSchedule::new(vec![0.5, 0.6]).is_err());
        assert!(StageSchedule::new(vec![1.2, -0.2]).is_err());
        assert!(StageSchedule::geometric(0).is_err());
    }

    #[test]
    fn uniform_pass_spends_everything_evenly() {
        let state = BeliefState::homogeneous(prior(0.3), 5, noise(), 2.5).unwrap();
        let truth = vec![0.0, 1.0, 0.0, 1.0, 0.0];
        let out = run_na(&state, &truth, 1.0, RngKey::new(4)).unwrap();
        assert!((out.spent - 2.5).abs() < 1e-12);
        assert_eq!(out.decision_basis, DecisionBasis::Posterior);
        assert_eq!(out.stages.len(), 1);
        assert!(out.stages[0].observations.iter().all(|o| o.is_some()));
    }

    #[test]
    fn single_stage_posterior_culling_matches_uniform_pass() {
        let state = BeliefState::homogeneous(prior(0.4), 6, noise(), 3.0).unwrap();
        let truth = vec![1.1, -0.2, 0.9, 0.1, 1.4, -0.6];
        let key = RngKey::new(21);
        let na = run_na(&state, &truth, 1.0, key).unwrap();
        let ds = run_ds(
            &state,
            &truth,
            &StageSchedule::equal_split(1).unwrap(),
            CullStatistic::Posterior,
            1.0,
            key,
        )
        .unwrap();
        assert_eq!(na.decisions, ds.decisions);
        assert_eq!(na.final_state.tests(), ds.final_state.tests());
    }

    #[test]
    fn observation_culling_decides_by_final_survival() {
        let state = BeliefState::homogeneous(prior(0.2), 8, noise(), 4.0).unwrap();
        let truth: Vec<f64> = (0..8).map(|i| if i < 4 { 1.0 } else { 0.0 }).collect();
        let out = run_ds(
            &state,
            &truth,
            &StageSchedule::geometric(3).unwrap(),
            CullStatistic::Observation,
            1.0,
            RngKey::new(8),
        )
        .unwrap();
        assert_eq!(out.decision_basis, DecisionBasis::FinalRule);
        let last = out.stages.last().unwrap();
        for i in 0..8 {
            let said_alt = out.decisions[i] == Hypothesis::Alt;
            assert_eq!(said_alt, last.retained.contains(&i));
        }
    }

    #[test]
    fn culled_tests_keep_their_beliefs() {
        let state = BeliefState::homogeneous(prior(0.3), 6, noise(), 3.0).unwrap();
        let truth = vec![0.0; 6];
        let out = run_ds(
            &state,
            &truth,
            &StageSchedule::geometric(2).unwrap(),
            CullStatistic::Posterior,
            1.0,
            RngKey::new(12),
        )
        .unwrap();
        let first = &out.stages[0];
        for i in 0..6 {
            if !first.retained.contains(&i) {
                let before = first.observations[i].is_some();
                assert!(before, "every test is observed in stage one");
                assert!(
                    out.stages[1].observations[i].is_none(),
                    "culled test {i} was observed again"
                );
            }
        }
    }

    #[test]
    fn quantile_retention_keeps_the_requested_share() {
        let state = BeliefState::homogeneous(prior(0.2), 8, noise(), 4.0).unwrap();
        let truth: Vec<f64> = (0..8).map(|i| i as f64 / 4.0).collect();
        let out = run_st(
            &state,
            &truth,
            &StageSchedule::equal_split(2).unwrap(),
            ThresholdRule::QuantileRetain { rho: 0.5 },
            CullStatistic::Observation,
            1.0,
            RngKey::new(30),
        )
        .unwrap();
        assert_eq!(out.stages[0].retained.len(), 4, "half of 8 survive");
        assert!(out.stages[1].active.len() == 4);
    }

    #[test]
    fn full_retention_never_culls() {
        let state = BeliefState::homogeneous(prior(0.2), 5, noise(), 2.0).unwrap();
        let truth = vec![-1.0; 5];
        let out = run_st(
            &state,
            &truth,
            &StageSchedule::equal_split(3).unwrap(),
            ThresholdRule::QuantileRetain { rho: 1.0 },
            CullStatistic::Observation,
            1.0,
            RngKey::new(2),
        )
        .unwrap();
        for stage in &out.stages {
            assert_eq!(stage.retained.len(), 5);
        }
        assert!((out.spent - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hostile_observations_can_empty_the_pool() {
        // Strongly negative truths get everything sign-culled at stage one;
        // later stage budgets then go unspent.
        let state = BeliefState::homogeneous(prior(0.1), 4, noise(), 8.0).unwrap();
        let truth = vec![-50.0; 4];
        let out = run_ds(
            &state,
            &truth,
            &StageSchedule::geometric(3).unwrap(),
            CullStatistic::Observation,
            1.0,
            RngKey::new(77),
        )
        .unwrap();
        assert!(out.stages[0].retained.is_empty());
        assert!(out.spent < 8.0, "unspent budget expected, spent {}", out.spent);
        assert!(out.decisions.iter().all(|&d| d == Hypothesis::Null));
    }

    #[test]
    fn spending_never_exceeds_the_budget() {
        let state = BeliefState::homogeneous(prior(0.25), 7, noise(), 3.5).unwrap();
        let truth: Vec<f64> = (0..7).map(|i| ((i * 37) % 5) as f64 / 2.0 - 0.5).collect();
        for stages in 1..=4 {
            let out = run_st(
                &state,
                &truth,
                &StageSchedule::equal_split(stages).unwrap(),
                ThresholdRule::SignThreshold,
                CullStatistic::Observation,
                1.0,
                RngKey::new(stages as u64),
            )
            .unwrap();
            assert!(out.spent <= 3.5 + 1e-9);
            assert!(out.final_state.remaining_budget() >= -1e-9);
        }
    }

    #[test]
    fn rho_validation_rejects_out_of_range() {
        let state = BeliefState::homogeneous(prior(0.2), 3, noise(), 1.0).unwrap();
        let truth = vec![0.0; 3];
        let err = run_st(
            &state,
            &truth,
            &StageSchedule::equal_split(2).unwrap(),
            ThresholdRule::QuantileRetain { rho: 0.0 },
            CullStatistic::Observation,
            1.0,
            RngKey::new(0),
        );
        assert!(matches!(err, Err(BaselineError::RhoRange(_))));
    }
}
