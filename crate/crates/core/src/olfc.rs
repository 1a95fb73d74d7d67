//! Open-loop feedback control: commit a fraction of the myopically optimal
//! allocation at each stage, then replan from the updated beliefs.
//!
//! Observation precisions add across stages, so an open-loop plan that
//! splits effort for one test over several stages performs exactly like
//! spending the total at once. Minimizing over open-loop plans for the
//! remaining horizon therefore reduces to the single-stage problem on the
//! current beliefs and the remaining budget ([`olfc_reduce`]). Feedback
//! enters by committing only a fraction `beta` of that solution now,
//! keeping the rest for replanning after the observations arrive.
//!
//! Fractions live in a [`BetaTable`] indexed by the number of stages left:
//! the final stage always commits everything, and a `T`-stage policy at
//! stage `t` behaves like a fresh `T - t`-stage policy. Only the
//! first-stage fraction of each horizon length needs calibration, done
//! bottom-up by Monte Carlo rollouts with common random numbers across
//! candidate fractions.

use crate::allocator::{solve_single_stage, AllocationResult, LagrangianSolverConfig};
use crate::model::{
    map_decide, posterior_update, Allocation, BeliefState, Hypothesis, ModelError, NoiseModel,
    TestPrior,
};
use crate::risk::no_observation_risk;
use crate::rng::RngKey;
use crate::sim::{sample_observations, sample_truths};
use crate::sum::neumaier;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OlfcError {
    #[error(transparent)]
    Alloc(#[from] crate::allocator::AllocError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("horizon must be at least 1, got {0}")]
    HorizonRange(usize),
    #[error("beta table covers horizons up to {max}, needed {horizon}")]
    TableTooShort { horizon: usize, max: usize },
    #[error("truth vector has {got} entries for {expected} tests")]
    TruthLength { expected: usize, got: usize },
    #[error("fraction at horizon {horizon} is {value}, expected within [0, 1]")]
    FractionRange { horizon: usize, value: f64 },
    #[error("calibration needs at least 2 grid points and 1 sample")]
    CalibrationRange,
}

/// First-stage commitment fractions by horizon length.
///
/// `fraction(t, horizon)` is the share of the current single-stage solution
/// committed at stage `t` of a `horizon`-stage run; it equals the
/// first-stage fraction of a fresh `horizon - t`-stage run. Entry 0 (one
/// stage left) is always 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaTable {
    by_horizon: Vec<f64>,
}

impl BetaTable {
    /// Greedy table: every stage commits its whole plan. Horizon 1 only
    /// ever uses the mandatory final 1, so this is the natural default
    /// before calibration.
    pub fn greedy(max_horizon: usize) -> Self {
        BetaTable {
            by_horizon: vec![1.0; max_horizon.max(1)],
        }
    }

    /// Build from explicit fractions, `fractions[h - 1]` being the
    /// first-stage share for an `h`-stage horizon.
    pub fn from_fractions(fractions: Vec<f64>) -> Result<Self, OlfcError> {
        if fractions.is_empty() {
            return Err(OlfcError::HorizonRange(0));
        }
        for (i, &f) in fractions.iter().enumerate() {
            if !(0.0..=1.0).contains(&f) {
                return Err(OlfcError::FractionRange {
                    horizon: i + 1,
                    value: f,
                });
            }
        }
        if fractions[0] != 1.0 {
            return Err(OlfcError::FractionRange {
                horizon: 1,
                value: fractions[0],
            });
        }
        Ok(BetaTable {
            by_horizon: fractions,
        })
    }

    pub fn max_horizon(&self) -> usize {
        self.by_horizon.len()
    }

    pub fn fractions(&self) -> &[f64] {
        &self.by_horizon
    }

    /// Commitment share at `stage` of a `horizon`-stage run.
    ///
    /// # Panics
    ///
    /// Panics when `stage >= horizon` or the table is too short.
    pub fn fraction(&self, stage: usize, horizon: usize) -> f64 {
        assert!(stage < horizon, "stage {stage} out of horizon {horizon}");
        self.by_horizon[horizon - stage - 1]
    }
}

/// Reduce the remaining multistage problem to one sitting of the
/// single-stage solver on the current beliefs.
///
/// Valid because a fixed plan gains nothing from spreading a test's effort
/// across stages: the posterior after several observations of one test
/// depends on them only through their precision-weighted combination.
pub fn olfc_reduce(
    state: &BeliefState,
    c: f64,
    solver: &LagrangianSolverConfig,
) -> Result<AllocationResult, crate::allocator::AllocError> {
    solve_single_stage(state, c, solver)
}

/// One stage's plan: the fraction applied, the committed efforts, and the
/// underlying open-loop solution they were cut from.
#[derive(Debug, Clone)]
pub struct OlfcPlan {
    pub fraction: f64,
    pub commitment: Allocation,
    pub solution: AllocationResult,
}

/// Plan stage `t` of a `horizon`-stage run from the current beliefs.
pub fn plan_stage(
    state: &BeliefState,
    stage: usize,
    horizon: usize,
    table: &BetaTable,
    c: f64,
    solver: &LagrangianSolverConfig,
) -> Result<OlfcPlan, OlfcError> {
    if horizon == 0 {
        return Err(OlfcError::HorizonRange(horizon));
    }
    if table.max_horizon() < horizon {
        return Err(OlfcError::TableTooShort {
            horizon,
            max: table.max_horizon(),
        });
    }
    let fraction = table.fraction(stage, horizon);
    let solution = olfc_reduce(state, c, solver)?;
    let commitment = Allocation::new(
        solution
            .u
            .as_slice()
            .iter()
            .map(|&u| u * fraction)
            .collect(),
    )?;
    Ok(OlfcPlan {
        fraction,
        commitment,
        solution,
    })
}

/// Per-stage record of a completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlfcStage {
    pub stage: usize,
    pub fraction: f64,
    pub committed: f64,
    /// Full effort vector, kept when the solver config records traces.
    pub u: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct OlfcOutcome {
    pub decisions: Vec<Hypothesis>,
    pub stages: Vec<OlfcStage>,
    pub final_state: BeliefState,
    pub spent: f64,
}

/// Run the policy against a fixed ground truth, drawing observations from
/// streams derived from `key`.
///
/// Stages whose remaining budget has been exhausted (an earlier fraction
/// of 1) commit nothing and draw no observations. Decisions are the
/// cost-weighted posterior mode per test after the final stage.
pub fn run_olfc(
    state0: &BeliefState,
    truth: &[f64],
    horizon: usize,
    table: &BetaTable,
    c: f64,
    solver: &LagrangianSolverConfig,
    key: RngKey,
) -> Result<OlfcOutcome, OlfcError> {
    if horizon == 0 {
        return Err(OlfcError::HorizonRange(horizon));
    }
    if truth.len() != state0.len() {
        return Err(OlfcError::TruthLength {
            expected: state0.len(),
            got: truth.len(),
        });
    }
    let total0 = state0.remaining_budget();
    let zero_eps = 1e-12 * total0.max(1.0);
    let nu2 = state0.noise().nu2();
    let mut state = state0.clone();
    let mut stages = Vec::with_capacity(horizon);
    for t in 0..horizon {
        if state.remaining_budget() <= zero_eps {
            stages.push(OlfcStage {
                stage: t,
                fraction: table.fraction(t, horizon),
                committed: 0.0,
                u: None,
            });
            continue;
        }
        let plan = plan_stage(&state, t, horizon, table, c, solver)?;
        let committed = plan.commitment.total();
        if committed <= zero_eps {
            stages.push(OlfcStage {
                stage: t,
                fraction: plan.fraction,
                committed: 0.0,
                u: None,
            });
            continue;
        }
        let obs = sample_observations(truth, &plan.commitment, nu2, key.child(t as u64));
        state = posterior_update(&state, &plan.commitment, &obs)?;
        stages.push(OlfcStage {
            stage: t,
            fraction: plan.fraction,
            committed,
            u: solver
                .record_trace_allocations
                .then(|| plan.commitment.as_slice().to_vec()),
        });
    }
    let decisions = state.tests().iter().map(|t| map_decide(t.p, c)).collect();
    let spent = total0 - state.remaining_budget();
    Ok(OlfcOutcome {
        decisions,
        stages,
        final_state: state,
        spent,
    })
}

/// Monte Carlo calibration settings.
///
/// Rollouts run on a homogeneous proxy population of `proxy_n` tests
/// (default: the real population size capped at 1000), scored by the exact
/// expected terminal risk rather than sampled decisions. The embedded
/// solver config trades some certification tightness for rollout speed;
/// production runs keep their own solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub mc_samples: usize,
    pub beta_grid: usize,
    pub refine_iters: usize,
    pub proxy_n: Option<usize>,
    pub solver: LagrangianSolverConfig,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            mc_samples: 500,
            beta_grid: 21,
            refine_iters: 8,
            proxy_n: None,
            solver: LagrangianSolverConfig {
                grid_points: 80,
                refine_iters: 30,
                lambda_tol: 1e-4,
                max_bisect: 48,
                ..LagrangianSolverConfig::default()
            },
        }
    }
}

/// A calibrated table with enough context to reuse it across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub schema_version: u32,
    pub prior: TestPrior,
    pub nu2: f64,
    pub horizon: usize,
    pub budget_per_test: f64,
    pub cost: f64,
    pub proxy_n: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub fractions: Vec<f64>,
}

pub const CALIBRATION_SCHEMA_VERSION: u32 = 1;

impl CalibrationRecord {
    pub fn table(&self) -> Result<BetaTable, OlfcError> {
        BetaTable::from_fractions(self.fractions.clone())
    }
}

/// Calibrate first-stage fractions for horizons `2..=horizon`, bottom-up.
///
/// Every candidate fraction is scored on the same sampled truths and
/// observation noise (streams keyed by sample index, not by candidate), so
/// the comparison is deterministic and the grid argmin is meaningful even
/// at moderate sample counts. Golden-section refinement around the best
/// grid cell only replaces it on strict improvement.
pub fn calibrate_beta_table(
    prior: TestPrior,
    noise: NoiseModel,
    budget_per_test: f64,
    horizon: usize,
    c: f64,
    n_hint: usize,
    cfg: &CalibrationConfig,
    key: RngKey,
) -> Result<BetaTable, OlfcError> {
    if horizon == 0 {
        return Err(OlfcError::HorizonRange(horizon));
    }
    if cfg.beta_grid < 2 || cfg.mc_samples == 0 {
        return Err(OlfcError::CalibrationRange);
    }
    let proxy_n = cfg.proxy_n.unwrap_or(n_hint.min(1000)).max(1);
    let mut fractions = vec![1.0];
    for h in 2..=horizon {
        let stage_key = key.child(h as u64);
        let score = |beta: f64| -> Result<f64, OlfcError> {
            let mut plan = Vec::with_capacity(h);
            plan.push(beta);
            for t in 1..h {
                plan.push(fractions[h - t - 1]);
            }
            let mut costs = Vec::with_capacity(cfg.mc_samples);
            for s in 0..cfg.mc_samples {
                costs.push(rollout_expected_cost(
                    &prior,
                    noise,
                    proxy_n,
                    budget_per_test * proxy_n as f64,
                    c,
                    &plan,
                    &cfg.solver,
                    stage_key.child(s as u64),
                )?);
            }
            Ok(neumaier(&costs) / cfg.mc_samples as f64)
        };
        let mut best = (1.0, score(1.0)?);
        let mut best_idx = cfg.beta_grid - 1;
        for k in (0..cfg.beta_grid - 1).rev() {
            let beta = k as f64 / (cfg.beta_grid - 1) as f64;
            let v = score(beta)?;
            // Ties prefer the smaller fraction: withholding budget costs
            // nothing here and keeps options open.
            if v <= best.1 {
                best = (beta, v);
                best_idx = k;
            }
        }
        let step = 1.0 / (cfg.beta_grid - 1) as f64;
        let lo = (best_idx as f64 - 1.0).max(0.0) * step;
        let hi = ((best_idx + 1) as f64 * step).min(1.0);
        best = refine_fraction(&score, lo, hi, cfg.refine_iters, best)?;
        fractions.push(best.0);
    }
    BetaTable::from_fractions(fractions)
}

fn refine_fraction(
    score: &impl Fn(f64) -> Result<f64, OlfcError>,
    mut a: f64,
    mut b: f64,
    iters: usize,
    mut best: (f64, f64),
) -> Result<(f64, f64), OlfcError> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    if b <= a || iters == 0 {
        return Ok(best);
    }
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = score(x1)?;
    let mut f2 = score(x2)?;
    if f1 < best.1 || (f1 == best.1 && x1 < best.0) {
        best = (x1, f1);
    }
    if f2 < best.1 || (f2 == best.1 && x2 < best.0) {
        best = (x2, f2);
    }
    for _ in 2..iters {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = score(x1)?;
            if f1 < best.1 || (f1 == best.1 && x1 < best.0) {
                best = (x1, f1);
            }
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = score(x2)?;
            if f2 < best.1 || (f2 == best.1 && x2 < best.0) {
                best = (x2, f2);
            }
        }
    }
    Ok(best)
}

/// One calibration rollout: simulate all but the last stage, then score
/// the last stage by its solved objective, which equals the expected
/// terminal risk given everything observed so far.
#[allow(clippy::too_many_arguments)]
fn rollout_expected_cost(
    prior: &TestPrior,
    noise: NoiseModel,
    n: usize,
    budget: f64,
    c: f64,
    plan: &[f64],
    solver: &LagrangianSolverConfig,
    sample_key: RngKey,
) -> Result<f64, OlfcError> {
    let (_, truth) = sample_truths(prior, n, sample_key.child(0));
    let obs_key = sample_key.child(1);
    let mut state = BeliefState::homogeneous(*prior, n, noise, budget)?;
    let zero_eps = 1e-12 * budget.max(1.0);
    let horizon = plan.len();
    let nu2 = noise.nu2();
    for (t, &fraction) in plan.iter().enumerate() {
        let remaining = state.remaining_budget();
        if t + 1 == horizon {
            if remaining <= zero_eps {
                let idle: Vec<f64> = state
                    .tests()
                    .iter()
                    .map(|b| no_observation_risk(b.p, c))
                    .collect();
                return Ok(neumaier(&idle));
            }
            return Ok(solve_single_stage(&state, c, solver)?.objective);
        }
        if remaining <= zero_eps || fraction <= 0.0 {
            continue;
        }
        let v = solve_single_stage(&state, c, solver)?;
        let commitment = Allocation::new(
            v.u.as_slice().iter().map(|&u| u * fraction).collect(),
        )?;
        if commitment.total() <= zero_eps {
            continue;
        }
        let obs = sample_observations(&truth, &commitment, nu2, obs_key.child(t as u64));
        state = posterior_update(&state, &commitment, &obs)?;
    }
    unreachable!("loop returns at the final stage");
}
