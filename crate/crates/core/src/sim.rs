//! Experiment harness: draw ground truths, run policies against them, and
//! aggregate error counts across trials.
//!
//! Randomness is organized so results are a pure function of the
//! configuration. Every random quantity gets its own stream derived from
//! the experiment seed by hierarchical keys: truths are keyed by budget,
//! prior, and trial but never by policy, so competing policies face
//! identical instances; observation noise adds the policy and candidate to
//! the key, since policies draw different measurements. Parallel execution
//! only maps trials to threads and collects in index order, so the worker
//! count cannot change any output.

use crate::allocator::LagrangianSolverConfig;
use crate::baselines::{
    run_ds, run_na, run_st, BaselineError, CullStatistic, StageSchedule, ThresholdRule,
};
use crate::model::{Allocation, BeliefState, Hypothesis, ModelError, NoiseModel, TestPrior};
use crate::olfc::{run_olfc, BetaTable, CalibrationConfig, OlfcError};
use crate::rng::{fnv1a64, RngKey};
use crate::sum::neumaier;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Olfc(#[from] OlfcError),
    #[error(transparent)]
    Alloc(#[from] crate::allocator::AllocError),
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("no calibrated fractions for budget {b}, prior {p0}, horizon {horizon}")]
    MissingCalibration { b: f64, p0: f64, horizon: usize },
}

/// Draw one test's latent mean and its true hypothesis.
pub fn sample_truth(prior: &TestPrior, key: RngKey) -> (Hypothesis, f64) {
    let mut s = key.stream();
    let coin = s.next_f64();
    let z = s.next_normal();
    if coin < prior.p {
        (Hypothesis::Alt, prior.mu1 + prior.var1.sqrt() * z)
    } else {
        (Hypothesis::Null, prior.mu0 + prior.var0.sqrt() * z)
    }
}

/// Draw a whole population, one child stream per test.
pub fn sample_truths(prior: &TestPrior, n: usize, key: RngKey) -> (Vec<Hypothesis>, Vec<f64>) {
    let mut labels = Vec::with_capacity(n);
    let mut means = Vec::with_capacity(n);
    for i in 0..n {
        let (h, x) = sample_truth(prior, key.child(i as u64));
        labels.push(h);
        means.push(x);
    }
    (labels, means)
}

/// Noisy measurements at the allocated efforts: tests with zero effort get
/// `None`, the rest get the latent mean plus noise of variance `nu2 / u`.
pub fn sample_observations(
    truth: &[f64],
    alloc: &Allocation,
    nu2: f64,
    key: RngKey,
) -> Vec<Option<f64>> {
    truth
        .iter()
        .zip(alloc.as_slice())
        .enumerate()
        .map(|(i, (&x, &u))| {
            if u > 0.0 {
                let z = key.child(i as u64).stream().next_normal();
                Some(x + (nu2 / u).sqrt() * z)
            } else {
                None
            }
        })
        .collect()
}

/// A policy entry in an experiment. Multistage baselines carry candidate
/// grids; the experiment runs every candidate on the same instances and
/// reports only the one with the smallest mean weighted error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    /// Uniform single pass.
    Na,
    /// Fractional replanning with a calibrated table.
    Olfc { stages: usize },
    /// Distilled sensing over a geometric schedule; candidates are stage
    /// counts.
    Ds {
        stages: Vec<usize>,
        #[serde(default)]
        posterior: bool,
    },
    /// Sequential thresholding over an equal split; candidates are stage
    /// counts crossed with retention shares.
    St {
        stages: Vec<usize>,
        rho: Vec<f64>,
        #[serde(default)]
        posterior: bool,
    },
}

impl PolicySpec {
    /// Stable identifier used in records and file output.
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Na => "na".into(),
            PolicySpec::Olfc { stages } => format!("olfc{stages}"),
            PolicySpec::Ds { posterior, .. } => {
                if *posterior {
                    "dsb".into()
                } else {
                    "ds".into()
                }
            }
            PolicySpec::St { posterior, .. } => {
                if *posterior {
                    "stb".into()
                } else {
                    "st".into()
                }
            }
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        match self {
            PolicySpec::Na => Ok(()),
            PolicySpec::Olfc { stages } => {
                if *stages == 0 {
                    return bad("olfc stage count must be positive".into());
                }
                Ok(())
            }
            PolicySpec::Ds { stages, .. } => {
                if stages.is_empty() || stages.contains(&0) {
                    return bad("ds stage candidates must be positive".into());
                }
                Ok(())
            }
            PolicySpec::St { stages, rho, .. } => {
                if stages.is_empty() || stages.contains(&0) {
                    return bad("st stage candidates must be positive".into());
                }
                if rho.is_empty() || rho.iter().any(|r| !(0.0..=1.0).contains(r) || *r == 0.0) {
                    return bad("st retention candidates must lie in (0, 1]".into());
                }
                Ok(())
            }
        }
    }
}

/// Full description of a sweep over budgets and priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Cost of a miss relative to a false alarm.
    pub cost: f64,
    pub nu2: f64,
    pub mu0: f64,
    pub var0: f64,
    pub mu1: f64,
    pub var1: f64,
    /// Budgets per test.
    pub b_grid: Vec<f64>,
    /// Prior probabilities of the alternative.
    pub p0_grid: Vec<f64>,
    pub policies: Vec<PolicySpec>,
    #[serde(default)]
    pub solver: LagrangianSolverConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if self.n == 0 {
            return bad("population size must be positive".into());
        }
        if self.trials == 0 {
            return bad("trial count must be positive".into());
        }
        if !self.cost.is_finite() || self.cost <= 0.0 {
            return bad(format!("cost must be positive, got {}", self.cost));
        }
        NoiseModel::new(self.nu2).map_err(|e| SimError::Config(e.to_string()))?;
        if self.b_grid.is_empty() || self.b_grid.iter().any(|b| !b.is_finite() || *b <= 0.0) {
            return bad("budget grid must be non-empty and positive".into());
        }
        if self.p0_grid.is_empty() {
            return bad("prior grid must be non-empty".into());
        }
        for &p0 in &self.p0_grid {
            self.prior(p0).map_err(|e| SimError::Config(e.to_string()))?;
        }
        if self.policies.is_empty() {
            return bad("at least one policy is required".into());
        }
        for p in &self.policies {
            p.validate()?;
        }
        Ok(())
    }

    pub fn prior(&self, p0: f64) -> Result<TestPrior, ModelError> {
        TestPrior::new(p0, self.mu0, self.var0, self.mu1, self.var1)
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel::new(self.nu2).expect("validated")
    }

    /// Horizons that need calibrated fraction tables.
    pub fn olfc_horizons(&self) -> Vec<usize> {
        let mut hs: Vec<usize> = self
            .policies
            .iter()
            .filter_map(|p| match p {
                PolicySpec::Olfc { stages } => Some(*stages),
                _ => None,
            })
            .collect();
        hs.sort_unstable();
        hs.dedup();
        hs
    }
}

/// Calibrated fraction tables per budget and prior cell. One table per
/// cell covers every horizon up to its length, since shorter-horizon
/// fractions are prefixes of longer calibrations.
#[derive(Debug, Clone, Default)]
pub struct CalibrationStore {
    tables: HashMap<(u64, u64), BetaTable>,
}

impl CalibrationStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, b: f64, p0: f64, table: BetaTable) {
        self.tables.insert((b.to_bits(), p0.to_bits()), table);
    }

    pub fn get(&self, b: f64, p0: f64, horizon: usize) -> Option<&BetaTable> {
        self.tables
            .get(&(b.to_bits(), p0.to_bits()))
            .filter(|t| t.max_horizon() >= horizon)
    }

    /// Calibrate whatever the config needs and is not already present.
    /// Returns the cells actually computed.
    pub fn ensure(&mut self, cfg: &ExperimentConfig) -> Result<Vec<(f64, f64, usize)>, SimError> {
        let horizons = cfg.olfc_horizons();
        let Some(&max_h) = horizons.iter().max() else {
            return Ok(Vec::new());
        };
        let mut fresh = Vec::new();
        for &b in &cfg.b_grid {
            for &p0 in &cfg.p0_grid {
                if self.get(b, p0, max_h).is_some() {
                    continue;
                }
                let table = crate::olfc::calibrate_beta_table(
                    cfg.prior(p0)?,
                    cfg.noise(),
                    b,
                    max_h,
                    cfg.cost,
                    cfg.n,
                    &cfg.calibration,
                    calibration_key(cfg.seed, b, p0),
                )?;
                self.insert(b, p0, table);
                fresh.push((b, p0, max_h));
            }
        }
        Ok(fresh)
    }
}

/// Stream namespaces under the experiment root key.
mod keyspace {
    pub const TRUTH: u64 = 1;
    pub const OBSERVATION: u64 = 2;
    pub const CALIBRATION: u64 = 3;
}

pub fn calibration_key(seed: u64, b: f64, p0: f64) -> RngKey {
    RngKey::new(seed)
        .child(keyspace::CALIBRATION)
        .child(b.to_bits())
        .child(p0.to_bits())
}

fn truth_key(seed: u64, b: f64, p0: f64, trial: usize) -> RngKey {
    RngKey::new(seed)
        .child(keyspace::TRUTH)
        .child(b.to_bits())
        .child(p0.to_bits())
        .child(trial as u64)
}

fn obs_key(seed: u64, b: f64, p0: f64, label: &str, candidate: usize, trial: usize) -> RngKey {
    RngKey::new(seed)
        .child(keyspace::OBSERVATION)
        .child(b.to_bits())
        .child(p0.to_bits())
        .child(fnv1a64(label.as_bytes()))
        .child(candidate as u64)
        .child(trial as u64)
}

/// One policy's result on one sampled instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub policy: String,
    pub b: f64,
    pub p0: f64,
    pub trial: usize,
    /// `type1 + cost * type2`.
    pub errors: f64,
    /// False alarms: alternative declared where the null holds.
    pub type1: usize,
    /// Misses: null declared where the alternative holds.
    pub type2: usize,
    pub spent: f64,
    /// Seconds of wall time; informational, not part of file output.
    pub wall_time: f64,
}

pub fn weighted_errors(type1: usize, type2: usize, cost: f64) -> f64 {
    type1 as f64 + cost * type2 as f64
}

fn count_errors(decisions: &[Hypothesis], labels: &[Hypothesis]) -> (usize, usize) {
    let mut type1 = 0;
    let mut type2 = 0;
    for (&d, &l) in decisions.iter().zip(labels) {
        match (d, l) {
            (Hypothesis::Alt, Hypothesis::Null) => type1 += 1,
            (Hypothesis::Null, Hypothesis::Alt) => type2 += 1,
            _ => {}
        }
    }
    (type1, type2)
}

/// The concrete runnable variant of a policy spec.
enum Candidate {
    Na,
    Olfc { horizon: usize },
    Culling {
        schedule: StageSchedule,
        rule: ThresholdRule,
        statistic: CullStatistic,
    },
}

fn candidates(spec: &PolicySpec) -> Result<Vec<Candidate>, SimError> {
    match spec {
        PolicySpec::Na => Ok(vec![Candidate::Na]),
        PolicySpec::Olfc { stages } => Ok(vec![Candidate::Olfc { horizon: *stages }]),
        PolicySpec::Ds { stages, posterior } => stages
            .iter()
            .map(|&t| {
                Ok(Candidate::Culling {
                    schedule: StageSchedule::geometric(t)?,
                    rule: ThresholdRule::SignThreshold,
                    statistic: cull_statistic(*posterior),
                })
            })
            .collect(),
        PolicySpec::St {
            stages,
            rho,
            posterior,
        } => {
            let mut out = Vec::with_capacity(stages.len() * rho.len());
            for &t in stages {
                for &r in rho {
                    out.push(Candidate::Culling {
                        schedule: StageSchedule::equal_split(t)?,
                        rule: ThresholdRule::QuantileRetain { rho: r },
                        statistic: cull_statistic(*posterior),
                    });
                }
            }
            Ok(out)
        }
    }
}

fn cull_statistic(posterior: bool) -> CullStatistic {
    if posterior {
        CullStatistic::Posterior
    } else {
        CullStatistic::Observation
    }
}

/// Run the full sweep. For specs with candidate grids, every candidate is
/// evaluated on the same instances and only the best one's records are
/// returned, ties going to the earliest candidate in grid order.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    store: &CalibrationStore,
) -> Result<Vec<TrialRecord>, SimError> {
    cfg.validate()?;
    let mut records = Vec::new();
    for spec in &cfg.policies {
        let label = spec.label();
        let cands = candidates(spec)?;
        for &b in &cfg.b_grid {
            for &p0 in &cfg.p0_grid {
                let mut best: Option<(f64, Vec<TrialRecord>)> = None;
                for (ci, cand) in cands.iter().enumerate() {
                    let rows = run_cell(cfg, store, &label, cand, ci, b, p0)?;
                    let mean = neumaier(&rows.iter().map(|r| r.errors).collect::<Vec<_>>())
                        / rows.len() as f64;
                    if best.as_ref().is_none_or(|(m, _)| mean < *m) {
                        best = Some((mean, rows));
                    }
                }
                records.extend(best.expect("at least one candidate").1);
            }
        }
    }
    Ok(records)
}

fn run_cell(
    cfg: &ExperimentConfig,
    store: &CalibrationStore,
    label: &str,
    cand: &Candidate,
    cand_index: usize,
    b: f64,
    p0: f64,
) -> Result<Vec<TrialRecord>, SimError> {
    let prior = cfg.prior(p0)?;
    let table = match cand {
        Candidate::Olfc { horizon } => Some(
            store
                .get(b, p0, *horizon)
                .ok_or(SimError::MissingCalibration {
                    b,
                    p0,
                    horizon: *horizon,
                })?,
        ),
        _ => None,
    };
    let trial_ids: Vec<usize> = (0..cfg.trials).collect();
    let run_one = |&trial: &usize| -> Result<TrialRecord, SimError> {
        let started = std::time::Instant::now();
        let (labels, truth) = sample_truths(&prior, cfg.n, truth_key(cfg.seed, b, p0, trial));
        let state =
            BeliefState::homogeneous(prior, cfg.n, cfg.noise(), b * cfg.n as f64)?;
        let key = obs_key(cfg.seed, b, p0, label, cand_index, trial);
        let (decisions, spent) = match cand {
            Candidate::Na => {
                let out = run_na(&state, &truth, cfg.cost, key)?;
                (out.decisions, out.spent)
            }
            Candidate::Olfc { horizon } => {
                let out = run_olfc(
                    &state,
                    &truth,
                    *horizon,
                    table.expect("resolved above"),
                    cfg.cost,
                    &cfg.solver,
                    key,
                )?;
                (out.decisions, out.spent)
            }
            Candidate::Culling {
                schedule,
                rule,
                statistic,
            } => {
                let out = match rule {
                    ThresholdRule::SignThreshold => {
                        run_ds(&state, &truth, schedule, *statistic, cfg.cost, key)?
                    }
                    ThresholdRule::QuantileRetain { .. } => {
                        run_st(&state, &truth, schedule, *rule, *statistic, cfg.cost, key)?
                    }
                };
                (out.decisions, out.spent)
            }
        };
        let (type1, type2) = count_errors(&decisions, &labels);
        Ok(TrialRecord {
            policy: label.to_string(),
            b,
            p0,
            trial,
            errors: weighted_errors(type1, type2, cfg.cost),
            type1,
            type2,
            spent,
            wall_time: started.elapsed().as_secs_f64(),
        })
    };
    collect_trials(&trial_ids, run_one)
}

#[cfg(feature = "parallel")]
fn collect_trials(
    ids: &[usize],
    run_one: impl Fn(&usize) -> Result<TrialRecord, SimError> + Sync + Send,
) -> Result<Vec<TrialRecord>, SimError> {
    if ids.len() >= 2 && rayon::current_num_threads() > 1 {
        ids.par_iter().map(run_one).collect()
    } else {
        ids.iter().map(run_one).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn collect_trials(
    ids: &[usize],
    run_one: impl Fn(&usize) -> Result<TrialRecord, SimError>,
) -> Result<Vec<TrialRecord>, SimError> {
    ids.iter().map(run_one).collect()
}

/// Per-cell aggregate of trial records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    pub b: f64,
    pub p0: f64,
    pub mean_errors: f64,
    pub std_err: f64,
    pub trials: usize,
}

/// Group records by cell and compute mean and standard error of the
/// weighted error count. Rows follow `policy_order` (unknown policies come
/// last alphabetically), then ascending budget and prior.
pub fn summarize(records: &[TrialRecord], policy_order: &[String]) -> Vec<SummaryRow> {
    let mut groups: HashMap<(String, u64, u64), Vec<f64>> = HashMap::new();
    for r in records {
        groups
            .entry((r.policy.clone(), r.b.to_bits(), r.p0.to_bits()))
            .or_default()
            .push(r.errors);
    }
    let rank = |policy: &str| -> (usize, String) {
        match policy_order.iter().position(|p| p == policy) {
            Some(i) => (i, String::new()),
            None => (policy_order.len(), policy.to_string()),
        }
    };
    let mut rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((policy, b_bits, p0_bits), errs)| {
            let trials = errs.len();
            let mean = neumaier(&errs) / trials as f64;
            let var = if trials > 1 {
                let sq: Vec<f64> = errs.iter().map(|e| (e - mean) * (e - mean)).collect();
                neumaier(&sq) / (trials - 1) as f64
            } else {
                0.0
            };
            SummaryRow {
                policy,
                b: f64::from_bits(b_bits),
                p0: f64::from_bits(p0_bits),
                mean_errors: mean,
                std_err: (var / trials as f64).sqrt(),
                trials,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        rank(&a.policy)
            .cmp(&rank(&b.policy))
            .then(a.b.partial_cmp(&b.b).unwrap())
            .then(a.p0.partial_cmp(&b.p0).unwrap())
    });
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::bayes_risk_for_effort;
    use adaptive_alloc_oracles::mean_and_stderr;

    fn small_config(policies: Vec<PolicySpec>) -> ExperimentConfig {
        ExperimentConfig {
            n: 40,
            trials: 30,
            seed: 7,
            cost: 1.0,
            nu2: 1.0,
            mu0: 0.0,
            var0: 0.0,
            mu1: 1.0,
            var1: 0.0625,
            b_grid: vec![1.0],
            p0_grid: vec![0.5],
            policies,
            solver: LagrangianSolverConfig::default(),
            calibration: CalibrationConfig {
                mc_samples: 16,
                beta_grid: 5,
                refine_iters: 0,
                proxy_n: Some(30),
                ..CalibrationConfig::default()
            },
        }
    }

    #[test]
    fn truth_sampler_honors_the_prior() {
        let prior = TestPrior::new(0.3, 0.0, 0.0, 1.0, 0.0625).unwrap();
        let key = RngKey::new(42);
        let (labels, means) = sample_truths(&prior, 20_000, key);
        let alt_share =
            labels.iter().filter(|&&l| l == Hypothesis::Alt).count() as f64 / 20_000.0;
        assert!((alt_share - 0.3).abs() < 0.02, "share {alt_share}");
        for (l, x) in labels.iter().zip(&means) {
            if *l == Hypothesis::Null {
                assert_eq!(*x, 0.0, "null means are point masses here");
            }
        }
    }

    #[test]
    fn observations_respect_zero_efforts() {
        let alloc = Allocation::new(vec![0.0, 2.0, 0.0, 1.0]).unwrap();
        let obs = sample_observations(&[0.0, 1.0, 2.0, 3.0], &alloc, 1.0, RngKey::new(1));
        assert!(obs[0].is_none() && obs[2].is_none());
        assert!(obs[1].is_some() && obs[3].is_some());
    }

    #[test]
    fn config_validation_rejects_degenerate_setups() {
        let mut cfg = small_config(vec![PolicySpec::Na]);
        cfg.trials = 0;
        assert!(matches!(cfg.validate(), Err(SimError::Config(_))));
        let mut cfg = small_config(vec![PolicySpec::Na]);
        cfg.b_grid.clear();
        assert!(cfg.validate().is_err());
        let cfg = small_config(vec![PolicySpec::St {
            stages: vec![2],
            rho: vec![0.0],
            posterior: false,
        }]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn uniform_policy_matches_its_analytic_risk() {
        let cfg = small_config(vec![PolicySpec::Na]);
        let records = run_experiment(&cfg, &CalibrationStore::new()).unwrap();
        assert_eq!(records.len(), 30);
        let errs: Vec<f64> = records.iter().map(|r| r.errors).collect();
        let (mean, se) = mean_and_stderr(&errs);
        let prior = cfg.prior(0.5).unwrap();
        let expected = 40.0
            * bayes_risk_for_effort(&prior.into(), cfg.noise(), 1.0, 1.0);
        assert!(
            (mean - expected).abs() < 4.0 * se + 1e-9,
            "mean {mean} vs analytic {expected} (se {se})"
        );
    }

    #[test]
    fn repeated_runs_are_identical() {
        let cfg = small_config(vec![
            PolicySpec::Na,
            PolicySpec::Ds {
                stages: vec![2, 3],
                posterior: false,
            },
        ]);
        let a = run_experiment(&cfg, &CalibrationStore::new()).unwrap();
        let b = run_experiment(&cfg, &CalibrationStore::new()).unwrap();
        let strip = |rows: &[TrialRecord]| -> Vec<TrialRecord> {
            rows.iter()
                .map(|r| TrialRecord {
                    wall_time: 0.0,
                    ..r.clone()
                })
                .collect()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = small_config(vec![PolicySpec::Na, PolicySpec::Olfc { stages: 2 }]);
        let mut store = CalibrationStore::new();
        store.ensure(&cfg).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_experiment(&cfg, &store))
            .unwrap();
        let quad = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_experiment(&cfg, &store))
            .unwrap();
        let strip = |rows: &[TrialRecord]| -> Vec<TrialRecord> {
            rows.iter()
                .map(|r| TrialRecord {
                    wall_time: 0.0,
                    ..r.clone()
                })
                .collect()
        };
        assert_eq!(strip(&single), strip(&quad));
    }

    #[test]
    fn shared_truths_differ_only_by_policy_noise() {
        // The same (budget, prior, trial) cell sees the same instance for
        // every policy; only observation noise differs.
        let prior = TestPrior::new(0.4, 0.0, 0.0, 1.0, 0.0625).unwrap();
        let (l1, x1) = sample_truths(&prior, 50, truth_key(9, 2.0, 0.4, 3));
        let (l2, x2) = sample_truths(&prior, 50, truth_key(9, 2.0, 0.4, 3));
        assert_eq!(l1, l2);
        assert_eq!(x1, x2);
        let ka = obs_key(9, 2.0, 0.4, "na", 0, 3);
        let kb = obs_key(9, 2.0, 0.4, "olfc2", 0, 3);
        assert_ne!(ka, kb);
    }

    #[test]
    fn candidate_grids_report_a_single_winner() {
        let cfg = small_config(vec![PolicySpec::St {
            stages: vec![2, 3],
            rho: vec![0.5, 0.8],
            posterior: true,
        }]);
        let records = run_experiment(&cfg, &CalibrationStore::new()).unwrap();
        assert_eq!(records.len(), 30, "only the winning candidate's trials");
        assert!(records.iter().all(|r| r.policy == "stb"));
    }

    #[test]
    fn generous_budget_reaches_near_perfect_decisions() {
        let mut cfg = small_config(vec![PolicySpec::Na]);
        cfg.b_grid = vec![5000.0];
        let records = run_experiment(&cfg, &CalibrationStore::new()).unwrap();
        let total: f64 = records.iter().map(|r| r.errors).sum();
        assert_eq!(total, 0.0, "overwhelming evidence should decide cleanly");
    }

    #[test]
    fn missing_calibration_is_reported() {
        let cfg = small_config(vec![PolicySpec::Olfc { stages: 2 }]);
        let err = run_experiment(&cfg, &CalibrationStore::new()).unwrap_err();
        assert!(matches!(err, SimError::MissingCalibration { .. }));
    }

    #[test]
    fn summaries_group_and_order_cells() {
        let cfg = small_config(vec![
            PolicySpec::Ds {
                stages: vec![2],
                posterior: false,
            },
            PolicySpec::Na,
        ]);
        let records = run_experiment(&cfg, &CalibrationStore::new()).unwrap();
        let order = vec!["ds".to_string(), "na".to_string()];
        let rows = summarize(&records, &order);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].policy, "ds");
        assert_eq!(rows[1].policy, "na");
        assert_eq!(rows[0].trials, 30);
        assert!(rows.iter().all(|r| r.std_err >= 0.0));
        // Pooling shards of the records gives the same mean.
        let (half_a, half_b) = records.split_at(records.len() / 2);
        let merged: Vec<TrialRecord> = half_a.iter().chain(half_b).cloned().collect();
        let again = summarize(&merged, &order);
        assert_eq!(rows, again);
    }
}
