//! Browser playground over the core crate. Three operations, each taking
//! and returning JSON strings so the page needs no generated TypeScript:
//!
//! * [`risk_curve`]: per-test Bayes risk as a function of effort, with the
//!   priced objective for a chosen multiplier alongside.
//! * [`solve_allocation`]: single-stage budget split across a handful of
//!   heterogeneous tests, compared against the uniform split.
//! * [`two_stage_sim`]: Monte Carlo comparison of the one-shot uniform
//!   policy against a two-stage policy that holds back a chosen fraction
//!   of the budget for a second, belief-guided pass.
//!
//! The logic lives in plain functions returning `Result<String, String>`
//! so the host test suite can drive them; thin `wasm_bindgen` wrappers are
//! compiled only for the browser target.

use adaptive_alloc_core::allocator::{solve_single_stage, LagrangianSolverConfig};
use adaptive_alloc_core::model::{BeliefState, Hypothesis, NoiseModel, TestPrior};
use adaptive_alloc_core::olfc::{run_olfc, BetaTable};
use adaptive_alloc_core::risk::{bayes_risk_for_effort, no_observation_risk};
use adaptive_alloc_core::rng::RngKey;
use adaptive_alloc_core::sim::{sample_observations, sample_truths};
use serde::{Deserialize, Serialize};

const MAX_CURVE_POINTS: usize = 2048;
const MAX_TESTS: usize = 64;
const MAX_SIM_N: usize = 2000;
const MAX_SIM_TRIALS: usize = 500;

#[derive(Deserialize)]
struct CurveRequest {
    p: f64,
    mu0: f64,
    var0: f64,
    mu1: f64,
    var1: f64,
    nu2: f64,
    cost: f64,
    lambda: f64,
    u_max: f64,
    points: usize,
}

#[derive(Serialize)]
struct CurveResponse {
    u: Vec<f64>,
    risk: Vec<f64>,
    priced: Vec<f64>,
    no_observation: f64,
}

/// Sample `R(u)` and `R(u) + lambda*u` on a uniform effort grid.
pub fn risk_curve(request_json: &str) -> Result<String, String> {
    let req: CurveRequest = serde_json::from_str(request_json).map_err(err)?;
    if !(req.u_max.is_finite() && req.u_max > 0.0) {
        return Err(format!("u_max must be positive, got {}", req.u_max));
    }
    if req.points < 2 || req.points > MAX_CURVE_POINTS {
        return Err(format!("points must be in 2..={MAX_CURVE_POINTS}, got {}", req.points));
    }
    if !(req.lambda.is_finite() && req.lambda >= 0.0) {
        return Err(format!("lambda must be non-negative, got {}", req.lambda));
    }
    let prior = TestPrior::new(req.p, req.mu0, req.var0, req.mu1, req.var1).map_err(err)?;
    let noise = NoiseModel::new(req.nu2).map_err(err)?;
    if !(req.cost.is_finite() && req.cost > 0.0) {
        return Err(format!("cost must be positive, got {}", req.cost));
    }
    let belief = prior.into();
    let mut resp = CurveResponse {
        u: Vec::with_capacity(req.points),
        risk: Vec::with_capacity(req.points),
        priced: Vec::with_capacity(req.points),
        no_observation: no_observation_risk(req.p, req.cost),
    };
    for k in 0..req.points {
        let u = req.u_max * k as f64 / (req.points - 1) as f64;
        let r = bayes_risk_for_effort(&belief, noise, req.cost, u);
        resp.u.push(u);
        resp.risk.push(r);
        resp.priced.push(r + req.lambda * u);
    }
    serde_json::to_string(&resp).map_err(err)
}

#[derive(Deserialize)]
struct TestSpec {
    p: f64,
    mu0: f64,
    var0: f64,
    mu1: f64,
    var1: f64,
}

#[derive(Deserialize)]
struct SolveRequest {
    tests: Vec<TestSpec>,
    budget: f64,
    cost: f64,
    nu2: f64,
}

#[derive(Serialize)]
struct SolveResponse {
    u: Vec<f64>,
    per_test_risk: Vec<f64>,
    objective: f64,
    uniform_objective: f64,
    lambda: f64,
    certified: bool,
}

/// Split a budget across the given tests and report the optimized and
/// uniform objectives side by side.
pub fn solve_allocation(request_json: &str) -> Result<String, String> {
    let req: SolveRequest = serde_json::from_str(request_json).map_err(err)?;
    if req.tests.is_empty() || req.tests.len() > MAX_TESTS {
        return Err(format!("tests must number 1..={MAX_TESTS}, got {}", req.tests.len()));
    }
    let priors: Vec<TestPrior> = req
        .tests
        .iter()
        .map(|t| TestPrior::new(t.p, t.mu0, t.var0, t.mu1, t.var1).map_err(err))
        .collect::<Result<_, _>>()?;
    let noise = NoiseModel::new(req.nu2).map_err(err)?;
    let state = BeliefState::from_priors(&priors, noise, req.budget).map_err(err)?;
    if !(req.cost.is_finite() && req.cost > 0.0) {
        return Err(format!("cost must be positive, got {}", req.cost));
    }
    let out = solve_single_stage(&state, req.cost, &LagrangianSolverConfig::default()).map_err(err)?;
    let per_test_risk: Vec<f64> = state
        .tests()
        .iter()
        .zip(out.u.as_slice())
        .map(|(t, &u)| bayes_risk_for_effort(t, noise, req.cost, u))
        .collect();
    let per_test = req.budget / req.tests.len() as f64;
    let uniform_objective: f64 = state
        .tests()
        .iter()
        .map(|t| bayes_risk_for_effort(t, noise, req.cost, per_test))
        .sum();
    serde_json::to_string(&SolveResponse {
        u: out.u.as_slice().to_vec(),
        per_test_risk,
        objective: out.objective,
        uniform_objective,
        lambda: out.lambda,
        certified: out.certified,
    })
    .map_err(err)
}

#[derive(Deserialize)]
struct SimRequest {
    p0: f64,
    b: f64,
    beta: f64,
    n: usize,
    trials: usize,
    seed: u64,
    cost: f64,
    nu2: f64,
    mu0: f64,
    var0: f64,
    mu1: f64,
    var1: f64,
}

#[derive(Serialize)]
struct PolicyStats {
    mean_errors: f64,
    std_err: f64,
}

#[derive(Serialize)]
struct SimResponse {
    analytic_uniform: f64,
    uniform: PolicyStats,
    two_stage: PolicyStats,
    ratio: f64,
}

/// Compare the one-shot uniform policy against a two-stage policy spending
/// `beta` of the budget up front, on `trials` shared instances.
pub fn two_stage_sim(request_json: &str) -> Result<String, String> {
    let req: SimRequest = serde_json::from_str(request_json).map_err(err)?;
    if req.n == 0 || req.n > MAX_SIM_N {
        return Err(format!("n must be in 1..={MAX_SIM_N}, got {}", req.n));
    }
    if req.trials == 0 || req.trials > MAX_SIM_TRIALS {
        return Err(format!("trials must be in 1..={MAX_SIM_TRIALS}, got {}", req.trials));
    }
    if !(req.beta.is_finite() && (0.0..=1.0).contains(&req.beta)) {
        return Err(format!("beta must lie in [0, 1], got {}", req.beta));
    }
    if !(req.b.is_finite() && req.b > 0.0) {
        return Err(format!("budget per test must be positive, got {}", req.b));
    }
    if !(req.cost.is_finite() && req.cost > 0.0) {
        return Err(format!("cost must be positive, got {}", req.cost));
    }
    let prior = TestPrior::new(req.p0, req.mu0, req.var0, req.mu1, req.var1).map_err(err)?;
    let noise = NoiseModel::new(req.nu2).map_err(err)?;
    let total = req.b * req.n as f64;
    let table = BetaTable::from_fractions(vec![1.0, req.beta]).map_err(err)?;
    let solver = LagrangianSolverConfig {
        grid_points: 80,
        refine_iters: 30,
        lambda_tol: 1e-4,
        max_bisect: 48,
        ..LagrangianSolverConfig::default()
    };
    let root = RngKey::new(req.seed);
    let mut uniform_errors = Vec::with_capacity(req.trials);
    let mut staged_errors = Vec::with_capacity(req.trials);
    for trial in 0..req.trials {
        let (hypotheses, x) = sample_truths(&prior, req.n, root.child(1).child(trial as u64));
        let state = BeliefState::from_priors(&vec![prior; req.n], noise, total).map_err(err)?;

        // One-shot uniform pass.
        let alloc = adaptive_alloc_core::model::Allocation::uniform(req.n, total).map_err(err)?;
        let obs = sample_observations(&x, &alloc, noise.nu2(), root.child(2).child(trial as u64));
        let post = adaptive_alloc_core::model::posterior_update(&state, &alloc, &obs).map_err(err)?;
        uniform_errors.push(count_errors(&post, &hypotheses, req.cost));

        // Two-stage pass with the chosen up-front fraction.
        let out = run_olfc(
            &state,
            &x,
            2,
            &table,
            req.cost,
            &solver,
            root.child(3).child(trial as u64),
        )
        .map_err(err)?;
        let staged = weighted_errors(&out.decisions, &hypotheses, req.cost);
        staged_errors.push(staged);
    }
    let uniform = stats(&uniform_errors);
    let two_stage = stats(&staged_errors);
    let analytic_uniform =
        req.n as f64 * bayes_risk_for_effort(&prior.into(), noise, req.cost, req.b);
    let ratio = if two_stage.mean_errors > 0.0 {
        uniform.mean_errors / two_stage.mean_errors
    } else {
        f64::INFINITY
    };
    serde_json::to_string(&SimResponse { analytic_uniform, uniform, two_stage, ratio }).map_err(err)
}

fn count_errors(state: &BeliefState, truth: &[Hypothesis], cost: f64) -> f64 {
    let decisions: Vec<Hypothesis> = state
        .tests()
        .iter()
        .map(|t| adaptive_alloc_core::model::map_decide(t.p, cost))
        .collect();
    weighted_errors(&decisions, truth, cost)
}

fn weighted_errors(decisions: &[Hypothesis], truth: &[Hypothesis], cost: f64) -> f64 {
    decisions
        .iter()
        .zip(truth)
        .map(|(&d, &t)| match (d, t) {
            (Hypothesis::Alt, Hypothesis::Null) => 1.0,
            (Hypothesis::Null, Hypothesis::Alt) => cost,
            _ => 0.0,
        })
        .sum()
}

fn stats(samples: &[f64]) -> PolicyStats {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return PolicyStats { mean_errors: mean, std_err: 0.0 };
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    PolicyStats { mean_errors: mean, std_err: (var / n).sqrt() }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[cfg(target_arch = "wasm32")]
mod bindings {
    use wasm_bindgen::prelude::*;

    #[wasm_bindgen(js_name = riskCurve)]
    pub fn risk_curve(request_json: &str) -> Result<String, JsValue> {
        super::risk_curve(request_json).map_err(|e| JsValue::from_str(&e))
    }

    #[wasm_bindgen(js_name = solveAllocation)]
    pub fn solve_allocation(request_json: &str) -> Result<String, JsValue> {
        super::solve_allocation(request_json).map_err(|e| JsValue::from_str(&e))
    }

    #[wasm_bindgen(js_name = twoStageSim)]
    pub fn two_stage_sim(request_json: &str) -> Result<String, JsValue> {
        super::two_stage_sim(request_json).map_err(|e| JsValue::from_str(&e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_starts_at_the_no_observation_risk() {
        let out = risk_curve(
            r#"{"p":0.5,"mu0":0.0,"var0":0.0,"mu1":1.0,"var1":0.0625,
                "nu2":1.0,"cost":1.0,"lambda":0.05,"u_max":8.0,"points":33}"#,
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let risk = v["risk"].as_array().unwrap();
        assert_eq!(risk.len(), 33);
        assert!((risk[0].as_f64().unwrap() - 0.5).abs() < 1e-12);
        assert!((v["no_observation"].as_f64().unwrap() - 0.5).abs() < 1e-12);
        // Priced curve sits above the raw curve wherever effort is positive.
        let priced = v["priced"].as_array().unwrap();
        assert!(priced[32].as_f64().unwrap() > risk[32].as_f64().unwrap());
    }

    #[test]
    fn solver_beats_uniform_on_lopsided_tests() {
        let out = solve_allocation(
            r#"{"tests":[
                  {"p":0.5,"mu0":0.0,"var0":0.0,"mu1":1.0,"var1":0.0625},
                  {"p":0.95,"mu0":0.0,"var0":0.0,"mu1":3.0,"var1":0.01}],
                "budget":4.0,"cost":1.0,"nu2":1.0}"#,
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let obj = v["objective"].as_f64().unwrap();
        let uni = v["uniform_objective"].as_f64().unwrap();
        assert!(obj <= uni + 1e-12, "optimized {obj} vs uniform {uni}");
        let u = v["u"].as_array().unwrap();
        let total: f64 = u.iter().map(|x| x.as_f64().unwrap()).sum();
        assert!((total - 4.0).abs() < 1e-6);
    }

    #[test]
    fn two_stage_sim_is_deterministic_and_sane() {
        let req = r#"{"p0":0.5,"b":2.0,"beta":0.6,"n":40,"trials":8,"seed":7,
                      "cost":1.0,"nu2":1.0,"mu0":0.0,"var0":0.0,"mu1":1.0,"var1":0.0625}"#;
        let a = two_stage_sim(req).unwrap();
        let b = two_stage_sim(req).unwrap();
        assert_eq!(a, b);
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert!(v["analytic_uniform"].as_f64().unwrap() > 0.0);
        assert!(v["uniform"]["mean_errors"].as_f64().unwrap() >= 0.0);
    }

    #[test]
    fn malformed_requests_are_rejected() {
        assert!(risk_curve("{").is_err());
        assert!(solve_allocation(r#"{"tests":[],"budget":1.0,"cost":1.0,"nu2":1.0}"#).is_err());
        let e = two_stage_sim(
            r#"{"p0":0.5,"b":2.0,"beta":1.5,"n":40,"trials":8,"seed":7,
                "cost":1.0,"nu2":1.0,"mu0":0.0,"var0":0.0,"mu1":1.0,"var1":0.0625}"#,
        )
        .unwrap_err();
        assert!(e.contains("beta"));
    }
}
