//! Single-stage budget splitting by price-directed decomposition.
//!
//! The problem: choose efforts `u_i >= 0` summing to the budget `U` that
//! minimize the total Bayes risk `sum_i R_i(u_i)`. The risks are not convex
//! in general, so instead of first-order conditions the solver works
//! through a scalar price `lambda`: each test independently minimizes
//! `R_i(u) + lambda u`, producing a demand `u_i(lambda)`, and the price is
//! bisected until the aggregate demand `S(lambda) = sum_i u_i(lambda)`
//! meets the budget.
//!
//! Two facts make this sound despite the non-convexity:
//!
//! * if `S(lambda) = U` exactly, the demand profile is a global minimizer
//!   of the budgeted problem (weak duality, no gap needed);
//! * demands are monotone: raising the price never raises any demand, and
//!   a demand at price `lambda` caps every demand at higher prices, so the
//!   bisection can tighten per-test search intervals as it goes.
//!
//! `S(lambda)` may jump across `U` (the per-test objectives can have ties
//! between separated minimizers), in which case no price clears the budget
//! exactly. After `max_bisect` halvings the last demand profile is scaled
//! onto the budget and the result is flagged `rescaled` instead of
//! `certified`; on small instances a pairwise exchange pass then repairs
//! the corner solutions the rescale tends to miss. Certified results are
//! also scaled, but by at most the certification tolerance. A price of zero caps nothing, so demands are
//! additionally bounded by `R_i(0) / lambda`: beyond that point the linear
//! term alone exceeds the value of not observing at all.
//!
//! The inner one-dimensional minimizations use a logarithmic grid over the
//! current interval (plus the explicit endpoints, plus `u = 0` when
//! reachable) followed by golden-section refinement around the best cell.
//! Ties prefer the smaller effort, so flat objectives spend nothing.

use crate::model::{Allocation, BeliefState};
use crate::risk::{bayes_risk, no_observation_risk, RiskParams};
use crate::sum::neumaier;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error, PartialEq)]
pub enum AllocError {
    #[error("price must be finite and non-negative, got {0}")]
    NegativePrice(f64),
    #[error("search interval [{lo}, {hi}] is invalid")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("search interval is unbounded and the price is zero")]
    UnboundedSearch,
    #[error("risk function returned a non-finite value at u = {0}")]
    NonFiniteRisk(f64),
    #[error("budget must be finite and positive, got {0}")]
    BudgetRange(f64),
    #[error("miss cost must be finite and positive, got {0}")]
    CostRange(f64),
    #[error("state holds no tests")]
    EmptyState,
}

/// Tuning knobs for the bisection solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianSolverConfig {
    /// Points in the logarithmic probe grid of each inner minimization.
    pub grid_points: usize,
    /// Golden-section iterations refining the best grid cell.
    pub refine_iters: usize,
    /// Certification tolerance: the bisection stops certified when
    /// `|S(lambda) - U| <= lambda_tol * U`.
    pub lambda_tol: f64,
    /// Maximum bisection iterations before falling back to rescaling.
    pub max_bisect: usize,
    /// Smallest positive effort probed. `None` derives `1e-8 * U / n`.
    pub u_floor: Option<f64>,
    /// Record the full demand profile at every bisection step. Costly for
    /// large instances; intended for diagnostics and tests.
    pub record_trace_allocations: bool,
}

impl Default for LagrangianSolverConfig {
    fn default() -> Self {
        LagrangianSolverConfig {
            grid_points: 200,
            refine_iters: 60,
            lambda_tol: 1e-6,
            max_bisect: 100,
            u_floor: None,
            record_trace_allocations: false,
        }
    }
}

/// One bisection step: the probed price, the aggregate demand there, and
/// optionally the whole demand profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub lambda: f64,
    pub demand: f64,
    pub u: Option<Vec<f64>>,
}

/// Solver output.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub u: Allocation,
    /// Final price probed by the bisection.
    pub lambda: f64,
    /// Total risk at the returned allocation.
    pub objective: f64,
    /// The aggregate demand met the budget within tolerance, which
    /// certifies the allocation as a global minimizer up to that tolerance.
    pub certified: bool,
    /// The bisection ran out of iterations and the last demand profile was
    /// scaled onto the budget.
    pub rescaled: bool,
    pub trace: Vec<BisectionStep>,
}

/// Compensated sum of per-test efforts.
pub fn allocation_sum(u: &[f64]) -> f64 {
    neumaier(u)
}

/// Minimize `risk(u) + lambda * u` over `u` in `[lo, hi]`.
///
/// `hi` may be infinite when `lambda > 0`; the search is then capped at
/// `risk(0) / lambda`, beyond which no minimizer can lie. Returns the
/// minimizing effort and the attained value. Ties go to the smaller effort.
pub fn lagrangian_min<F: Fn(f64) -> f64>(
    risk: F,
    lambda: f64,
    lo: f64,
    hi: f64,
    cfg: &LagrangianSolverConfig,
) -> Result<(f64, f64), AllocError> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(AllocError::NegativePrice(lambda));
    }
    if lo.is_nan() || hi.is_nan() || lo < 0.0 || hi < lo {
        return Err(AllocError::InvalidInterval { lo, hi });
    }
    let r0 = risk(0.0);
    if !r0.is_finite() {
        return Err(AllocError::NonFiniteRisk(0.0));
    }
    let probe = |u: f64| -> Result<f64, AllocError> {
        let r = risk(u);
        if !r.is_finite() {
            return Err(AllocError::NonFiniteRisk(u));
        }
        Ok(r + lambda * u)
    };
    let hi_eff = effective_upper(lo, hi, lambda, r0)?;
    let u_floor = cfg.u_floor.unwrap_or(1e-8 * hi_eff.max(lo)).max(1e-300);
    minimize_on_interval(&probe, lo, hi_eff, u_floor, cfg)
}

fn effective_upper(lo: f64, hi: f64, lambda: f64, r0: f64) -> Result<f64, AllocError> {
    let mut hi_eff = hi;
    if lambda > 0.0 {
        hi_eff = hi_eff.min(r0 / lambda);
    }
    if !hi_eff.is_finite() {
        return Err(AllocError::UnboundedSearch);
    }
    Ok(hi_eff.max(lo))
}

fn minimize_on_interval(
    probe: &impl Fn(f64) -> Result<f64, AllocError>,
    lo: f64,
    hi: f64,
    u_floor: f64,
    cfg: &LagrangianSolverConfig,
) -> Result<(f64, f64), AllocError> {
    let mut best = (lo, probe(lo)?);
    if hi <= lo {
        return Ok(best);
    }
    let start = lo.max(u_floor);
    let mut cands: Vec<f64> = Vec::with_capacity(cfg.grid_points + 2);
    if hi > start {
        let pts = grid_count(cfg.grid_points, start, hi);
        let span = (hi / start).ln();
        for k in 0..=pts {
            cands.push(start * (span * k as f64 / pts as f64).exp());
        }
    } else {
        cands.push(hi);
    }
    let mut best_idx = None;
    for (k, &u) in cands.iter().enumerate() {
        if u <= best.0 {
            continue;
        }
        let v = probe(u)?;
        if v < best.1 {
            best = (u, v);
            best_idx = Some(k);
        }
    }
    // Golden-section refinement inside the cells flanking the best probe.
    let (a, b) = match best_idx {
        Some(k) => (
            if k > 0 { cands[k - 1] } else { lo },
            if k + 1 < cands.len() { cands[k + 1] } else { cands[k] },
        ),
        // The left endpoint won every probe; the minimum may still sit just
        // inside the first cell.
        None => (lo, *cands.first().unwrap()),
    };
    golden_refine(probe, a, b, cfg.refine_iters, best)
}

/// Grid resolution adapted to the interval's width in decades, capped at
/// the configured size. Narrow intervals (late bisection iterations, after
/// the demand bounds have tightened) need far fewer probes.
fn grid_count(limit: usize, start: f64, hi: f64) -> usize {
    let decades = (hi / start).log10().max(0.0);
    let by_span = (decades * 40.0).ceil() as usize + 8;
    limit.min(by_span.max(16))
}

fn golden_refine(
    probe: &impl Fn(f64) -> Result<f64, AllocError>,
    mut a: f64,
    mut b: f64,
    iters: usize,
    mut best: (f64, f64),
) -> Result<(f64, f64), AllocError> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    if b <= a {
        return Ok(best);
    }
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = probe(x1)?;
    let mut f2 = probe(x2)?;
    consider(&mut best, x1, f1);
    consider(&mut best, x2, f2);
    for _ in 0..iters {
        if b - a <= 1e-13 * (1.0 + b.abs()) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = probe(x1)?;
            consider(&mut best, x1, f1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = probe(x2)?;
            consider(&mut best, x2, f2);
        }
    }
    Ok(best)
}

fn consider(best: &mut (f64, f64), u: f64, v: f64) {
    if v < best.1 || (v == best.1 && u < best.0) {
        *best = (u, v);
    }
}

const POLISH_GROUP_LIMIT: usize = 32;
const POLISH_SWEEPS: usize = 8;

/// Pairwise budget exchanges between groups, run once the multiplier search
/// has produced a feasible profile. The per-test curves are not convex, so
/// the bisection can end pinched between two demand branches; scaling that
/// profile back to the budget keeps feasibility but can sit well away from
/// the optimum, which at small n is often a corner (one test starved
/// outright). Moving budget between two groups at a time reaches those
/// corners directly. Skipped above `POLISH_GROUP_LIMIT` groups: the sweep
/// is quadratic in the group count, and the relative gap left by rescaling
/// shrinks with n.
fn polish_exchanges(
    groups: &[Group],
    u: &mut [f64],
    cfg: &LagrangianSolverConfig,
) -> Result<(), AllocError> {
    let g = groups.len();
    if g < 2 || g > POLISH_GROUP_LIMIT {
        return Ok(());
    }
    for _ in 0..POLISH_SWEEPS {
        let mut improved = false;
        for i in 0..g {
            for j in (i + 1)..g {
                let mi = groups[i].members.len() as f64;
                let mj = groups[j].members.len() as f64;
                let w = mi * u[i] + mj * u[j];
                if w <= 0.0 {
                    continue;
                }
                let ri = groups[i].risk;
                let rj = groups[j].risk;
                let current = mi * ri.eval(u[i]) + mj * rj.eval(u[j]);
                let probe = |t: f64| -> Result<f64, AllocError> {
                    let uj = ((w - mi * t) / mj).max(0.0);
                    let v = mi * ri.eval(t) + mj * rj.eval(uj);
                    if !v.is_finite() {
                        return Err(AllocError::NonFiniteRisk(t));
                    }
                    Ok(v)
                };
                let hi = w / mi;
                let mut best = minimize_on_interval(&probe, 0.0, hi, 1e-8 * hi, cfg)?;
                // The log grid ends near the right corner but refinement can
                // drift off it; probe the exact endpoint as well.
                let v_hi = probe(hi)?;
                consider(&mut best, hi, v_hi);
                if best.1 < current - 1e-14 * (1.0 + current.abs()) {
                    u[i] = best.0;
                    u[j] = ((w - mi * best.0) / mj).max(0.0);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(())
}

/// Closed-form per-test risk with precomputed parameters, cheap enough to
/// call a few hundred times per inner minimization.
#[derive(Debug, Clone, Copy)]
struct TestRisk {
    p: f64,
    c: f64,
    mu_diff: f64,
    var0: f64,
    var1: f64,
    nu2: f64,
    at_zero: f64,
}

impl TestRisk {
    fn eval(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.at_zero;
        }
        let obs = self.nu2 / u;
        bayes_risk(&RiskParams {
            p: self.p,
            c: self.c,
            mu_diff: self.mu_diff,
            s0: self.var0 + obs,
            s1: self.var1 + obs,
        })
    }
}

/// Identical tests share demand curves, bounds and solutions; solve each
/// distinct parameter vector once per bisection step.
struct Group {
    risk: TestRisk,
    members: Vec<usize>,
    lo: f64,
    hi: f64,
}

/// Split the remaining budget of `state` across its tests, minimizing the
/// summed terminal Bayes risk under miss cost `c`.
///
/// # Errors
///
/// Rejects an empty state, a non-positive or non-finite remaining budget,
/// and a non-positive cost.
pub fn solve_single_stage(
    state: &BeliefState,
    c: f64,
    cfg: &LagrangianSolverConfig,
) -> Result<AllocationResult, AllocError> {
    let n = state.len();
    if n == 0 {
        return Err(AllocError::EmptyState);
    }
    let total = state.remaining_budget();
    if !total.is_finite() || total <= 0.0 {
        return Err(AllocError::BudgetRange(total));
    }
    if !c.is_finite() || c <= 0.0 {
        return Err(AllocError::CostRange(c));
    }
    let nu2 = state.noise().nu2();
    let mut groups = group_tests(state, c, nu2);
    let risk_at_zero: f64 =
        neumaier(&groups.iter().map(|g| g.risk.at_zero * g.members.len() as f64).collect::<Vec<_>>());
    let mut trace = Vec::new();
    if risk_at_zero <= 0.0 {
        // Every test is already decided; any split has zero risk.
        return Ok(AllocationResult {
            u: Allocation::uniform(n, total).expect("uniform allocation"),
            lambda: 0.0,
            objective: 0.0,
            certified: true,
            rescaled: false,
            trace,
        });
    }
    let u_floor = cfg.u_floor.unwrap_or(1e-8 * total / n as f64).max(1e-300);
    let pinch = 1e-9 * total / n as f64;
    let mut lambda_lo = 0.0;
    let mut lambda_hi = risk_at_zero / total;
    let mut lambda = lambda_hi;
    let mut last_profile: Vec<f64> = vec![0.0; groups.len()];
    let mut certified = false;
    for _ in 0..cfg.max_bisect {
        lambda = 0.5 * (lambda_lo + lambda_hi);
        let demands = solve_groups(&groups, lambda, u_floor, pinch, cfg)?;
        let s = neumaier(
            &groups
                .iter()
                .zip(&demands)
                .map(|(g, &u)| u * g.members.len() as f64)
                .collect::<Vec<_>>(),
        );
        trace.push(BisectionStep {
            lambda,
            demand: s,
            u: cfg.record_trace_allocations.then(|| expand(&groups, &demands, n)),
        });
        last_profile = demands;
        if (s - total).abs() <= cfg.lambda_tol * total {
            certified = true;
            break;
        }
        if s > total {
            lambda_lo = lambda;
            for (g, &u) in groups.iter_mut().zip(&last_profile) {
                g.hi = g.hi.min(u);
            }
        } else {
            lambda_hi = lambda;
            for (g, &u) in groups.iter_mut().zip(&last_profile) {
                g.lo = g.lo.max(u);
            }
        }
    }
    let s_last = neumaier(
        &groups
            .iter()
            .zip(&last_profile)
            .map(|(g, &u)| u * g.members.len() as f64)
            .collect::<Vec<_>>(),
    );
    let rescaled = !certified;
    let mut scaled: Vec<f64> = if s_last > 0.0 {
        let scale = total / s_last;
        last_profile.iter().map(|&u| u * scale).collect()
    } else {
        // Demand plateaued at zero everywhere; fall back to the uniform
        // split, which is as good as any on such an instance.
        vec![total / n as f64; groups.len()]
    };
    polish_exchanges(&groups, &mut scaled, cfg)?;
    let objective = neumaier(
        &groups
            .iter()
            .zip(&scaled)
            .map(|(g, &u)| g.risk.eval(u) * g.members.len() as f64)
            .collect::<Vec<_>>(),
    );
    Ok(AllocationResult {
        u: Allocation::new(expand(&groups, &scaled, n)).expect("non-negative efforts"),
        lambda,
        objective,
        certified,
        rescaled,
        trace,
    })
}

fn group_tests(state: &BeliefState, c: f64, nu2: f64) -> Vec<Group> {
    use std::collections::HashMap;
    let mut index: HashMap<[u64; 5], usize> = HashMap::new();
    let mut groups: Vec<Group> = Vec::new();
    for (i, t) in state.tests().iter().enumerate() {
        let key = [
            t.p.to_bits(),
            t.mu0.to_bits(),
            t.var0.to_bits(),
            t.mu1.to_bits(),
            t.var1.to_bits(),
        ];
        let slot = *index.entry(key).or_insert_with(|| {
            groups.push(Group {
                risk: TestRisk {
                    p: t.p,
                    c,
                    mu_diff: t.mu1 - t.mu0,
                    var0: t.var0,
                    var1: t.var1,
                    nu2,
                    at_zero: no_observation_risk(t.p, c),
                },
                members: Vec::new(),
                lo: 0.0,
                hi: f64::INFINITY,
            });
            groups.len() - 1
        });
        groups[slot].members.push(i);
    }
    groups
}

fn expand(groups: &[Group], per_group: &[f64], n: usize) -> Vec<f64> {
    let mut u = vec![0.0; n];
    for (g, &v) in groups.iter().zip(per_group) {
        for &i in &g.members {
            u[i] = v;
        }
    }
    u
}

fn demand_for_group(
    g: &Group,
    lambda: f64,
    u_floor: f64,
    pinch: f64,
    cfg: &LagrangianSolverConfig,
) -> Result<f64, AllocError> {
    let hi_eff = effective_upper(g.lo, g.hi, lambda, g.risk.at_zero)?;
    if hi_eff - g.lo <= pinch {
        let cap = if lambda > 0.0 { (g.risk.at_zero / lambda).max(g.lo) } else { f64::INFINITY };
        return Ok((0.5 * (g.lo + hi_eff)).min(cap));
    }
    let probe = |u: f64| -> Result<f64, AllocError> {
        let r = g.risk.eval(u);
        if !r.is_finite() {
            return Err(AllocError::NonFiniteRisk(u));
        }
        Ok(r + lambda * u)
    };
    let (u, _) = minimize_on_interval(&probe, g.lo, hi_eff, u_floor, cfg)?;
    Ok(u)
}

#[cfg(feature = "parallel")]
fn solve_groups(
    groups: &[Group],
    lambda: f64,
    u_floor: f64,
    pinch: f64,
    cfg: &LagrangianSolverConfig,
) -> Result<Vec<f64>, AllocError> {
    if groups.len() >= 64 {
        groups
            .par_iter()
            .map(|g| demand_for_group(g, lambda, u_floor, pinch, cfg))
            .collect()
    } else {
        groups
            .iter()
            .map(|g| demand_for_group(g, lambda, u_floor, pinch, cfg))
            .collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn solve_groups(
    groups: &[Group],
    lambda: f64,
    u_floor: f64,
    pinch: f64,
    cfg: &LagrangianSolverConfig,
) -> Result<Vec<f64>, AllocError> {
    groups
        .iter()
        .map(|g| demand_for_group(g, lambda, u_floor, pinch, cfg))
        .collect()
}
