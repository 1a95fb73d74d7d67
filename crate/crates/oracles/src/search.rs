//! Dense grid search over small budget-splitting problems.
//!
//! For two or three tests sharing one budget, the feasible set is a segment
//! or a triangle, small enough to scan outright. The scan uses a hybrid axis
//! grid (linear points for bulk coverage, log points for the region near
//! zero where objectives often have structure) followed by two local zoom
//! passes around the incumbent. No Lagrangian machinery is involved, which
//! is the point: the production solver must not be able to fail in the same
//! way as this search.

/// Axis grid on `[0, total]`: `lin` evenly spaced points, plus `log` points
/// geometrically spaced from `total * 1e-7` up to `total`, plus 0 itself.
/// Sorted and deduplicated.
pub fn hybrid_axis_grid(total: f64, lin: usize, log: usize) -> Vec<f64> {
    assert!(total > 0.0, "grid needs a positive budget, got {total}");
    assert!(lin >= 2 && log >= 2, "grid sizes too small");
    let mut pts = Vec::with_capacity(lin + log + 1);
    pts.push(0.0);
    for k in 0..lin {
        pts.push(total * k as f64 / (lin - 1) as f64);
    }
    let lo = total * 1e-7;
    let ratio = (total / lo).ln() / (log - 1) as f64;
    for k in 0..log {
        pts.push((lo * (ratio * k as f64).exp()).min(total));
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

/// Minimize `r0(u0) + r1(total - u0)` by dense scan plus two zoom passes.
/// Returns `(value, [u0, u1])`.
pub fn grid_min_two<F0, F1>(r0: &F0, r1: &F1, total: f64) -> (f64, [f64; 2])
where
    F0: Fn(f64) -> f64,
    F1: Fn(f64) -> f64,
{
    let eval = |u0: f64| r0(u0) + r1(total - u0);
    let mut best_u = 0.0;
    let mut best_v = eval(0.0);
    for &u0 in &hybrid_axis_grid(total, 201, 200) {
        let v = eval(u0);
        if v < best_v {
            best_v = v;
            best_u = u0;
        }
    }
    let mut width = total / 100.0;
    for _ in 0..2 {
        let lo = (best_u - width).max(0.0);
        let hi = (best_u + width).min(total);
        for k in 0..=400 {
            let u0 = lo + (hi - lo) * k as f64 / 400.0;
            let v = eval(u0);
            if v < best_v {
                best_v = v;
                best_u = u0;
            }
        }
        width /= 100.0;
    }
    (best_v, [best_u, total - best_u])
}

/// Minimize `r0(u0) + r1(u1) + r2(total - u0 - u1)` over the feasible
/// triangle by dense scan plus one zoom pass. Returns `(value, [u0, u1, u2])`.
pub fn grid_min_three<F0, F1, F2>(r0: &F0, r1: &F1, r2: &F2, total: f64) -> (f64, [f64; 3])
where
    F0: Fn(f64) -> f64,
    F1: Fn(f64) -> f64,
    F2: Fn(f64) -> f64,
{
    let eval = |u0: f64, u1: f64| r0(u0) + r1(u1) + r2(total - u0 - u1);
    let axis = hybrid_axis_grid(total, 201, 200);
    let mut best = (f64::INFINITY, [0.0, 0.0, total]);
    for &u0 in &axis {
        for &u1 in &axis {
            if u0 + u1 > total {
                break;
            }
            let v = eval(u0, u1);
            if v < best.0 {
                best = (v, [u0, u1, total - u0 - u1]);
            }
        }
    }
    let width = total / 100.0;
    let (c0, c1) = (best.1[0], best.1[1]);
    for i in 0..=120 {
        let u0 = (c0 - width + 2.0 * width * i as f64 / 120.0).clamp(0.0, total);
        for j in 0..=120 {
            let u1 = (c1 - width + 2.0 * width * j as f64 / 120.0).clamp(0.0, total);
            if u0 + u1 > total {
                break;
            }
            let v = eval(u0, u1);
            if v < best.0 {
                best = (v, [u0, u1, total - u0 - u1]);
            }
        }
    }
    best
}
