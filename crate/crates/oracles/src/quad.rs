//! Numerical integration on a finite interval.
//!
//! Two flavours:
//!
//! * [`integrate`]: adaptive Simpson with interval bisection. Handles
//!   integrands with a few kinks (such as a pointwise minimum of two
//!   densities) because the initial panelling localizes non-smooth points
//!   and the recursion keeps splitting until the panel error estimate is
//!   below its share of the tolerance.
//! * [`integrate_fixed`]: composite Simpson on a uniform grid, for smooth
//!   integrands where a deterministic evaluation count is preferable.

/// Adaptive Simpson integral of `f` over `[a, b]` with absolute tolerance `tol`.
///
/// The interval is first cut into 32 equal panels; each panel is then refined
/// recursively up to depth 50. The returned value applies the standard
/// Richardson correction `(s2 - s1) / 15`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    assert!(b >= a, "integration bounds out of order: [{a}, {b}]");
    assert!(tol > 0.0, "tolerance must be positive");
    if a == b {
        return 0.0;
    }
    let panels = 32;
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * h;
        let hi = if k + 1 == panels { b } else { lo + h };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let s = simpson(lo, hi, flo, fmid, fhi);
        total += adapt(f, lo, hi, flo, fmid, fhi, s, tol / panels as f64, 50);
    }
    total
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let s2 = left + right;
    if depth == 0 || (s2 - whole).abs() <= 15.0 * tol {
        return s2 + (s2 - whole) / 15.0;
    }
    adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Composite Simpson on `panels` uniform panels (`panels` must be even).
pub fn integrate_fixed<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    assert!(panels >= 2 && panels % 2 == 0, "panel count must be even, got {panels}");
    assert!(b >= a, "integration bounds out of order: [{a}, {b}]");
    if a == b {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for k in 1..panels {
        let x = a + k as f64 * h;
        acc += if k % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    acc * h / 3.0
}
