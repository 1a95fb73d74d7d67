//! Brute-force single-observation Bayes update for a two-hypothesis Gaussian
//! mean model, done entirely by quadrature over the latent mean.
//!
//! Model for one test: under hypothesis `h` the latent mean is
//! `x ~ N(mu_h, var_h)`, and an observation with effort `u > 0` is
//! `y | x ~ N(x, nu2 / u)`. The production code updates the belief with
//! conjugate closed forms; here every quantity is an integral:
//!
//! ```text
//! evidence_h = integral N(y; x, nu2/u) N(x; mu_h, var_h) dx
//! post_mean_h = integral x w_h(x) dx / evidence_h
//! post_var_h  = integral x^2 w_h(x) dx / evidence_h - post_mean_h^2
//! p' = p * evidence_1 / (p * evidence_1 + (1 - p) * evidence_0)
//! ```

use crate::normal::normal_pdf;
use crate::quad::integrate_fixed;

/// Belief in one test after absorbing a single observation, as computed by
/// quadrature. Mirrors the fields the fast update produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureUpdate {
    pub p: f64,
    pub mean0: f64,
    pub var0: f64,
    pub mean1: f64,
    pub var1: f64,
}

/// One-step update of `(p, mu_h, var_h)` for observation `y` taken with
/// effort `u`. Point-mass components (`var_h == 0`) keep their location and
/// contribute the exact likelihood `N(y; mu_h, nu2/u)` instead of an
/// integral.
#[allow(clippy::too_many_arguments)]
pub fn bayes_update_by_quadrature(
    p: f64,
    mu0: f64,
    var0: f64,
    mu1: f64,
    var1: f64,
    nu2: f64,
    u: f64,
    y: f64,
) -> QuadratureUpdate {
    assert!(u > 0.0, "update oracle needs positive effort, got {u}");
    assert!(nu2 > 0.0, "noise variance must be positive, got {nu2}");
    let obs_var = nu2 / u;
    let (ev0, mean0, out_var0) = component_posterior(y, mu0, var0, obs_var);
    let (ev1, mean1, out_var1) = component_posterior(y, mu1, var1, obs_var);
    let num = p * ev1;
    let den = num + (1.0 - p) * ev0;
    let p_new = if den == 0.0 { p } else { num / den };
    QuadratureUpdate {
        p: p_new,
        mean0,
        var0: out_var0,
        mean1,
        var1: out_var1,
    }
}

fn component_posterior(y: f64, mu: f64, var: f64, obs_var: f64) -> (f64, f64, f64) {
    if var == 0.0 {
        return (normal_pdf(y, mu, obs_var), mu, 0.0);
    }
    let sd = var.sqrt();
    let obs_sd = obs_var.sqrt();
    let lo = (mu - 14.0 * sd).min(y - 14.0 * obs_sd);
    let hi = (mu + 14.0 * sd).max(y + 14.0 * obs_sd);
    let w = |x: f64| normal_pdf(y, x, obs_var) * normal_pdf(x, mu, var);
    let panels = 40_000;
    let z = integrate_fixed(&w, lo, hi, panels);
    let m1 = integrate_fixed(&|x: f64| x * w(x), lo, hi, panels) / z;
    let m2 = integrate_fixed(&|x: f64| x * x * w(x), lo, hi, panels) / z;
    (z, m1, (m2 - m1 * m1).max(0.0))
}
