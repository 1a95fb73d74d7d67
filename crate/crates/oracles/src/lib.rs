//! Slow reference implementations used to cross-check the fast paths in
//! `adaptive-alloc-core`.
//!
//! Everything in this crate trades speed for transparency: quadrature instead
//! of closed forms, dense grid scans instead of Lagrangian searches, series
//! expansions instead of `erfc`. Test code compares the production results
//! against these, so nothing here may call into the core crate.

pub mod bayes;
pub mod normal;
pub mod quad;
pub mod sample;
pub mod search;

/// Sample mean and standard error of the mean.
///
/// Returns `(mean, se)` with `se = s / sqrt(k)` where `s` is the unbiased
/// sample standard deviation. A slice of length < 2 yields `se = 0`.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len();
    if k == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / k as f64;
    if k < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    let var = ss / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}
