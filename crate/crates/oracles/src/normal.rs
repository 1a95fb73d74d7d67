//! Gaussian density and a series-based normal CDF.
//!
//! The CDF here is evaluated through the Maclaurin series
//!
//! ```text
//! Phi(z) = 1/2 + phi(z) * sum_{k>=0} z^(2k+1) / (1 * 3 * ... * (2k+1))
//! ```
//!
//! whose terms are all positive for z > 0, so there is no cancellation and
//! the truncation error is bounded by the first dropped term. It converges
//! for every z and is accurate to full double precision on |z| <= 12, which
//! is the whole range where the CDF is distinguishable from 0 or 1 at the
//! tolerances used in tests. The production code uses `erfc`; this path
//! shares nothing with it.

/// Density of N(mean, var) at `x`. Requires `var > 0`.
pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    assert!(var > 0.0, "normal_pdf needs positive variance, got {var}");
    let z = x - mean;
    (-0.5 * z * z / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Standard normal CDF via the positive-term series above.
pub fn normal_cdf_series(z: f64) -> f64 {
    if z < 0.0 {
        return 1.0 - normal_cdf_series(-z);
    }
    if z > 12.0 {
        return 1.0;
    }
    let z2 = z * z;
    let mut term = z;
    let mut acc = z;
    let mut k = 0u32;
    while term > acc * 1e-18 && k < 500 {
        k += 1;
        term *= z2 / (2 * k + 1) as f64;
        acc += term;
    }
    let phi = (-0.5 * z2).exp() / (2.0 * std::f64::consts::PI).sqrt();
    0.5 + phi * acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_at_zero_is_half() {
        assert_eq!(normal_cdf_series(0.0), 0.5);
    }

    #[test]
    fn cdf_at_one_matches_reference_value() {
        // Phi(1) to 16 significant digits.
        let got = normal_cdf_series(1.0);
        assert!((got - 0.8413447460685429).abs() < 1e-14, "Phi(1) = {got}");
    }

    #[test]
    fn cdf_is_symmetric() {
        for z in [0.1, 0.7, 1.3, 2.9, 5.5] {
            let s = normal_cdf_series(z) + normal_cdf_series(-z);
            assert!((s - 1.0).abs() < 1e-14, "symmetry off at z = {z}: {s}");
        }
    }

    #[test]
    fn cdf_matches_pdf_integral() {
        // Integrate the density over [-8, 1.25] and compare.
        let f = |x: f64| normal_pdf(x, 0.0, 1.0);
        let int = crate::quad::integrate(&f, -8.0, 1.25, 1e-12);
        let cdf = normal_cdf_series(1.25);
        assert!((int - cdf).abs() < 1e-10, "integral {int} vs series {cdf}");
    }
}
