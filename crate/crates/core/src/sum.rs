//! Compensated summation.

/// Neumaier's variant of Kahan summation: the running error term also
/// captures the case where the addend is larger than the accumulator.
pub(crate) fn neumaier(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
