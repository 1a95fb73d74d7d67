//! Random feasible points and reference sampling, built on `rand` so the
//! sampling path shares nothing with the deterministic streams in the core
//! crate.

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Dirichlet, Distribution, StandardNormal};

/// `count` allocations drawn uniformly from the simplex `{u >= 0, sum = total}`
/// via a symmetric Dirichlet. Used to challenge certified optima.
pub fn random_feasible_allocations(total: f64, n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(n >= 2, "need at least two tests, got {n}");
    assert!(total > 0.0, "budget must be positive, got {total}");
    let mut rng = StdRng::seed_from_u64(seed);
    let dir = Dirichlet::new(&vec![1.0; n]).expect("valid Dirichlet parameters");
    (0..count)
        .map(|_| dir.sample(&mut rng).into_iter().map(|w| w * total).collect())
        .collect()
}

/// Standard normal draws from `rand`'s ziggurat-style sampler.
pub fn standard_normals(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count).map(|_| StandardNormal.sample(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocations_are_feasible() {
        for alloc in random_feasible_allocations(2.5, 4, 50, 7) {
            assert_eq!(alloc.len(), 4);
            assert!(alloc.iter().all(|&u| u >= 0.0));
            let s: f64 = alloc.iter().sum();
            assert!((s - 2.5).abs() < 1e-9, "sum = {s}");
        }
    }

    #[test]
    fn normal_draws_have_plausible_moments() {
        let zs = standard_normals(200_000, 11);
        let mean = zs.iter().sum::<f64>() / zs.len() as f64;
        let var = zs.iter().map(|z| z * z).sum::<f64>() / zs.len() as f64;
        assert!(mean.abs() < 0.01, "mean = {mean}");
        assert!((var - 1.0).abs() < 0.02, "var = {var}");
    }
}
