//! Budget allocation for large batteries of simultaneous binary hypothesis
//! tests with Gaussian observations.
//!
//! The problem: `n` independent tests share one sensing budget. Observing
//! test `i` with effort `u` yields a Gaussian measurement whose precision
//! grows with `u`. Spend everywhere and every measurement is noisy; spend
//! only where it matters and most tests are resolved cheaply. This crate
//! provides the pieces to do the latter:
//!
//! * [`model`]: conjugate belief tracking over the tests.
//! * [`risk`]: the closed-form Bayes risk of deciding a test after a given
//!   effort, and the optimal decision regions.
//! * [`allocator`]: single-stage budget splitting by Lagrangian bisection,
//!   with a certificate when the dual crossing is exact.
//! * [`olfc`]: multi-stage open-loop feedback control; later stages
//!   re-plan with everything observed so far.
//! * [`baselines`]: uniform and threshold-culling reference policies.
//! * [`sim`]: reproducible experiment harness; results are independent of
//!   worker count.
//! * [`rng`]: key-addressed deterministic random streams.

pub mod allocator;
pub mod baselines;
pub mod model;
pub mod olfc;
pub mod risk;
pub mod rng;
pub mod sim;
mod sum;
