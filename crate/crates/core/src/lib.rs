// Negated comparisons are deliberate throughout: `!(x > 0.0)` rejects NaN
// where `x <= 0.0` would let it through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::manual_range_contains)]

//! Jittered-median estimation of a Poisson intensity.
//!
//! Adding an independent `U(0,1)` jitter to Poisson counts gives the sum a
//! density, so the sample median obeys standard quantile asymptotics. The
//! median of the jittered distribution sits at `lambda + 1/3 + H(frac(lambda))/lambda`
//! up to `o(1/lambda)`, which makes `median(counts + jitter) - 1/3` a simple,
//! robust, O(n) estimator of the rate. This crate provides:
//!
//! - [`poisson`]: numerically stable Poisson kernels and the jittered
//!   density/CDF they induce;
//! - [`theory`]: the exact jittered median, the correction function `H`, and
//!   the `w_n`/`Delta_n` sequence machinery behind its asymptotics;
//! - [`estimators`]: the jittered-median estimator plus MLE, raw median and
//!   Tukey's modified M-estimator, built to scale to 1e8 counts;
//! - [`simulation`]: exact Poisson sampling, an additive-outlier model, and a
//!   reproducible Monte Carlo + timing harness.

pub mod estimators;
pub mod poisson;
pub mod rng;
pub mod simulation;
pub mod theory;

pub use estimators::{CountSample, Estimate, JitteredSample, Method, TukeyConfig};
pub use poisson::Intensity;
pub use theory::MedianSolution;
