//! Robust confidence sets for location estimation under data corruption.
//!
//! This crate computes minimal confidence sets for the location parameter of a
//! univariate symmetric log-concave family when an adversary may displace up to
//! a total-variation fraction `alpha` of the probability mass, and the desired
//! coverage guarantee has exponential rate `r` (miscoverage decaying like
//! `exp(-r n)` in the sample size `n`).
//!
//! The main quantities on offer:
//!
//! - the resolution function `r^alpha(delta)`: the smallest KL divergence
//!   separating two corrupted hypotheses at locations `-delta` and `+delta`
//!   from a common observed distribution ([`least_favorable`]);
//! - its inverse, the worst-case radius `kappa_{r,alpha}` of the KL-TV
//!   confidence set, together with closed-form regime thresholds ([`radius`]);
//! - the data-facing confidence region obtained by inverting the resolution
//!   function of an observed distribution over the location axis ([`dro_set`]);
//! - the constrained "almost sure" variant in which the observed distribution
//!   itself must be a feasible corruption of some family member
//!   ([`almost_sure`]);
//! - classical robust location estimators (mean, median, generalized mean,
//!   Huber) whose clipping constant is derived from the least-favorable pair
//!   ([`estimators`]);
//! - Monte-Carlo validation of the coverage guarantees under parameterized
//!   corruption adversaries ([`simulate`]).
//!
//! All computation happens on finite uniform grids; [`numerics`] provides the
//! shared quadrature, root-finding and simplex-constrained optimization
//! kernels, and [`divergences`] the discrete KL/TV/Bhattacharyya primitives.

pub mod almost_sure;
pub mod divergences;
pub mod dro_set;
pub mod estimators;
pub mod families;
pub mod least_favorable;
pub mod numerics;
pub mod radius;
pub mod simulate;

// re-exports of the radius types are added once that module lands
pub use divergences::DiscreteDistribution;
pub use families::LocationFamily;
pub use least_favorable::LeastFavorablePair;
pub use numerics::Grid;
