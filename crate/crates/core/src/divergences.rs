//! Discrete divergences on a shared grid: Kullback-Leibler, total variation,
//! and the Bhattacharyya exponent of a location pair.
//!
//! Continuous densities are discretized by assigning each node the mass
//! `density * step` and renormalizing, so quadrature and the discrete convex
//! programs stay consistent on one node set.

use crate::families::{FamilyError, LocationFamily};
use crate::numerics::{self, integrate_with_breakpoints, Grid, NumericsError, LOG_FLOOR};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DivergenceError {
    #[error("weights must be nonnegative, got {0} at index {1}")]
    NegativeWeight(f64, usize),
    #[error("weights sum to {0}, expected 1 within 1e-10")]
    NotNormalized(f64),
    #[error("distributions live on different grids")]
    GridMismatch,
    #[error("weight vector length {0} does not match grid size {1}")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Probability weights on the nodes of a shared real grid.
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteDistribution {
    grid: Grid,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    /// Wrap an already-normalized weight vector.
    pub fn new(grid: Grid, weights: Vec<f64>) -> Result<Self, DivergenceError> {
        if weights.len() != grid.len() {
            return Err(DivergenceError::LengthMismatch(weights.len(), grid.len()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w >= 0.0) {
                return Err(DivergenceError::NegativeWeight(w, i));
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(DivergenceError::NotNormalized(sum));
        }
        Ok(DiscreteDistribution { grid, weights })
    }

    /// Normalize a nonnegative weight vector onto the grid.
    pub fn from_unnormalized(grid: Grid, mut weights: Vec<f64>) -> Result<Self, DivergenceError> {
        if weights.len() != grid.len() {
            return Err(DivergenceError::LengthMismatch(weights.len(), grid.len()));
        }
        let mut sum = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(DivergenceError::NegativeWeight(w, i));
            }
            sum += w;
        }
        if sum <= 0.0 {
            return Err(DivergenceError::NotNormalized(sum));
        }
        for w in weights.iter_mut() {
            *w /= sum;
        }
        Ok(DiscreteDistribution { grid, weights })
    }

    /// Discretize a nonnegative function by node mass `f(node) * step`.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Result<Self, DivergenceError> {
        let weights: Vec<f64> = grid.nodes().map(|x| f(x) * grid.step()).collect();
        Self::from_unnormalized(grid, weights)
    }

    /// Discretize the family member at location `theta`.
    pub fn from_density(
        family: &LocationFamily,
        theta: f64,
        grid: &Grid,
    ) -> Result<Self, DivergenceError> {
        let mut weights = Vec::with_capacity(grid.len());
        for x in grid.nodes() {
            weights.push(family.density(theta, x)? * grid.step());
        }
        Self::from_unnormalized(grid.clone(), weights)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Convex mixture `lambda * self + (1 - lambda) * other`.
    pub fn mixture(&self, other: &Self, lambda: f64) -> Result<Self, DivergenceError> {
        self.check_same_grid(other)?;
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        DiscreteDistribution::from_unnormalized(self.grid.clone(), weights)
    }

    fn check_same_grid(&self, other: &Self) -> Result<(), DivergenceError> {
        if self.grid != other.grid {
            return Err(DivergenceError::GridMismatch);
        }
        Ok(())
    }

    /// Kullback-Leibler divergence `sum_i p_i log(p_i / q_i)`, with the
    /// conventions `0 log(0/q) = 0` and `+inf` whenever `p` puts mass where
    /// `q` does not.
    pub fn kl(&self, other: &Self) -> Result<f64, DivergenceError> {
        self.check_same_grid(other)?;
        Ok(numerics::kl_slice(&self.weights, &other.weights))
    }

    /// Total variation distance in its half-l1 form.
    pub fn tv(&self, other: &Self) -> Result<f64, DivergenceError> {
        self.check_same_grid(other)?;
        Ok(numerics::tv_slice(&self.weights, &other.weights))
    }

    /// Mean of the node positions under the weights.
    pub fn mean(&self) -> f64 {
        self.grid
            .nodes()
            .zip(&self.weights)
            .map(|(x, w)| x * w)
            .sum()
    }
}

/// The Bhattacharyya exponent of the locations `-delta` and `+delta`:
/// `-log integral sqrt(g(xi - delta) g(xi + delta)) dxi`.
///
/// This equals the resolution of the uncorrupted problem; it is zero iff
/// `delta = 0` and strictly increasing in the separation.
pub fn bhattacharyya_exponent(
    family: &LocationFamily,
    delta: f64,
    grid: &Grid,
) -> Result<f64, DivergenceError> {
    if delta == 0.0 {
        return Ok(0.0);
    }
    // Laplace-type generators have log-density kinks at +-delta.
    let coefficient = integrate_with_breakpoints(
        |x| {
            let a = family.log_density0(x - delta).unwrap_or(f64::NEG_INFINITY);
            let b = family.log_density0(x + delta).unwrap_or(f64::NEG_INFINITY);
            (0.5 * (a + b)).exp()
        },
        grid,
        &[-delta, delta],
    )?;
    Ok(-coefficient.max(LOG_FLOOR).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_point(p0: f64) -> DiscreteDistribution {
        let grid = Grid::new(0.0, 1.0, 3).unwrap();
        DiscreteDistribution::new(grid, vec![p0, 1.0 - p0, 0.0]).unwrap()
    }

    #[test]
    fn kl_identical_is_zero() {
        let p = two_point(0.75);
        assert_eq!(p.kl(&p).unwrap(), 0.0);
    }

    #[test]
    fn kl_absolute_continuity_failure() {
        let p = two_point(1.0);
        let q = two_point(0.0);
        assert_eq!(p.kl(&q).unwrap(), f64::INFINITY);
    }

    #[test]
    fn kl_two_term_value() {
        let p = two_point(0.75);
        let q = two_point(0.5);
        let expect = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert_abs_diff_eq!(p.kl(&q).unwrap(), expect, epsilon = 1e-12);
        assert_abs_diff_eq!(p.kl(&q).unwrap(), 0.130812, epsilon = 1e-6);
    }

    #[test]
    fn tv_examples() {
        let p = two_point(0.7);
        let q = two_point(0.5);
        assert_eq!(p.tv(&p).unwrap(), 0.0);
        assert_abs_diff_eq!(p.tv(&q).unwrap(), 0.2, epsilon = 1e-14);
        assert_eq!(two_point(1.0).tv(&two_point(0.0)).unwrap(), 1.0);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let p = two_point(0.5);
        let other_grid = Grid::new(0.0, 2.0, 3).unwrap();
        let q = DiscreteDistribution::new(other_grid, vec![0.5, 0.5, 0.0]).unwrap();
        assert!(matches!(p.kl(&q), Err(DivergenceError::GridMismatch)));
        assert!(matches!(p.tv(&q), Err(DivergenceError::GridMismatch)));
    }

    #[test]
    fn bhattacharyya_normal_closed_form() {
        let family = LocationFamily::normal(1.0).unwrap();
        let grid = family.working_grid(4.0).unwrap();
        for delta in [0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0] {
            let v = bhattacharyya_exponent(&family, delta, &grid).unwrap();
            assert_abs_diff_eq!(v, delta * delta / 2.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn bhattacharyya_monotone_in_delta() {
        for family in [
            LocationFamily::normal(1.0).unwrap(),
            LocationFamily::logistic(1.0).unwrap(),
            LocationFamily::laplace(1.0).unwrap(),
        ] {
            let grid = family.working_grid(2.0).unwrap();
            let v1 = bhattacharyya_exponent(&family, 1.0, &grid).unwrap();
            let v2 = bhattacharyya_exponent(&family, 2.0, &grid).unwrap();
            assert!(v2 > v1 && v1 > 0.0, "{}: {v1} {v2}", family.name());
        }
    }

    #[test]
    fn discretization_matches_density_shape() {
        let family = LocationFamily::normal(1.0).unwrap();
        let grid = family.working_grid(0.0).unwrap();
        let d = DiscreteDistribution::from_density(&family, 0.7, &grid).unwrap();
        assert_abs_diff_eq!(d.mean(), 0.7, epsilon = 1e-9);
        let total: f64 = d.weights().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    fn arb_weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn gibbs_and_pinsker(p in arb_weights(6), q in arb_weights(6)) {
            let grid = Grid::new(0.0, 1.0, 6).unwrap();
            let dp = DiscreteDistribution::from_unnormalized(grid.clone(), p).unwrap();
            let dq = DiscreteDistribution::from_unnormalized(grid, q).unwrap();
            let kl = dp.kl(&dq).unwrap();
            let tv = dp.tv(&dq).unwrap();
            prop_assert!(kl >= -1e-12);
            prop_assert!(tv * tv <= kl / 2.0 + 1e-12, "pinsker: tv={tv}, kl={kl}");
        }

        #[test]
        fn tv_symmetric_triangle(p in arb_weights(5), q in arb_weights(5), r in arb_weights(5)) {
            let grid = Grid::new(0.0, 1.0, 5).unwrap();
            let dp = DiscreteDistribution::from_unnormalized(grid.clone(), p).unwrap();
            let dq = DiscreteDistribution::from_unnormalized(grid.clone(), q).unwrap();
            let dr = DiscreteDistribution::from_unnormalized(grid, r).unwrap();
            prop_assert!((dp.tv(&dq).unwrap() - dq.tv(&dp).unwrap()).abs() < 1e-14);
            prop_assert!(dp.tv(&dr).unwrap() <= dp.tv(&dq).unwrap() + dq.tv(&dr).unwrap() + 1e-12);
        }

        #[test]
        fn kl_jointly_convex(
            p1 in arb_weights(5), q1 in arb_weights(5),
            p2 in arb_weights(5), q2 in arb_weights(5),
            lambda in 0.05f64..0.95,
        ) {
            let grid = Grid::new(0.0, 1.0, 5).unwrap();
            let mk = |w: Vec<f64>| DiscreteDistribution::from_unnormalized(grid.clone(), w).unwrap();
            let (dp1, dq1, dp2, dq2) = (mk(p1), mk(q1), mk(p2), mk(q2));
            let pm = dp1.mixture(&dp2, lambda).unwrap();
            let qm = dq1.mixture(&dq2, lambda).unwrap();
            let lhs = pm.kl(&qm).unwrap();
            let rhs = lambda * dp1.kl(&dq1).unwrap() + (1.0 - lambda) * dp2.kl(&dq2).unwrap();
            prop_assert!(lhs <= rhs + 1e-9, "joint convexity: {lhs} > {rhs}");
        }
    }
}
