//! Least-favorable corruption pairs and the worst-case resolution function.
//!
//! For locations `-delta` and `+delta` and a corruption budget `alpha`, the
//! hardest pair of corrupted distributions `(q-, q+)` censors the likelihood
//! ratio `c(xi) = g(xi - delta) / g(xi + delta)` outside a band
//! `[c', 1/c']`: where the ratio is uninformative the adversary replaces both
//! densities by proportional mixtures, so that the censored ratio carries no
//! evidence there. The saturation constant `c'` is pinned by requiring both
//! TV budgets to be spent exactly:
//!
//! ```text
//! f_delta(c') = integral (c' g(xi + delta) - g(xi - delta))^+ dxi / (1 + c') = alpha.
//! ```
//!
//! The observed distribution hardest to attribute is the normalized geometric
//! mean `p* ∝ sqrt(q- q+)`, and the resolution (the smallest achievable KL
//! radius) is the Bhattacharyya-type overlap exponent
//! `-log integral sqrt(q- q+)`.
//!
//! When the two TV balls intersect (`f_delta(1) <= alpha`) no statistical
//! resolution is possible: the midpoint mixture `(P_{-delta} + P_{+delta})/2`
//! is feasible for both hypotheses and the resolution is zero. Setting
//! `c' = 1` in the censored construction reproduces exactly that mixture, so
//! a single formula covers both regimes.

use crate::divergences::{DiscreteDistribution, DivergenceError};
use crate::families::{FamilyError, LocationFamily};
use crate::numerics::{find_root, integrate_with_breakpoints, Grid, NumericsError, LOG_FLOOR, ROOT_TOL};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LfError {
    #[error("corruption level alpha must lie in [0, 1/2], got {0}")]
    DomainError(f64),
    #[error("separation delta must be nonnegative and finite, got {0}")]
    BadDelta(f64),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
}

/// Outcome of the saturation equation `f_delta(c') = alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CPrime {
    /// Unique solution in `[0, 1]`.
    Interior(f64),
    /// `f_delta(1) <= alpha`: the TV balls around the two hypotheses
    /// intersect and the resolution is zero.
    OverlapRegime,
}

/// The least-favorable pair at `(delta, alpha)` together with the worst-case
/// observed distribution and the resolution value.
#[derive(Debug, Clone)]
pub struct LeastFavorablePair {
    pub delta: f64,
    pub alpha: f64,
    /// Saturation constant; `1.0` in the overlap regime, where the censored
    /// construction degenerates to the midpoint mixture.
    pub c_prime: f64,
    pub overlap: bool,
    pub q_minus: DiscreteDistribution,
    pub q_plus: DiscreteDistribution,
    pub p_hat_star: DiscreteDistribution,
    /// Worst-case resolution `r^alpha(delta) = -log integral sqrt(q- q+)`.
    pub resolution: f64,
}

/// One point of a resolution curve.
#[derive(Debug, Clone, Copy)]
pub struct ResolutionPoint {
    pub delta: f64,
    pub resolution: f64,
    pub c_prime: f64,
    pub overlap: bool,
}

fn validate(delta: f64, alpha: f64) -> Result<(), LfError> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(LfError::BadDelta(delta));
    }
    if !(0.0..=0.5).contains(&alpha) {
        return Err(LfError::DomainError(alpha));
    }
    Ok(())
}

/// Budget spent by censoring at level `c`:
/// `f_delta(c) = integral (c g(xi + delta) - g(xi - delta))^+ dxi / (1 + c)`.
///
/// Nondecreasing and continuous in `c`, zero below the infimum of the
/// likelihood ratio. The integrand has a kink where the ratio crosses `c`;
/// the crossing is located by root finding and inserted as a quadrature node.
pub fn f_delta(
    family: &LocationFamily,
    delta: f64,
    c: f64,
    grid: &Grid,
) -> Result<f64, LfError> {
    if c <= 0.0 || delta == 0.0 {
        return Ok(0.0);
    }
    let mut breakpoints = vec![-delta, delta];
    if let Some(x) = ratio_crossing(family, delta, c.ln(), grid)? {
        breakpoints.push(x);
    }
    let value = integrate_with_breakpoints(
        |x| {
            let gp = family.density(-delta, x).unwrap_or(0.0);
            let gm = family.density(delta, x).unwrap_or(0.0);
            (c * gp - gm).max(0.0)
        },
        grid,
        &breakpoints,
    )?;
    Ok(value / (1.0 + c))
}

/// Location where `log g(xi - delta) - log g(xi + delta)` crosses `target`,
/// if the crossing lies inside the grid. The log-ratio is nondecreasing, so
/// bisection applies even across the flat stretches of Laplace-type
/// generators.
fn ratio_crossing(
    family: &LocationFamily,
    delta: f64,
    target: f64,
    grid: &Grid,
) -> Result<Option<f64>, LfError> {
    let f = |x: f64| family.log_ratio(delta, x).unwrap_or(f64::NAN) - target;
    let (lo, hi) = (grid.lo(), grid.hi());
    let (flo, fhi) = (f(lo), f(hi));
    if !flo.is_finite() || !fhi.is_finite() || flo.signum() == fhi.signum() {
        return Ok(None);
    }
    Ok(Some(find_root(f, lo, hi, 1e-12)?))
}

/// Solve the saturation equation for `c'`.
pub fn solve_c_prime(
    family: &LocationFamily,
    delta: f64,
    alpha: f64,
    grid: &Grid,
) -> Result<CPrime, LfError> {
    validate(delta, alpha)?;
    if alpha == 0.0 {
        // No censoring: the pair is the uncorrupted hypotheses themselves.
        if delta == 0.0 {
            return Ok(CPrime::OverlapRegime);
        }
        return Ok(CPrime::Interior(0.0));
    }
    if f_delta(family, delta, 1.0, grid)? <= alpha {
        return Ok(CPrime::OverlapRegime);
    }
    let c = find_root(
        |c| f_delta(family, delta, c, grid).unwrap_or(f64::NAN) - alpha,
        0.0,
        1.0,
        ROOT_TOL,
    )?;
    Ok(CPrime::Interior(c))
}

/// Censored density of the corrupted left hypothesis at `xi`.
fn q_minus_density(
    family: &LocationFamily,
    delta: f64,
    c_prime: f64,
    xi: f64,
) -> f64 {
    let gp = family.density(-delta, xi).unwrap_or(0.0);
    let gm = family.density(delta, xi).unwrap_or(0.0);
    if c_prime <= 0.0 {
        return gp;
    }
    let lr = family.log_ratio(delta, xi).unwrap_or(0.0);
    let k = c_prime.ln();
    if lr <= k {
        (gp + gm) / (1.0 + c_prime)
    } else if lr >= -k {
        c_prime * (gp + gm) / (1.0 + c_prime)
    } else {
        gp
    }
}

/// Censored density of the corrupted right hypothesis at `xi`; the mirror
/// image of `q_minus_density`.
fn q_plus_density(
    family: &LocationFamily,
    delta: f64,
    c_prime: f64,
    xi: f64,
) -> f64 {
    let gp = family.density(-delta, xi).unwrap_or(0.0);
    let gm = family.density(delta, xi).unwrap_or(0.0);
    if c_prime <= 0.0 {
        return gm;
    }
    let lr = family.log_ratio(delta, xi).unwrap_or(0.0);
    let k = c_prime.ln();
    if lr <= k {
        c_prime * (gp + gm) / (1.0 + c_prime)
    } else if lr >= -k {
        (gp + gm) / (1.0 + c_prime)
    } else {
        gm
    }
}

/// Build the least-favorable pair at `(delta, alpha)` on the given grid.
pub fn build_pair(
    family: &LocationFamily,
    delta: f64,
    alpha: f64,
    grid: &Grid,
) -> Result<LeastFavorablePair, LfError> {
    validate(delta, alpha)?;
    let (c_prime, overlap) = match solve_c_prime(family, delta, alpha, grid)? {
        CPrime::Interior(c) => (c, false),
        CPrime::OverlapRegime => (1.0, true),
    };

    // Quadrature nodes are augmented with the censoring switch points, where
    // the pair densities are only piecewise smooth, and with the log-density
    // kinks of Laplace-type generators.
    let mut breakpoints = vec![-delta, delta];
    if c_prime > 0.0 {
        for target in [c_prime.ln(), -c_prime.ln()] {
            if let Some(x) = ratio_crossing(family, delta, target, grid)? {
                breakpoints.push(x);
            }
        }
    }

    let overlap_coefficient = integrate_with_breakpoints(
        |x| {
            let a = q_minus_density(family, delta, c_prime, x);
            let b = q_plus_density(family, delta, c_prime, x);
            (a * b).sqrt()
        },
        grid,
        &breakpoints,
    )?;
    let resolution = if overlap {
        0.0
    } else {
        (-overlap_coefficient.max(LOG_FLOOR).ln()).max(0.0)
    };

    let q_minus = DiscreteDistribution::from_fn(grid.clone(), |x| {
        q_minus_density(family, delta, c_prime, x)
    })?;
    let q_plus = DiscreteDistribution::from_fn(grid.clone(), |x| {
        q_plus_density(family, delta, c_prime, x)
    })?;
    let p_hat_star = DiscreteDistribution::from_fn(grid.clone(), |x| {
        let a = q_minus_density(family, delta, c_prime, x);
        let b = q_plus_density(family, delta, c_prime, x);
        (a * b).sqrt()
    })?;

    Ok(LeastFavorablePair {
        delta,
        alpha,
        c_prime,
        overlap,
        q_minus,
        q_plus,
        p_hat_star,
        resolution,
    })
}

/// Evaluate the resolution pointwise over a nonnegative increasing list of
/// separations. Evaluation parallelizes over `deltas` with deterministic
/// output order.
pub fn resolution_curve(
    family: &LocationFamily,
    alpha: f64,
    deltas: &[f64],
    grid: &Grid,
) -> Result<Vec<ResolutionPoint>, LfError> {
    deltas
        .par_iter()
        .map(|&delta| {
            let pair = build_pair(family, delta, alpha, grid)?;
            Ok(ResolutionPoint {
                delta,
                resolution: pair.resolution,
                c_prime: pair.c_prime,
                overlap: pair.overlap,
            })
        })
        .collect()
}

/// Check that a sampled resolution curve is nondecreasing within `slack`.
/// Returns the index of the first violation, if any.
pub fn monotonicity_violation(curve: &[ResolutionPoint], slack: f64) -> Option<usize> {
    curve
        .windows(2)
        .position(|w| w[1].resolution < w[0].resolution - slack)
        .map(|i| i + 1)
}
