//! Symmetric log-concave location families on the real line.
//!
//! A family is generated by a density `g` that is symmetric around the origin
//! and log-concave; the member at location `theta` has density
//! `g(. - theta)`. Log-concavity makes the likelihood ratio
//! `g(xi - delta) / g(xi + delta)` monotone in `xi`, which is what the
//! least-favorable construction and the Huber clipping rely on.
//!
//! Three analytic generators are built in (normal, logistic, Laplace) and
//! arbitrary tabulated generators can be loaded from a two-column
//! `xi,log_density` CSV on a symmetric node set.

use crate::numerics::{Grid, NumericsError};
use statrs::function::erf;
use std::f64::consts::PI;
use thiserror::Error;

/// Number of nodes of the default working grid.
pub const WORKING_GRID_NODES: usize = 4001;

/// Half-span margin beyond `delta_max`, in units of the family scale. The
/// slowest built-in tails are exponential (Laplace, logistic), for which
/// sixteen scales of margin keep the truncated mass below 1e-6; Gaussian
/// tails are far below that.
pub const WORKING_GRID_MARGIN_SCALES: f64 = 16.0;

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("custom table: {0}")]
    BadTable(String),
    #[error("xi = {xi} is outside the tabulated range [{lo}, {hi}]")]
    OutOfRange { xi: f64, lo: f64, hi: f64 },
    #[error("working grid does not fit: {0}")]
    GridTooWide(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Tabulated symmetric log-concave generator.
///
/// Construction renormalizes the density and symmetrizes it by averaging
/// `g(xi)` with `g(-xi)`; user tables rarely satisfy exact symmetry. Tables
/// with zero or non-finite density entries are rejected: the generator must
/// be strictly positive, and there is no principled extension of a compactly
/// supported table.
#[derive(Debug, Clone)]
pub struct CustomTable {
    xi: Vec<f64>,
    log_density: Vec<f64>,
    cum: Vec<f64>,
    scale: f64,
}

impl CustomTable {
    pub fn new(xi: Vec<f64>, log_density: Vec<f64>) -> Result<Self, FamilyError> {
        let n = xi.len();
        if n < 5 || log_density.len() != n {
            return Err(FamilyError::BadTable(format!(
                "need at least 5 rows with matching columns, got {} / {}",
                n,
                log_density.len()
            )));
        }
        for w in xi.windows(2) {
            if !(w[0] < w[1]) {
                return Err(FamilyError::BadTable(
                    "xi column must be strictly increasing".into(),
                ));
            }
        }
        let span = xi[n - 1].abs().max(xi[0].abs());
        for i in 0..n {
            if (xi[i] + xi[n - 1 - i]).abs() > 1e-9 * span.max(1.0) {
                return Err(FamilyError::BadTable(
                    "xi column must be symmetric around the origin".into(),
                ));
            }
            if !log_density[i].is_finite() {
                return Err(FamilyError::BadTable(
                    "log-density entries must be finite (zero densities are rejected)".into(),
                ));
            }
        }

        // Symmetrize in density space, then renormalize.
        let mut dens: Vec<f64> = (0..n)
            .map(|i| 0.5 * (log_density[i].exp() + log_density[n - 1 - i].exp()))
            .collect();
        let mut mass = 0.0;
        for i in 1..n {
            mass += 0.5 * (dens[i - 1] + dens[i]) * (xi[i] - xi[i - 1]);
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(FamilyError::BadTable(format!(
                "table mass {mass} is not positive and finite"
            )));
        }
        for d in dens.iter_mut() {
            *d /= mass;
        }
        let log_density: Vec<f64> = dens.iter().map(|d| d.ln()).collect();

        // Log-concavity: non-positive second differences (up to rounding).
        let tol = 1e-9;
        for i in 1..n - 1 {
            let d2 = log_density[i + 1] - 2.0 * log_density[i] + log_density[i - 1];
            if d2 > tol {
                return Err(FamilyError::BadTable(format!(
                    "log-density is not concave at xi = {} (second difference {d2:.3e})",
                    xi[i]
                )));
            }
        }

        let mut cum = vec![0.0; n];
        for i in 1..n {
            cum[i] = cum[i - 1] + 0.5 * (dens[i - 1] + dens[i]) * (xi[i] - xi[i - 1]);
        }
        let total = cum[n - 1];
        for c in cum.iter_mut() {
            *c /= total;
        }

        let mut second_moment = 0.0;
        for i in 1..n {
            let f0 = xi[i - 1] * xi[i - 1] * dens[i - 1];
            let f1 = xi[i] * xi[i] * dens[i];
            second_moment += 0.5 * (f0 + f1) * (xi[i] - xi[i - 1]);
        }
        let scale = second_moment.max(1e-12).sqrt();

        Ok(CustomTable {
            xi,
            log_density,
            cum,
            scale,
        })
    }

    /// Parse a two-column `xi,log_density` CSV. Blank lines, `#` comments and
    /// a non-numeric header row are skipped.
    pub fn from_csv_str(text: &str) -> Result<Self, FamilyError> {
        let mut xi = Vec::new();
        let mut logd = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let a = parts.next().unwrap_or("");
            let b = parts.next().unwrap_or("");
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(v)) => {
                    xi.push(x);
                    logd.push(v);
                }
                _ if lineno == 0 => continue, // header row
                _ => {
                    return Err(FamilyError::BadTable(format!(
                        "cannot parse line {}: {raw:?}",
                        lineno + 1
                    )))
                }
            }
        }
        CustomTable::new(xi, logd)
    }

    fn lookup(&self, xi: f64) -> Result<f64, FamilyError> {
        let n = self.xi.len();
        let (lo, hi) = (self.xi[0], self.xi[n - 1]);
        if xi < lo || xi > hi {
            return Err(FamilyError::OutOfRange { xi, lo, hi });
        }
        let idx = match self
            .xi
            .binary_search_by(|probe| probe.partial_cmp(&xi).unwrap())
        {
            Ok(i) => return Ok(self.log_density[i]),
            Err(i) => i,
        };
        let (i0, i1) = (idx - 1, idx);
        let t = (xi - self.xi[i0]) / (self.xi[i1] - self.xi[i0]);
        Ok(self.log_density[i0] * (1.0 - t) + self.log_density[i1] * t)
    }

    fn cdf0(&self, x: f64) -> f64 {
        let n = self.xi.len();
        if x <= self.xi[0] {
            return 0.0;
        }
        if x >= self.xi[n - 1] {
            return 1.0;
        }
        let idx = match self
            .xi
            .binary_search_by(|probe| probe.partial_cmp(&x).unwrap())
        {
            Ok(i) => return self.cum[i],
            Err(i) => i,
        };
        let (i0, i1) = (idx - 1, idx);
        let g0 = self.log_density[i0].exp();
        let gx = self.lookup(x).map(f64::exp).unwrap_or(g0);
        (self.cum[i0] + 0.5 * (g0 + gx) * (x - self.xi[i0])).min(self.cum[i1])
    }

    fn quantile0(&self, u: f64) -> f64 {
        let n = self.xi.len();
        let idx = self
            .cum
            .partition_point(|&c| c < u)
            .clamp(1, n - 1);
        let (c0, c1) = (self.cum[idx - 1], self.cum[idx]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.xi[idx - 1] + t * (self.xi[idx] - self.xi[idx - 1])
    }
}

/// A univariate symmetric log-concave location family.
#[derive(Debug, Clone)]
pub enum LocationFamily {
    Normal { sigma: f64 },
    Logistic { sigma: f64 },
    Laplace { sigma: f64 },
    Custom(CustomTable),
}

impl LocationFamily {
    pub fn normal(sigma: f64) -> Result<Self, FamilyError> {
        check_scale(sigma)?;
        Ok(LocationFamily::Normal { sigma })
    }

    pub fn logistic(sigma: f64) -> Result<Self, FamilyError> {
        check_scale(sigma)?;
        Ok(LocationFamily::Logistic { sigma })
    }

    pub fn laplace(sigma: f64) -> Result<Self, FamilyError> {
        check_scale(sigma)?;
        Ok(LocationFamily::Laplace { sigma })
    }

    pub fn custom(table: CustomTable) -> Self {
        LocationFamily::Custom(table)
    }

    pub fn name(&self) -> &'static str {
        match self {
            LocationFamily::Normal { .. } => "normal",
            LocationFamily::Logistic { .. } => "logistic",
            LocationFamily::Laplace { .. } => "laplace",
            LocationFamily::Custom(_) => "custom",
        }
    }

    /// Scale parameter of the generator (root second moment for tables).
    pub fn scale(&self) -> f64 {
        match self {
            LocationFamily::Normal { sigma }
            | LocationFamily::Logistic { sigma }
            | LocationFamily::Laplace { sigma } => *sigma,
            LocationFamily::Custom(t) => t.scale,
        }
    }

    /// Log of the generator density at the origin-centered argument.
    pub fn log_density0(&self, xi: f64) -> Result<f64, FamilyError> {
        match self {
            LocationFamily::Normal { sigma } => {
                let z = xi / sigma;
                Ok(-0.5 * z * z - (sigma * (2.0 * PI).sqrt()).ln())
            }
            LocationFamily::Logistic { sigma } => {
                // g(xi) = 1 / (4 sigma cosh^2(xi / (2 sigma)))
                let t = xi / (2.0 * sigma);
                Ok(-(4.0 * sigma).ln() - 2.0 * ln_cosh(t))
            }
            LocationFamily::Laplace { sigma } => Ok(-xi.abs() / sigma - (2.0 * sigma).ln()),
            LocationFamily::Custom(t) => t.lookup(xi),
        }
    }

    /// Density of the member at location `theta`, evaluated at `xi`:
    /// `g(xi - theta)`.
    pub fn density(&self, theta: f64, xi: f64) -> Result<f64, FamilyError> {
        Ok(self.log_density0(xi - theta)?.exp())
    }

    /// `log g(xi - delta) - log g(xi + delta)`; nondecreasing in `xi` by
    /// log-concavity and odd in `xi` by symmetry.
    pub fn log_ratio(&self, delta: f64, xi: f64) -> Result<f64, FamilyError> {
        if delta == 0.0 {
            return Ok(0.0);
        }
        Ok(self.log_density0(xi - delta)? - self.log_density0(xi + delta)?)
    }

    /// CDF of the member at location `theta`.
    pub fn cdf(&self, theta: f64, x: f64) -> Result<f64, FamilyError> {
        let z = x - theta;
        Ok(match self {
            LocationFamily::Normal { sigma } => {
                0.5 * erf::erfc(-z / (sigma * std::f64::consts::SQRT_2))
            }
            LocationFamily::Logistic { sigma } => 1.0 / (1.0 + (-z / sigma).exp()),
            LocationFamily::Laplace { sigma } => {
                if z < 0.0 {
                    0.5 * (z / sigma).exp()
                } else {
                    1.0 - 0.5 * (-z / sigma).exp()
                }
            }
            LocationFamily::Custom(t) => t.cdf0(z),
        })
    }

    /// Quantile of the origin-centered generator; inverse of `cdf(0, .)`.
    pub fn quantile(&self, u: f64) -> Result<f64, FamilyError> {
        if !(0.0..=1.0).contains(&u) {
            return Err(FamilyError::BadTable(format!("quantile level {u}")));
        }
        Ok(match self {
            LocationFamily::Normal { sigma } => {
                -sigma * std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * u)
            }
            LocationFamily::Logistic { sigma } => sigma * (u / (1.0 - u)).ln(),
            LocationFamily::Laplace { sigma } => {
                if u < 0.5 {
                    sigma * (2.0 * u).ln()
                } else {
                    -sigma * (2.0 * (1.0 - u)).ln()
                }
            }
            LocationFamily::Custom(t) => t.quantile0(u),
        })
    }

    /// Default symmetric working grid for computations that shift the
    /// generator by at most `delta_max`.
    pub fn working_grid(&self, delta_max: f64) -> Result<Grid, FamilyError> {
        self.working_grid_with_nodes(delta_max, WORKING_GRID_NODES)
    }

    pub fn working_grid_with_nodes(
        &self,
        delta_max: f64,
        nodes: usize,
    ) -> Result<Grid, FamilyError> {
        let half_span = match self {
            LocationFamily::Custom(t) => {
                let table_hi = *t.xi.last().unwrap();
                let s = table_hi - delta_max;
                if s <= 0.0 {
                    return Err(FamilyError::GridTooWide(format!(
                        "table covers [{}, {}] but shifts up to {delta_max} are required",
                        t.xi[0], table_hi
                    )));
                }
                s
            }
            _ => delta_max + WORKING_GRID_MARGIN_SCALES * self.scale(),
        };
        Ok(Grid::symmetric(half_span, nodes)?)
    }
}

fn check_scale(sigma: f64) -> Result<(), FamilyError> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(FamilyError::BadScale(sigma))
    }
}

/// Numerically stable `ln(cosh(t))`.
fn ln_cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate;
    use approx::assert_abs_diff_eq;

    fn families() -> Vec<LocationFamily> {
        vec![
            LocationFamily::normal(1.0).unwrap(),
            LocationFamily::normal(2.5).unwrap(),
            LocationFamily::logistic(1.0).unwrap(),
            LocationFamily::laplace(1.0).unwrap(),
        ]
    }

    #[test]
    fn normal_mode_value() {
        let f = LocationFamily::normal(1.0).unwrap();
        assert_abs_diff_eq!(
            f.density(0.0, 0.0).unwrap(),
            1.0 / (2.0 * PI).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn laplace_density_at_one() {
        let f = LocationFamily::laplace(1.0).unwrap();
        assert_abs_diff_eq!(
            f.density(0.0, 1.0).unwrap(),
            (-1.0f64).exp() / 2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn translation_identity() {
        for f in families() {
            for (t, xi) in [(0.7, -1.3), (-2.0, 0.4), (5.0, 2.0), (0.0, 0.3)] {
                // exact: both sides evaluate the generator at the same float
                assert_eq!(
                    f.density(t, xi).unwrap(),
                    f.density(0.0, xi - t).unwrap(),
                    "translation identity failed for {}",
                    f.name()
                );
            }
        }
    }

    #[test]
    fn densities_are_symmetric_and_normalized() {
        for f in families() {
            let grid = f.working_grid(0.0).unwrap();
            for i in 0..50 {
                let x = grid.lo() + (i as f64) * (grid.hi() - grid.lo()) / 49.0;
                let a = f.density(0.0, x).unwrap();
                let b = f.density(0.0, -x).unwrap();
                assert!((a - b).abs() <= 1e-14 * a.max(1.0), "{}: {a} vs {b}", f.name());
            }
            let mass = integrate(|x| f.density(0.0, x).unwrap(), &grid).unwrap();
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn normal_log_ratio_closed_form() {
        for sigma in [0.5, 1.0, 2.0] {
            let f = LocationFamily::normal(sigma).unwrap();
            for delta in [0.3, 1.0, 2.4] {
                for xi in [-3.0, -0.2, 0.0, 1.7] {
                    assert_abs_diff_eq!(
                        f.log_ratio(delta, xi).unwrap(),
                        2.0 * delta * xi / (sigma * sigma),
                        epsilon = 1e-10
                    );
                }
            }
        }
    }

    #[test]
    fn log_ratio_zero_cases() {
        for f in families() {
            assert_eq!(f.log_ratio(0.0, 1.3).unwrap(), 0.0);
            assert_abs_diff_eq!(f.log_ratio(1.1, 0.0).unwrap(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn log_ratio_monotone_and_odd() {
        for f in families() {
            let delta = 0.8;
            let mut prev = f64::NEG_INFINITY;
            for i in 0..200 {
                let xi = -6.0 + 12.0 * (i as f64) / 199.0;
                let v = f.log_ratio(delta, xi).unwrap();
                assert!(v >= prev - 1e-12, "{} not nondecreasing at {xi}", f.name());
                prev = v;
                let odd = f.log_ratio(delta, -xi).unwrap();
                assert_abs_diff_eq!(odd, -v, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cdf_examples() {
        for f in families() {
            assert_abs_diff_eq!(f.cdf(0.0, 0.0).unwrap(), 0.5, epsilon = 1e-12);
        }
        let n = LocationFamily::normal(1.0).unwrap();
        assert_abs_diff_eq!(n.cdf(0.0, 1.2815515).unwrap(), 0.9, epsilon = 1e-6);
        let l = LocationFamily::laplace(1.0).unwrap();
        assert_abs_diff_eq!(l.cdf(0.0, 2f64.ln()).unwrap(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for f in families() {
            for u in [0.01, 0.1, 0.5, 0.77, 0.99] {
                let x = f.quantile(u).unwrap();
                assert_abs_diff_eq!(f.cdf(0.0, x).unwrap(), u, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn custom_table_round_trip() {
        let n = 801;
        let base = LocationFamily::normal(1.0).unwrap();
        let xi: Vec<f64> = (0..n).map(|i| -8.0 + 16.0 * i as f64 / (n - 1) as f64).collect();
        let logd: Vec<f64> = xi.iter().map(|&x| base.log_density0(x).unwrap()).collect();
        let table = CustomTable::new(xi, logd).unwrap();
        let f = LocationFamily::custom(table);
        assert_abs_diff_eq!(f.density(0.0, 0.4).unwrap(), base.density(0.0, 0.4).unwrap(), epsilon = 1e-4);
        assert_abs_diff_eq!(f.cdf(0.0, 0.0).unwrap(), 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(f.cdf(0.0, 1.0).unwrap(), base.cdf(0.0, 1.0).unwrap(), epsilon = 1e-4);
        assert_abs_diff_eq!(f.scale(), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn custom_table_rejects_bad_input() {
        // non-finite log density (a zero density)
        let xi = vec![-2.0, -1.0, 0.0, 1.0, 2.0];
        let mut logd = vec![-2.0, -1.0, -0.5, -1.0, -2.0];
        logd[0] = f64::NEG_INFINITY;
        assert!(CustomTable::new(xi.clone(), logd).is_err());
        // asymmetric node set
        let bad_xi = vec![-2.0, -1.0, 0.0, 1.0, 3.0];
        assert!(CustomTable::new(bad_xi, vec![-2.0, -1.0, -0.5, -1.0, -2.0]).is_err());
        // log-density with a convex dip (bimodal)
        let logd_bimodal = vec![-2.0, -0.5, -3.0, -0.5, -2.0];
        assert!(CustomTable::new(xi, logd_bimodal).is_err());
    }

    #[test]
    fn custom_csv_parsing() {
        let base = LocationFamily::logistic(1.0).unwrap();
        let mut text = String::from("xi,log_density\n# comment\n");
        let n = 401;
        for i in 0..n {
            let x = -10.0 + 20.0 * i as f64 / (n - 1) as f64;
            text.push_str(&format!("{x},{}\n", base.log_density0(x).unwrap()));
        }
        let f = LocationFamily::custom(CustomTable::from_csv_str(&text).unwrap());
        assert_abs_diff_eq!(
            f.density(0.0, 1.0).unwrap(),
            base.density(0.0, 1.0).unwrap(),
            epsilon = 1e-4
        );
    }

    #[test]
    fn working_grid_symmetric() {
        let f = LocationFamily::normal(1.0).unwrap();
        let g = f.working_grid(2.0).unwrap();
        assert!(g.is_symmetric());
        assert_abs_diff_eq!(g.hi(), 2.0 + WORKING_GRID_MARGIN_SCALES, epsilon = 1e-12);
        assert_eq!(g.len(), WORKING_GRID_NODES);
    }
}
