//! Shared numerical kernels: uniform grids, trapezoid quadrature, bracketed
//! root finding, and first-order optimization over the probability simplex
//! intersected with a total-variation ball.
//!
//! Everything here is pure and deterministic for fixed inputs. Downstream
//! solvers share one uniform grid so that quadrature and the discrete convex
//! programs see the same node set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Floor applied before taking logarithms of probability weights.
pub const LOG_FLOOR: f64 = 1e-300;

/// Default tolerance for scalar root finding.
pub const ROOT_TOL: f64 = 1e-10;

/// Default fixed-point tolerance of the projected-gradient solver.
pub const SOLVER_TOL: f64 = 1e-7;

/// Default iteration cap of the projected-gradient solver.
pub const SOLVER_MAX_ITER: usize = 100_000;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("invalid grid: lo={lo}, hi={hi}, n={n} (need lo < hi and n >= 3)")]
    BadGrid { lo: f64, hi: f64, n: usize },
    #[error("integrand is not finite at xi = {at}")]
    NonFiniteIntegrand { at: f64 },
    #[error("no sign change on bracket [{a}, {b}]: f(a)={fa}, f(b)={fb}")]
    NoRoot { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("function value is not finite at x = {at}")]
    NonFiniteValue { at: f64 },
    #[error("infeasible constraint set: {0}")]
    Infeasible(String),
    #[error(
        "solver did not converge: criterion {criterion:.3e} after {iterations} iterations \
         (objective {objective:.6e})"
    )]
    Unconverged {
        criterion: f64,
        objective: f64,
        iterations: usize,
        weights: Vec<f64>,
    },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

/// A uniform grid of `n` nodes on `[lo, hi]` with `node(i) = lo + i * step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lo: f64,
    hi: f64,
    n: usize,
    step: f64,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self, NumericsError> {
        if !(lo < hi) || n < 3 || !lo.is_finite() || !hi.is_finite() {
            return Err(NumericsError::BadGrid { lo, hi, n });
        }
        let step = (hi - lo) / (n - 1) as f64;
        Ok(Grid { lo, hi, n, step })
    }

    /// Grid on `[-half_span, half_span]`, as required by solvers that exploit
    /// the symmetry of the generator density.
    pub fn symmetric(half_span: f64, n: usize) -> Result<Self, NumericsError> {
        Self::new(-half_span, half_span, n)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        self.lo + i as f64 * self.step
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    pub fn is_symmetric(&self) -> bool {
        (self.lo + self.hi).abs() <= 1e-12 * self.hi.abs().max(1.0)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Index of the grid node closest to `x` (clamped to the range).
    pub fn nearest_node(&self, x: f64) -> usize {
        let raw = ((x - self.lo) / self.step).round();
        (raw.max(0.0) as usize).min(self.n - 1)
    }
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Composite trapezoid approximation of the integral of `f` over the grid.
///
/// Errors if `f` is non-finite at any node, which usually signals a bad
/// integrand or insufficient grid truncation.
pub fn integrate<F: Fn(f64) -> f64>(f: F, grid: &Grid) -> Result<f64, NumericsError> {
    let mut acc = 0.0;
    let mut prev = check_finite(f(grid.node(0)), grid.node(0))?;
    for i in 1..grid.len() {
        let x = grid.node(i);
        let fx = check_finite(f(x), x)?;
        acc += 0.5 * (prev + fx) * grid.step();
        prev = fx;
    }
    Ok(acc)
}

/// Trapezoid quadrature on the union of the grid nodes and additional
/// breakpoints inside the range.
///
/// Piecewise-smooth integrands (clipped densities, absolute values) keep the
/// composite O(step^2) accuracy only if their kinks land on quadrature nodes;
/// callers locate the kinks by root finding and pass them here.
pub fn integrate_with_breakpoints<F: Fn(f64) -> f64>(
    f: F,
    grid: &Grid,
    breakpoints: &[f64],
) -> Result<f64, NumericsError> {
    let mut extra: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > grid.lo() && *x < grid.hi())
        .collect();
    if extra.is_empty() {
        return integrate(f, grid);
    }
    extra.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut acc = 0.0;
    let mut x_prev = grid.node(0);
    let mut f_prev = check_finite(f(x_prev), x_prev)?;
    let mut bp = extra.iter().copied().peekable();
    for i in 1..grid.len() {
        let x_next = grid.node(i);
        while let Some(&b) = bp.peek() {
            if b >= x_next {
                break;
            }
            bp.next();
            if b > x_prev {
                let fb = check_finite(f(b), b)?;
                acc += 0.5 * (f_prev + fb) * (b - x_prev);
                x_prev = b;
                f_prev = fb;
            }
        }
        let fx = check_finite(f(x_next), x_next)?;
        acc += 0.5 * (f_prev + fx) * (x_next - x_prev);
        x_prev = x_next;
        f_prev = fx;
    }
    Ok(acc)
}

fn check_finite(v: f64, at: f64) -> Result<f64, NumericsError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(NumericsError::NonFiniteIntegrand { at })
    }
}

// ---------------------------------------------------------------------------
// Root finding
// ---------------------------------------------------------------------------

/// Bisection on a monotone function with a sign change over `[a, b]`.
///
/// Returns `x` with bracket width at most `tol` (or an exact zero when one is
/// hit). Bisection is deliberate: several of the functions we invert
/// (`f_delta`, clipped influence sums) have flat stretches where faster
/// methods stall or overshoot.
pub fn find_root<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, NumericsError> {
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let flo = f(lo);
    let fhi = f(hi);
    if !flo.is_finite() {
        return Err(NumericsError::NonFiniteValue { at: lo });
    }
    if !fhi.is_finite() {
        return Err(NumericsError::NonFiniteValue { at: hi });
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(NumericsError::NoRoot {
            a: lo,
            b: hi,
            fa: flo,
            fb: fhi,
        });
    }
    let sign_lo = flo.signum();
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if !fm.is_finite() {
            return Err(NumericsError::NonFiniteValue { at: mid });
        }
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    let mut out = Vec::with_capacity(n);
    out.extend(v.iter().map(|&vi| (vi - tau).max(0.0)));
    out
}

/// Euclidean projection onto the l1 ball of the given radius around `center`.
pub fn project_l1_ball(v: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    debug_assert_eq!(v.len(), center.len());
    let u: Vec<f64> = v.iter().zip(center).map(|(a, c)| a - c).collect();
    let norm: f64 = u.iter().map(|x| x.abs()).sum();
    if norm <= radius {
        return v.to_vec();
    }
    // Soft-threshold level from the sorted magnitudes.
    let mut mags: Vec<f64> = u.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &m) in mags.iter().enumerate() {
        cumsum += m;
        let t = (cumsum - radius) / (j + 1) as f64;
        if m > t {
            tau = t;
        }
    }
    u.iter()
        .zip(center)
        .map(|(&ui, &ci)| ci + ui.signum() * (ui.abs() - tau).max(0.0))
        .collect()
}

/// Feasible set of the discrete convex programs: the probability simplex
/// intersected with a total-variation ball (an l1 ball of radius
/// `2 * tv_radius`) around a reference weight vector.
#[derive(Debug, Clone)]
pub struct SimplexTvBall<'a> {
    pub center: &'a [f64],
    pub tv_radius: f64,
}

impl<'a> SimplexTvBall<'a> {
    pub fn new(center: &'a [f64], tv_radius: f64) -> Result<Self, NumericsError> {
        if tv_radius < 0.0 || !tv_radius.is_finite() {
            return Err(NumericsError::Infeasible(format!(
                "negative TV radius {tv_radius}"
            )));
        }
        Ok(SimplexTvBall { center, tv_radius })
    }

    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        let sum: f64 = x.iter().sum();
        let tv = 0.5
            * x.iter()
                .zip(self.center)
                .map(|(a, c)| (a - c).abs())
                .sum::<f64>();
        x.iter().all(|&v| v >= -slack) && (sum - 1.0).abs() <= slack && tv <= self.tv_radius + slack
    }

    /// Dykstra's alternating projection onto the intersection. Both component
    /// projections are exact, so the scheme converges to the true projection;
    /// we stop once the iterate is feasible to high accuracy and has
    /// stabilized.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let l1_radius = 2.0 * self.tv_radius;
        let mut x = v.to_vec();
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        let mut work = vec![0.0; n];
        for _ in 0..2000 {
            for i in 0..n {
                work[i] = x[i] + p[i];
            }
            let y = project_simplex(&work);
            for i in 0..n {
                p[i] = work[i] - y[i];
                work[i] = y[i] + q[i];
            }
            let z = project_l1_ball(&work, self.center, l1_radius);
            let mut shift = 0.0f64;
            for i in 0..n {
                q[i] = work[i] - z[i];
                shift = shift.max((z[i] - x[i]).abs());
            }
            x = z;
            if shift <= 1e-15 && self.contains(&x, 1e-12) {
                break;
            }
        }
        // The l1 projection may leave a marginally negative coordinate or a
        // sum off by rounding; snap to the simplex.
        for xi in x.iter_mut() {
            if *xi < 0.0 {
                *xi = 0.0;
            }
        }
        let s: f64 = x.iter().sum();
        if s > 0.0 {
            for xi in x.iter_mut() {
                *xi /= s;
            }
        }
        x
    }
}

// ---------------------------------------------------------------------------
// Projected-gradient solver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Fixed-point tolerance on the projected-gradient displacement.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: SOLVER_TOL,
            max_iter: SOLVER_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Final fixed-point criterion (projected-gradient displacement per unit
    /// step). At most `tol` on success.
    pub criterion: f64,
}

/// Maximize a smooth concave objective over `{simplex} ∩ {TV ball}` by
/// projected-gradient ascent with backtracking line search.
///
/// The iterate stays feasible throughout (each trial point is projected with
/// Dykstra's scheme), so the reported objective is always attained by the
/// reported weights. Convergence is certified by a fixed-point criterion: the
/// step-normalized displacement of the projected gradient map must fall below
/// `opts.tol`.
pub fn maximize_concave_on_simplex_tv_ball<F, G>(
    objective: F,
    gradient: G,
    set: &SimplexTvBall,
    start: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<SolverReport, NumericsError>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    let n = set.center.len();
    if set.tv_radius == 0.0 {
        let x = set.center.to_vec();
        let objective_value = objective(&x);
        return Ok(SolverReport {
            weights: x,
            objective: objective_value,
            iterations: 0,
            criterion: 0.0,
        });
    }

    let mut x = match start {
        Some(s) => {
            if s.len() != n {
                return Err(NumericsError::DimensionMismatch(s.len(), n));
            }
            if set.contains(s, 1e-12) {
                s.to_vec()
            } else {
                set.project(s)
            }
        }
        None => set.center.to_vec(),
    };

    let mut fx = objective(&x);
    if !fx.is_finite() {
        return Err(NumericsError::NonFiniteValue { at: f64::NAN });
    }
    let mut g = vec![0.0; n];
    let mut step = 1.0;
    let mut criterion = f64::INFINITY;
    let mut stagnant = 0usize;
    let mut iterations = 0usize;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        gradient(&x, &mut g);
        let mut trial_step = step;
        let mut accepted = false;
        let mut y = x.clone();
        let mut fy = fx;
        for _ in 0..60 {
            let candidate: Vec<f64> = x
                .iter()
                .zip(&g)
                .map(|(&xi, &gi)| xi + trial_step * gi)
                .collect();
            y = set.project(&candidate);
            fy = objective(&y);
            let gain: f64 = g
                .iter()
                .zip(y.iter().zip(&x))
                .map(|(gi, (yi, xi))| gi * (yi - xi))
                .sum();
            if fy.is_finite() && fy >= fx + 1e-4 * gain - 1e-15 * (1.0 + fx.abs()) {
                accepted = true;
                break;
            }
            trial_step *= 0.5;
            if trial_step < 1e-18 {
                break;
            }
        }
        if !accepted {
            // No ascent step survives the line search: the iterate is a fixed
            // point of the projected gradient map to working precision.
            criterion = 0.0;
            break;
        }
        let displacement: f64 = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        criterion = displacement / trial_step.max(1e-16);
        let df = (fy - fx).abs();
        x = y;
        fx = fy;
        step = (trial_step * 1.3).min(1e6);
        if criterion <= opts.tol {
            break;
        }
        if df <= 1e-15 * (1.0 + fx.abs()) {
            stagnant += 1;
            if stagnant >= 5 {
                criterion = criterion.min(opts.tol);
                break;
            }
        } else {
            stagnant = 0;
        }
        if iter + 1 == opts.max_iter {
            return Err(NumericsError::Unconverged {
                criterion,
                objective: fx,
                iterations: opts.max_iter,
                weights: x,
            });
        }
    }

    Ok(SolverReport {
        objective: fx,
        iterations,
        criterion,
        weights: x,
    })
}

// ---------------------------------------------------------------------------
// Exact dual solvers for the two KL projections used by the alternating
// almost-sure solver. Both programs have a water-filling optimum with two
// scalar dual variables (mass and TV price), found by nested bisection.
// ---------------------------------------------------------------------------

/// Minimize `KL(p, q)` over `q` in the simplex with `TV(q, center) <= alpha`.
///
/// Optimal weights have the form `q_i = p_i / clamp(p_i / center_i, c-, c+)`:
/// mass is removed where the likelihood ratio is small and added where it is
/// large, with the band `[c-, c+]` pinned by the mass and TV constraints.
pub fn min_kl_over_tv_ball(
    p: &[f64],
    center: &[f64],
    alpha: f64,
) -> Result<(Vec<f64>, f64), NumericsError> {
    let n = p.len();
    if center.len() != n {
        return Err(NumericsError::DimensionMismatch(n, center.len()));
    }
    if alpha < 0.0 {
        return Err(NumericsError::Infeasible(format!("alpha = {alpha}")));
    }
    let tv_pc = tv_slice(p, center);
    if tv_pc <= alpha {
        return Ok((p.to_vec(), 0.0));
    }
    if alpha == 0.0 {
        let q = center.to_vec();
        let v = kl_slice(p, &q);
        return Ok((q, v));
    }

    let mut max_ratio = 1.0f64;
    for i in 0..n {
        if center[i] > 0.0 && p[i] > 0.0 {
            max_ratio = max_ratio.max(p[i] / center[i]);
        }
    }

    let fill = |c_minus: f64, c_plus: f64, q: &mut [f64]| {
        for i in 0..n {
            q[i] = if p[i] == 0.0 {
                if c_minus > 0.0 {
                    0.0
                } else {
                    center[i]
                }
            } else {
                let r = if center[i] > 0.0 {
                    p[i] / center[i]
                } else {
                    f64::INFINITY
                };
                p[i] / r.clamp(c_minus, c_plus)
            };
        }
    };

    let solve_mass = |lambda: f64, q: &mut [f64]| {
        // Find the mass dual mu with sum(q) = 1; sum is decreasing in mu.
        let mut lo = -0.5 * lambda;
        let mut hi = 0.5 * lambda + max_ratio + 1.0;
        for _ in 0..80 {
            let mu = 0.5 * (lo + hi);
            fill((mu - 0.5 * lambda).max(0.0), mu + 0.5 * lambda, q);
            let s: f64 = q.iter().sum();
            if s > 1.0 {
                lo = mu;
            } else {
                hi = mu;
            }
            if (s - 1.0).abs() < 1e-14 {
                break;
            }
        }
        let mu = 0.5 * (lo + hi);
        fill((mu - 0.5 * lambda).max(0.0), mu + 0.5 * lambda, q);
    };

    let mut q = vec![0.0; n];
    // TV(q(lambda), center) decreases from TV(p, center) to 0; bracket then
    // bisect on the TV price.
    let mut lam_hi = 1.0;
    for _ in 0..80 {
        solve_mass(lam_hi, &mut q);
        if tv_slice(&q, center) <= alpha {
            break;
        }
        lam_hi *= 2.0;
    }
    let mut lam_lo = 0.0;
    for _ in 0..80 {
        let lam = 0.5 * (lam_lo + lam_hi);
        solve_mass(lam, &mut q);
        if tv_slice(&q, center) > alpha {
            lam_lo = lam;
        } else {
            lam_hi = lam;
        }
    }
    solve_mass(lam_hi, &mut q);
    let s: f64 = q.iter().sum();
    if s > 0.0 {
        for qi in q.iter_mut() {
            *qi /= s;
        }
    }
    let v = kl_slice(p, &q);
    Ok((q, v))
}

/// Minimize `sum_i p_i (ln p_i - w_i)` over `p` in the simplex with
/// `TV(p, center) <= alpha`, where `w` is a log-target (an unnormalized
/// log-density; `-inf` entries force `p_i = 0`).
///
/// This is the entropy projection used for the observed-distribution block of
/// the almost-sure program. The optimum clamps `center` between two
/// exponential tilts of the target: `p_i = clamp(center_i, e^{w_i+t}, e^{w_i+t+lam})`.
pub fn min_entropy_over_tv_ball(
    w: &[f64],
    center: &[f64],
    alpha: f64,
) -> Result<Vec<f64>, NumericsError> {
    let n = w.len();
    if center.len() != n {
        return Err(NumericsError::DimensionMismatch(n, center.len()));
    }
    if alpha < 0.0 {
        return Err(NumericsError::Infeasible(format!("alpha = {alpha}")));
    }
    let wmax = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !wmax.is_finite() {
        return Err(NumericsError::Infeasible(
            "log-target is identically -inf".into(),
        ));
    }
    // Unconstrained-in-TV optimum: softmax of the log-target.
    let mut sm: Vec<f64> = w.iter().map(|&wi| (wi - wmax).exp()).collect();
    let z: f64 = sm.iter().sum();
    for v in sm.iter_mut() {
        *v /= z;
    }
    if tv_slice(&sm, center) <= alpha {
        return Ok(sm);
    }
    if alpha == 0.0 {
        return Ok(center.to_vec());
    }

    let fill = |t: f64, lam: f64, p: &mut [f64]| {
        for i in 0..n {
            if w[i] == f64::NEG_INFINITY {
                p[i] = 0.0;
            } else {
                let lo = (w[i] - wmax + t).exp();
                let hi = (w[i] - wmax + t + lam).exp();
                p[i] = center[i].clamp(lo, hi);
            }
        }
    };

    let solve_mass = |lam: f64, p: &mut [f64]| {
        let mut lo = -800.0;
        let mut hi = 800.0;
        for _ in 0..90 {
            let t = 0.5 * (lo + hi);
            fill(t, lam, p);
            let s: f64 = p.iter().sum();
            if s < 1.0 {
                lo = t;
            } else {
                hi = t;
            }
            if (s - 1.0).abs() < 1e-14 {
                break;
            }
        }
        fill(0.5 * (lo + hi), lam, p);
    };

    let mut p = vec![0.0; n];
    let mut lam_hi = 1.0;
    for _ in 0..20 {
        solve_mass(lam_hi, &mut p);
        if tv_slice(&p, center) <= alpha {
            break;
        }
        lam_hi *= 2.0;
        if lam_hi > 3200.0 {
            break;
        }
    }
    let mut lam_lo = 0.0;
    for _ in 0..80 {
        let lam = 0.5 * (lam_lo + lam_hi);
        solve_mass(lam, &mut p);
        if tv_slice(&p, center) > alpha {
            lam_lo = lam;
        } else {
            lam_hi = lam;
        }
    }
    solve_mass(lam_hi, &mut p);
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        for pi in p.iter_mut() {
            *pi /= s;
        }
    }
    let achieved = tv_slice(&p, center);
    if achieved > alpha + 1e-7 {
        // The -inf entries force more mass off `center` than the ball allows.
        return Err(NumericsError::Infeasible(format!(
            "forced-zero mass exceeds the TV budget: best achievable TV {achieved:.3e} > {alpha:.3e}"
        )));
    }
    Ok(p)
}

pub(crate) fn tv_slice(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
}

pub(crate) fn kl_slice(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > LOG_FLOOR {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            acc += pi * (pi / qi).ln();
        }
    }
    acc
}
