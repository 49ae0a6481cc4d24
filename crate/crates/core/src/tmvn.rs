//! Exact Hamiltonian Monte Carlo for Gaussians truncated to polyhedra, and
//! the Gibbs updates for spline coefficients and the mean vector.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::spline::MonotoneSplineModel;

/// Gaussian `N(mean, cov)` restricted to `{x : R x + s > 0}`.
///
/// Sampling runs in whitened coordinates `x = mean + W u` with `W W' = cov`.
#[derive(Debug, Clone)]
pub struct TruncatedGaussian {
    pub mean: DVector<f64>,
    pub r: DMatrix<f64>,
    pub s: DVector<f64>,
    whiten: DMatrix<f64>,
}

impl TruncatedGaussian {
    pub fn new(mean: DVector<f64>, covariance: &DMatrix<f64>, r: DMatrix<f64>, s: DVector<f64>) -> Result<Self> {
        check_shapes(&mean, &r, &s)?;
        let chol = linalg::cholesky(&linalg::symmetrize(covariance), "truncated Gaussian covariance")?;
        Ok(Self { mean, r, s, whiten: chol.l() })
    }

    /// Same law given its precision matrix instead of its covariance.
    pub fn from_precision(mean: DVector<f64>, precision: &DMatrix<f64>, r: DMatrix<f64>, s: DVector<f64>) -> Result<Self> {
        check_shapes(&mean, &r, &s)?;
        let chol = linalg::cholesky(&linalg::symmetrize(precision), "truncated Gaussian precision")?;
        let k = mean.len();
        // P = L L'  =>  cov = L'^-1 L^-1, so W = L'^-1
        let whiten = chol
            .l()
            .transpose()
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .ok_or_else(|| Error::numerical("singular precision factor"))?;
        Ok(Self { mean, r, s, whiten })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.whiten * self.whiten.transpose()
    }

    /// Smallest value of `R x + s` (positive infinity with no constraints).
    pub fn min_slack(&self, x: &DVector<f64>) -> f64 {
        if self.r.nrows() == 0 {
            return f64::INFINITY;
        }
        (&self.r * x + &self.s).min()
    }

    pub fn is_feasible(&self, x: &DVector<f64>) -> bool {
        self.min_slack(x) > 0.0
    }
}

fn check_shapes(mean: &DVector<f64>, r: &DMatrix<f64>, s: &DVector<f64>) -> Result<()> {
    if r.nrows() != s.len() || (r.nrows() > 0 && r.ncols() != mean.len()) {
        return Err(Error::input("constraint shapes do not match the dimension"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmcSettings {
    pub travel_time: f64,
    pub max_bounces: usize,
}

impl Default for HmcSettings {
    fn default() -> Self {
        Self { travel_time: FRAC_PI_2, max_bounces: 10_000 }
    }
}

/// Per-trajectory diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmcTrace {
    pub bounces: usize,
    pub initial_energy: f64,
    /// Largest relative deviation of the Hamiltonian seen at any wall hit
    /// or at the end of the trajectory.
    pub max_energy_drift: f64,
}

const PHASE_TOL: f64 = 1e-12;
const RESTARTS: usize = 20;

pub fn sample_exact_hmc<R: Rng + ?Sized>(
    tg: &TruncatedGaussian,
    start: &DVector<f64>,
    settings: HmcSettings,
    rng: &mut R,
) -> Result<DVector<f64>> {
    sample_exact_hmc_traced(tg, start, settings, rng).map(|(x, _)| x)
}

/// One exact-HMC transition. Fails if `start` is not strictly feasible or
/// a trajectory exceeds the bounce cap.
pub fn sample_exact_hmc_traced<R: Rng + ?Sized>(
    tg: &TruncatedGaussian,
    start: &DVector<f64>,
    settings: HmcSettings,
    rng: &mut R,
) -> Result<(DVector<f64>, HmcTrace)> {
    if !(settings.travel_time > 0.0) {
        return Err(Error::config("travel time must be positive"));
    }
    if start.len() != tg.dim() {
        return Err(Error::input("start point has the wrong dimension"));
    }
    if !tg.is_feasible(start) {
        return Err(Error::input("exact HMC start point violates the constraints"));
    }
    let w = &tg.whiten;
    let u0 = w
        .clone()
        .lu()
        .solve(&(start - &tg.mean))
        .ok_or_else(|| Error::numerical("whitening matrix is singular"))?;
    // whitened constraints f_j' u + g_j > 0
    let f = &tg.r * w;
    let g = &tg.r * &tg.mean + &tg.s;
    let f_norm2: Vec<f64> = f.row_iter().map(|row| row.norm_squared()).collect();

    for _ in 0..RESTARTS {
        let velocity = linalg::standard_normal_vector(tg.dim(), rng);
        let (u, trace) = trajectory(&f, &g, &f_norm2, u0.clone(), velocity, settings)?;
        let x = &tg.mean + w * &u;
        if tg.is_feasible(&x) {
            return Ok((x, trace));
        }
        // landed on a wall to rounding; redraw the momentum
    }
    Err(Error::numerical("exact HMC repeatedly ended on a constraint boundary"))
}

fn trajectory(
    f: &DMatrix<f64>,
    g: &DVector<f64>,
    f_norm2: &[f64],
    mut b: DVector<f64>,
    mut a: DVector<f64>,
    settings: HmcSettings,
) -> Result<(DVector<f64>, HmcTrace)> {
    let energy = 0.5 * (a.norm_squared() + b.norm_squared());
    let mut drift: f64 = 0.0;
    let mut remaining = settings.travel_time;
    let mut last_wall: Option<usize> = None;
    let mut bounces = 0;
    loop {
        // u(t) = a sin t + b cos t, velocity a cos t - b sin t
        let fa = f * &a;
        let fb = f * &b;
        let mut hit: Option<(f64, usize)> = None;
        for j in 0..f.nrows() {
            let amp = fa[j].hypot(fb[j]);
            if amp <= g[j].abs() || amp == 0.0 {
                continue;
            }
            let phi = fa[j].atan2(fb[j]);
            let base = (-g[j] / amp).acos();
            for cand in [phi + base, phi - base] {
                let mut t = cand.rem_euclid(2.0 * PI);
                let min_t = if last_wall == Some(j) { 1e3 * PHASE_TOL } else { PHASE_TOL };
                if t < min_t {
                    t += 2.0 * PI;
                }
                // only count crossings where the slack is decreasing
                let rate = fa[j] * t.cos() - fb[j] * t.sin();
                if rate >= 0.0 {
                    continue;
                }
                if t < remaining && hit.is_none_or(|(best, _)| t < best) {
                    hit = Some((t, j));
                }
            }
        }
        match hit {
            None => {
                let (s, c) = remaining.sin_cos();
                let u = &a * s + &b * c;
                let v = &a * c - &b * s;
                let e = 0.5 * (u.norm_squared() + v.norm_squared());
                drift = drift.max(((e - energy) / energy.max(f64::MIN_POSITIVE)).abs());
                return Ok((u, HmcTrace { bounces, initial_energy: energy, max_energy_drift: drift }));
            }
            Some((t, j)) => {
                bounces += 1;
                if bounces > settings.max_bounces {
                    return Err(Error::numerical(format!(
                        "exact HMC exceeded {} wall hits in one trajectory",
                        settings.max_bounces
                    )));
                }
                let (s, c) = t.sin_cos();
                let u = &a * s + &b * c;
                let mut v = &a * c - &b * s;
                let fj = f.row(j).transpose();
                let alpha = fj.dot(&v) / f_norm2[j];
                v -= fj * (2.0 * alpha);
                let e = 0.5 * (u.norm_squared() + v.norm_squared());
                drift = drift.max(((e - energy) / energy.max(f64::MIN_POSITIVE)).abs());
                b = u;
                a = v;
                remaining -= t;
                last_wall = Some(j);
            }
        }
    }
}

/// The Gaussian pieces of the spline-coefficient conditional for one
/// variable.
///
/// The variable's spline values satisfy `y = H theta_bar + B* q` with
/// `H = B_bar + B* W`, and given the other columns each `y_i` is
/// `N(delta_i, lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsThetaProblem {
    pub b_bar: DMatrix<f64>,
    pub b_star: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub q: DVector<f64>,
    pub delta: DVector<f64>,
    pub lambda: f64,
}

impl GibbsThetaProblem {
    /// Assemble the problem for column `d` from the raw data column, the
    /// current spline values `y` of all columns, `mu` and `omega`.
    pub fn build(
        model: &MonotoneSplineModel,
        x_col: &[f64],
        y: &DMatrix<f64>,
        mu: &DVector<f64>,
        omega: &DMatrix<f64>,
        d: usize,
    ) -> Result<Self> {
        if x_col.len() != y.nrows() {
            return Err(Error::input("inconsistent shapes for the spline conditional"));
        }
        let design = model.basis.design_matrix(x_col)?;
        Self::from_design(model, &design, y, mu, omega, d)
    }

    /// As [`GibbsThetaProblem::build`], with the basis already evaluated at
    /// the data column.
    pub fn from_design(
        model: &MonotoneSplineModel,
        design: &DMatrix<f64>,
        y: &DMatrix<f64>,
        mu: &DVector<f64>,
        omega: &DMatrix<f64>,
        d: usize,
    ) -> Result<Self> {
        let (n, p) = y.shape();
        if design.nrows() != n || design.ncols() != model.num_basis() || omega.nrows() != p || mu.len() != p || d >= p {
            return Err(Error::input("inconsistent shapes for the spline conditional"));
        }
        let red = &model.reduced;
        let b_bar = design.select_columns(&red.free);
        let b_star = design.select_columns(&red.eliminated);
        let odd = omega[(d, d)];
        if !(odd > 0.0) {
            return Err(Error::not_pd("nonpositive diagonal in precision matrix"));
        }
        let mut delta = DVector::from_element(n, mu[d]);
        for k in (0..p).filter(|&k| k != d) {
            let coef = omega[(k, d)] / odd;
            if coef != 0.0 {
                for i in 0..n {
                    delta[i] -= coef * (y[(i, k)] - mu[k]);
                }
            }
        }
        Ok(Self { b_bar, b_star, w: red.w.clone(), q: red.q.clone(), delta, lambda: 1.0 / odd })
    }

    /// Problem with no observations: the conditional is the prior.
    pub fn empty(model: &MonotoneSplineModel) -> Self {
        let k = model.reduced.free.len();
        Self {
            b_bar: DMatrix::zeros(0, k),
            b_star: DMatrix::zeros(0, 2),
            w: model.reduced.w.clone(),
            q: model.reduced.q.clone(),
            delta: DVector::zeros(0),
            lambda: 1.0,
        }
    }

    /// Posterior precision `Psi^-1` and the linear term `Psi^-1 gamma`.
    pub fn natural_parameters(&self, model: &MonotoneSplineModel) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let red = &model.reduced;
        let gamma_bar_inv = linalg::spd_inverse(&red.gamma_bar, "reduced prior covariance")?;
        let h = &self.b_bar + &self.b_star * &self.w;
        let inv_lambda = 1.0 / self.lambda;
        let precision = h.transpose() * &h * inv_lambda + &gamma_bar_inv;
        let resid = &self.delta - &self.b_star * &self.q;
        let linear = &gamma_bar_inv * &red.xi_bar + h.transpose() * resid * inv_lambda;
        Ok((linalg::symmetrize(&precision), linear))
    }

    /// Mean `gamma` and covariance `Psi` of the untruncated conditional.
    pub fn moments(&self, model: &MonotoneSplineModel) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (precision, linear) = self.natural_parameters(model)?;
        let chol = linalg::cholesky(&precision, "spline conditional precision")?;
        let mean = chol.solve(&linear);
        Ok((mean, linalg::symmetrize(&chol.inverse())))
    }
}

/// Draw `theta_bar` from its truncated-normal conditional, starting the
/// exact-HMC trajectory at the current value.
pub fn gibbs_update_theta<R: Rng + ?Sized>(
    problem: &GibbsThetaProblem,
    model: &MonotoneSplineModel,
    current: &DVector<f64>,
    settings: HmcSettings,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let (precision, linear) = problem.natural_parameters(model)?;
    let chol = linalg::cholesky(&precision, "spline conditional precision")?;
    let mean = chol.solve(&linear);
    let tg = TruncatedGaussian::from_precision(
        mean,
        &precision,
        model.reduced.f_bar.clone(),
        model.reduced.g_bar.clone(),
    )?;
    sample_exact_hmc(&tg, current, settings, rng)
}

/// `mu ~ N(column means of y, Omega^-1 / n)`.
pub fn gibbs_update_mu<R: Rng + ?Sized>(y: &DMatrix<f64>, omega: &DMatrix<f64>, rng: &mut R) -> Result<DVector<f64>> {
    let n = y.nrows();
    if n == 0 {
        return Err(Error::input("mean update needs at least one observation"));
    }
    if omega.nrows() != y.ncols() {
        return Err(Error::input("precision matrix does not match the column count"));
    }
    let chol = linalg::cholesky(&(omega * n as f64), "precision matrix")?;
    Ok(linalg::sample_with_precision(&linalg::column_means(y), &chol, rng))
}
