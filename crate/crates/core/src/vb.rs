//! Coordinate-ascent variational inference for the Bernoulli-Gaussian
//! Cholesky regressions, on fixed transformed data.
//!
//! The mean-field factors are `q(beta_d) = N(mu_d, Sigma_d)`,
//! `q(sigma_d^2) = IG(A + n/2, s_d)` and `q(gamma_kd) = Ber(w_kd)`.
//! Regressions only interact through the data, so every block is updated
//! independently.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cholesky::{scaled_probability, CholeskyFactors, PrecisionSample};
use crate::error::{Error, Result};
use crate::linalg;
use crate::stats::{expit, expit_saturated, logit, InvGamma};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VbSettings {
    pub zeta2: f64,
    /// Shape `A` of the inverse-gamma prior on the variances.
    pub a: f64,
    /// Rate `B` of the inverse-gamma prior on the variances.
    pub b: f64,
    /// Starting value of every `tau_d`.
    pub tau0: f64,
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for VbSettings {
    fn default() -> Self {
        Self { zeta2: 10.0, a: 0.01, b: 0.01, tau0: 1000.0, epsilon: 1e-6, max_iter: 1000 }
    }
}

impl VbSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.zeta2, self.a, self.b, self.tau0, self.epsilon];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::config("variational hyperparameters must be positive and finite"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// Variational factors of one regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFactors {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub w: DVector<f64>,
    pub s: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    /// One entry per column; the last has no coefficients.
    pub blocks: Vec<RegressionFactors>,
    pub rho_star: Vec<DVector<f64>>,
    pub settings: VbSettings,
    pub n: usize,
}

impl VariationalState {
    pub fn new(n: usize, rho_star: Vec<DVector<f64>>, w_init: Vec<DVector<f64>>, settings: VbSettings) -> Result<Self> {
        settings.validate()?;
        let p = rho_star.len();
        if w_init.len() != p || (0..p).any(|d| rho_star[d].len() != p - d - 1 || w_init[d].len() != p - d - 1) {
            return Err(Error::input("inclusion probabilities and indicators must match the regression layout"));
        }
        if rho_star.iter().flat_map(|r| r.iter()).any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(Error::config("inclusion probabilities must lie in (0, 1)"));
        }
        if w_init.iter().flat_map(|r| r.iter()).any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::config("initial indicators must lie in [0, 1]"));
        }
        let s0 = (2.0 * settings.a + n as f64) / (2.0 * settings.tau0);
        let blocks = w_init
            .into_iter()
            .map(|w| {
                let q = w.len();
                RegressionFactors {
                    mu: DVector::zeros(q),
                    sigma: DMatrix::identity(q, q) * settings.zeta2,
                    w,
                    s: s0,
                    tau: settings.tau0,
                }
            })
            .collect();
        Ok(Self { blocks, rho_star, settings, n })
    }

    pub fn dim(&self) -> usize {
        self.blocks.len()
    }

    pub fn w(&self) -> Vec<DVector<f64>> {
        self.blocks.iter().map(|b| b.w.clone()).collect()
    }
}

fn omega_d(w: &DVector<f64>) -> DMatrix<f64> {
    let mut m = w * w.transpose();
    for j in 0..w.len() {
        m[(j, j)] += w[j] * (1.0 - w[j]);
    }
    m
}

/// `B + E||Z_d - Z_{k>d} Gamma beta||^2 / 2` under the current factors.
fn s_value(g: &DMatrix<f64>, d: usize, f: &RegressionFactors, b: f64) -> f64 {
    let q = f.w.len();
    let gdd = g[(d, d)];
    if q == 0 {
        return b + 0.5 * gdd;
    }
    let gkk = g.view((d + 1, d + 1), (q, q));
    let gkd = g.view((d + 1, d), (q, 1)).column(0).into_owned();
    let h = gkk.component_mul(&omega_d(&f.w));
    let second = &f.mu * f.mu.transpose() + &f.sigma;
    let cross = gkd.component_mul(&f.w).dot(&f.mu);
    let trace = h.component_mul(&second).sum();
    b + 0.5 * (gdd - 2.0 * cross + trace)
}

/// One coordinate-ascent pass for regression `d`: `Sigma_d`, `mu_d`,
/// `s_d`, `tau_d`, then each `w_kd` in turn, then `s_d` and `tau_d` again
/// so the stored variance factor is optimal for the final indicators.
pub fn update_regression(
    g: &DMatrix<f64>,
    d: usize,
    n: usize,
    f: &mut RegressionFactors,
    rho: &DVector<f64>,
    settings: &VbSettings,
) -> Result<()> {
    let q = f.w.len();
    let shape2 = 2.0 * settings.a + n as f64;
    if q == 0 {
        f.s = s_value(g, d, f, settings.b);
        f.tau = shape2 / (2.0 * f.s);
        return Ok(());
    }
    let gkk = g.view((d + 1, d + 1), (q, q)).into_owned();
    let gkd = g.view((d + 1, d), (q, 1)).column(0).into_owned();

    let mut precision = gkk.component_mul(&omega_d(&f.w)) * f.tau;
    for j in 0..q {
        precision[(j, j)] += 1.0 / settings.zeta2;
    }
    let chol = linalg::cholesky(&precision, &format!("variational precision of regression {}", d + 1))?;
    f.sigma = linalg::symmetrize(&chol.inverse());
    f.mu = &f.sigma * gkd.component_mul(&f.w) * f.tau;
    f.s = s_value(g, d, f, settings.b);
    f.tau = shape2 / (2.0 * f.s);

    for k in 0..q {
        let mk = f.mu[k];
        let mut inner = mk * gkd[k];
        for l in (0..q).filter(|&l| l != k) {
            inner -= gkk[(k, l)] * f.w[l] * (f.mu[l] * mk + f.sigma[(l, k)]);
        }
        let eta = logit(rho[k]) - 0.5 * f.tau * (mk * mk + f.sigma[(k, k)]) * gkk[(k, k)] + f.tau * inner;
        f.w[k] = expit_saturated(eta);
    }
    f.s = s_value(g, d, f, settings.b);
    f.tau = shape2 / (2.0 * f.s);
    if !(f.s.is_finite() && f.s > 0.0) {
        return Err(Error::numerical(format!("variance factor of regression {} is {}", d + 1, f.s)));
    }
    Ok(())
}

/// `w log(rho / w) + (1 - w) log((1 - rho) / (1 - w))` with `0 log 0 = 0`.
pub fn bernoulli_kl_term(w: f64, rho: f64) -> f64 {
    let mut v = 0.0;
    if w > 0.0 {
        v += w * (rho / w).ln();
    }
    if w < 1.0 {
        v += (1.0 - w) * ((1.0 - rho) / (1.0 - w)).ln();
    }
    v
}

fn constant_terms(n: usize, settings: &VbSettings) -> f64 {
    let a = settings.a;
    let half_n = n as f64 / 2.0;
    -half_n * (2.0 * std::f64::consts::PI).ln() + a * settings.b.ln() - libm::lgamma(a) + libm::lgamma(a + half_n)
}

/// Lower-bound contribution of regression `d`, including its share of the
/// constant terms.
pub fn regression_vlb(n: usize, f: &RegressionFactors, rho: &DVector<f64>, settings: &VbSettings) -> Result<f64> {
    let q = f.w.len() as f64;
    let zeta2 = settings.zeta2;
    let mut v = constant_terms(n, settings) - (settings.a + n as f64 / 2.0) * f.s.ln();
    if f.w.is_empty() {
        return Ok(v);
    }
    let log_det = linalg::log_det_spd(&f.sigma, "variational covariance")?;
    v += q / 2.0 - q / 2.0 * zeta2.ln() + 0.5 * log_det
        - (f.mu.norm_squared() + f.sigma.trace()) / (2.0 * zeta2);
    v += f.w.iter().zip(rho.iter()).map(|(w, r)| bernoulli_kl_term(*w, *r)).sum::<f64>();
    Ok(v)
}

/// The variational lower bound of the whole model.
pub fn compute_vlb(state: &VariationalState) -> Result<f64> {
    state
        .blocks
        .iter()
        .zip(&state.rho_star)
        .map(|(f, rho)| regression_vlb(state.n, f, rho, &state.settings))
        .sum()
}

/// One pass over every regression and the last variance factor.
pub fn cavi_sweep(state: &mut VariationalState, z: &DMatrix<f64>) -> Result<()> {
    if z.ncols() != state.dim() || z.nrows() != state.n {
        return Err(Error::input("data shape differs from the variational state"));
    }
    let g = z.transpose() * z;
    let n = state.n;
    let settings = state.settings;
    state
        .blocks
        .par_iter_mut()
        .zip(state.rho_star.par_iter())
        .enumerate()
        .try_for_each(|(d, (f, rho))| update_regression(&g, d, n, f, rho, &settings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VbFit {
    pub state: VariationalState,
    /// Lower bound after each sweep.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Sweep until successive lower bounds differ by less than `epsilon`, or
/// `max_iter` sweeps have run (then `converged` is false).
pub fn vb_fit(z: &DMatrix<f64>, mut state: VariationalState) -> Result<VbFit> {
    let mut trace = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..state.settings.max_iter {
        cavi_sweep(&mut state, z)?;
        let vlb = compute_vlb(&state)?;
        if !vlb.is_finite() {
            return Err(Error::numerical("variational lower bound is not finite"));
        }
        trace.push(vlb);
        if (vlb - prev).abs() < state.settings.epsilon {
            return Ok(VbFit { state, trace, converged: true });
        }
        prev = vlb;
    }
    Ok(VbFit { state, trace, converged: false })
}

/// Independent draws of the precision matrix from the fitted factors.
pub fn vb_posterior_samples<R: Rng + ?Sized>(state: &VariationalState, n_samples: usize, rng: &mut R) -> Result<Vec<PrecisionSample>> {
    let p = state.dim();
    let shape = state.settings.a + state.n as f64 / 2.0;
    let chols = state
        .blocks
        .iter()
        .enumerate()
        .map(|(d, f)| {
            if f.w.is_empty() {
                Ok(None)
            } else {
                linalg::cholesky(&f.sigma, &format!("variational covariance of regression {}", d + 1)).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut factors = CholeskyFactors::identity(p);
        for (d, f) in state.blocks.iter().enumerate() {
            if let Some(chol) = &chols[d] {
                factors.beta[d] = linalg::sample_with_covariance(&f.mu, chol, rng);
                factors.gamma[d] = f.w.iter().map(|w| rng.random::<f64>() < *w).collect();
            }
            factors.sigma2[d] = InvGamma::new(shape, f.s).sample(rng);
        }
        out.push(PrecisionSample::from_factors(factors));
    }
    Ok(out)
}

/// Grid used when tuning the inclusion probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    pub c: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Alternations between grid search and CAVI.
    pub rounds: usize,
}

impl Default for TuningGrid {
    fn default() -> Self {
        Self { c: linspace(0.1, 10.0, 50), lambda: linspace(-15.0, 5.0, 50), rounds: 5 }
    }
}

pub fn linspace(lo: f64, hi: f64, len: usize) -> Vec<f64> {
    match len {
        0 => vec![],
        1 => vec![lo],
        _ => (0..len).map(|i| lo + (hi - lo) * i as f64 / (len - 1) as f64).collect(),
    }
}

/// Tuned inclusion probabilities and the indicators they produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedRho {
    pub rho_star: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    /// Selected `(c, lambda)` per regression.
    pub selected: Vec<(f64, f64)>,
}

fn rho_vector(base: f64, p: usize, d: usize, q: usize) -> DVector<f64> {
    DVector::from_iterator(q, (0..q).map(|j| scaled_probability(base, p, d + j + 2)))
}

fn run_block(g: &DMatrix<f64>, d: usize, n: usize, f: &mut RegressionFactors, rho: &DVector<f64>, settings: &VbSettings) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..settings.max_iter {
        update_regression(g, d, n, f, rho, settings)?;
        let v = regression_vlb(n, f, rho, settings)?;
        if (v - prev).abs() < settings.epsilon {
            break;
        }
        prev = v;
    }
    Ok(())
}

/// Choose `rho*_kd = expit(lambda) c / (p sqrt(k))` per regression.
///
/// Indicators are first fitted with `rho = expit(-sqrt(n)/2) / (p sqrt(k))`
/// starting from `w = 1`; then, alternately, the grid point maximizing the
/// lower bound at the current indicators is chosen and the indicators are
/// refitted under it, until the choice repeats.
pub fn tune_rho(z: &DMatrix<f64>, grid: &TuningGrid, settings: &VbSettings) -> Result<TunedRho> {
    settings.validate()?;
    if grid.c.is_empty() || grid.lambda.is_empty() {
        return Err(Error::config("tuning grid is empty"));
    }
    let (n, p) = z.shape();
    let g = z.transpose() * z;
    let fixed = expit(-0.5 * (n as f64).sqrt());
    let results: Vec<(DVector<f64>, DVector<f64>, (f64, f64))> = (0..p)
        .into_par_iter()
        .map(|d| {
            let q = p - d - 1;
            let mut f = RegressionFactors {
                mu: DVector::zeros(q),
                sigma: DMatrix::identity(q, q) * settings.zeta2,
                w: DVector::from_element(q, 1.0),
                s: (2.0 * settings.a + n as f64) / (2.0 * settings.tau0),
                tau: settings.tau0,
            };
            if q == 0 {
                return Ok((DVector::zeros(0), DVector::zeros(0), (f64::NAN, f64::NAN)));
            }
            run_block(&g, d, n, &mut f, &rho_vector(fixed, p, d, q), settings)?;
            let mut choice: Option<(usize, usize)> = None;
            let mut rho = DVector::zeros(q);
            for _ in 0..grid.rounds.max(1) {
                let mut best: Option<((usize, usize), f64)> = None;
                for (ci, c) in grid.c.iter().enumerate() {
                    for (li, l) in grid.lambda.iter().enumerate() {
                        let r = rho_vector(expit(*l) * c, p, d, q);
                        let kl: f64 = f.w.iter().zip(r.iter()).map(|(w, r)| bernoulli_kl_term(*w, *r)).sum();
                        if kl.is_finite() && best.is_none_or(|(_, b)| kl > b) {
                            best = Some(((ci, li), kl));
                        }
                    }
                }
                let Some((pick, _)) = best else {
                    return Err(Error::numerical(format!("no finite lower bound on the tuning grid for regression {}", d + 1)));
                };
                if choice == Some(pick) {
                    break;
                }
                choice = Some(pick);
                rho = rho_vector(expit(grid.lambda[pick.1]) * grid.c[pick.0], p, d, q);
                run_block(&g, d, n, &mut f, &rho, settings)?;
            }
            let (ci, li) = choice.expect("at least one round ran");
            Ok((rho, f.w, (grid.c[ci], grid.lambda[li])))
        })
        .collect::<Result<_>>()?;
    let mut out = TunedRho { rho_star: Vec::new(), w: Vec::new(), selected: Vec::new() };
    for (r, w, sel) in results {
        out.rho_star.push(r);
        out.w.push(w);
        out.selected.push(sel);
    }
    Ok(out)
}
