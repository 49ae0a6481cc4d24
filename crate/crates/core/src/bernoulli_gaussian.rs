//! Gibbs sampler for the Cholesky regressions under a Bernoulli-Gaussian
//! prior: `beta_kd ~ N(0, zeta^2)` enters the likelihood as
//! `gamma_kd beta_kd` with `gamma_kd ~ Ber(rho*_kd)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cholesky::CholeskyFactors;
use crate::error::{Error, Result};
use crate::horseshoe::{last_sigma2_conditional, SIGMA_PRIOR};
use crate::regression::{block_seeds, sample_gaussian_augmented, sample_gaussian_dense, Gram, RegressionSweep};
use crate::stats::{expit_saturated, logit, seeded_rng, InvGamma};

/// Default slab variance.
pub const DEFAULT_ZETA2: f64 = 10.0;

/// Which other predictors are subtracted from the response in the
/// indicator update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaResidual {
    /// All active predictors except `k`: the exact full conditional.
    #[default]
    Full,
    /// Only the predictors after `k`, as the update is often written. This
    /// is not the conditional of the joint posterior and over-includes.
    LaterOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliGaussianState {
    pub beta: Vec<DVector<f64>>,
    pub gamma: Vec<Vec<bool>>,
    pub sigma2: DVector<f64>,
    pub zeta2: f64,
    pub rho_star: Vec<DVector<f64>>,
    #[serde(default)]
    pub residual: GammaResidual,
}

impl BernoulliGaussianState {
    pub fn new(start: &CholeskyFactors, rho_star: Vec<DVector<f64>>, zeta2: f64) -> Result<Self> {
        start.validate()?;
        let p = start.dim();
        if rho_star.len() != p || (0..p).any(|d| rho_star[d].len() != p - d - 1) {
            return Err(Error::input("inclusion probabilities must match the regression layout"));
        }
        if rho_star.iter().flat_map(|r| r.iter()).any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(Error::config("inclusion probabilities must lie in (0, 1)"));
        }
        if !(zeta2 > 0.0 && zeta2.is_finite()) {
            return Err(Error::config("slab variance must be positive"));
        }
        Ok(Self {
            beta: start.beta.clone(),
            gamma: start.gamma.clone(),
            sigma2: start.sigma2.clone(),
            zeta2,
            rho_star,
            residual: GammaResidual::Full,
        })
    }

    pub fn with_residual(mut self, residual: GammaResidual) -> Self {
        self.residual = residual;
        self
    }

    pub fn dim(&self) -> usize {
        self.sigma2.len()
    }
}

/// Linear predictor of the `gamma_k` conditional.
#[allow(clippy::too_many_arguments)]
pub fn gamma_logit(
    gram: &Gram,
    d: usize,
    j: usize,
    beta: &DVector<f64>,
    gamma: &[bool],
    rho: f64,
    sigma2: f64,
    residual: GammaResidual,
) -> f64 {
    let k = d + 1 + j;
    let bk = beta[j];
    let mut cross = gram.g[(k, d)];
    let first = match residual {
        GammaResidual::Full => 0,
        GammaResidual::LaterOnly => j + 1,
    };
    for l in first..beta.len() {
        if l != j && gamma[l] {
            cross -= gram.g[(k, d + 1 + l)] * beta[l];
        }
    }
    logit(rho) - gram.g[(k, k)] * bk * bk / (2.0 * sigma2) + bk * cross / sigma2
}

/// `IG(n/2 + 0.01, ||Z_d - Z Gamma beta||^2 / 2 + 0.01)`.
pub fn sigma2_conditional(residual_ss: f64, n: usize) -> InvGamma {
    InvGamma::new(n as f64 / 2.0 + SIGMA_PRIOR, 0.5 * residual_ss + SIGMA_PRIOR)
}

fn masked(beta: &DVector<f64>, gamma: &[bool]) -> DVector<f64> {
    DVector::from_iterator(beta.len(), beta.iter().zip(gamma).map(|(b, g)| if *g { *b } else { 0.0 }))
}

/// Draw `beta_{k>d}` given the indicators: precision
/// `Gamma Z'Z Gamma / sigma^2 + I / zeta^2`.
pub fn sample_beta<R: Rng + ?Sized>(
    gram: &Gram,
    d: usize,
    gamma: &[bool],
    sigma2: f64,
    zeta2: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let q = gamma.len();
    let n = gram.n();
    let dvar = DVector::from_element(q, zeta2);
    let mask = DVector::from_iterator(q, gamma.iter().map(|g| if *g { 1.0 } else { 0.0 }));
    if q > n {
        let sigma = sigma2.sqrt();
        let mut phi = gram.design(d) / sigma;
        for (j, m) in mask.iter().enumerate() {
            if *m == 0.0 {
                phi.column_mut(j).fill(0.0);
            }
        }
        let alpha = gram.z.column(d).into_owned() / sigma;
        sample_gaussian_augmented(&phi, &dvar, &alpha, rng)
    } else {
        let mut g = gram.predictors(d) / sigma2;
        for r in 0..q {
            for c in 0..q {
                g[(r, c)] *= mask[r] * mask[c];
            }
        }
        let cross = gram.cross(d).component_mul(&mask) / sigma2;
        sample_gaussian_dense(&g, &cross, &dvar, rng)
    }
}

struct Block {
    beta: DVector<f64>,
    gamma: Vec<bool>,
    sigma2: f64,
}

fn block_update<R: Rng + ?Sized>(state: &BernoulliGaussianState, gram: &Gram, d: usize, rng: &mut R) -> Result<Block> {
    let sigma2 = state.sigma2[d];
    let beta = sample_beta(gram, d, &state.gamma[d], sigma2, state.zeta2, rng)?;
    let mut gamma = state.gamma[d].clone();
    for j in 0..gamma.len() {
        let eta = gamma_logit(gram, d, j, &beta, &gamma, state.rho_star[d][j], sigma2, state.residual);
        gamma[j] = rng.random::<f64>() < expit_saturated(eta);
    }
    let rss = gram.residual_ss(d, &masked(&beta, &gamma));
    let law = sigma2_conditional(rss, gram.n());
    let sigma2 = law.sample(rng);
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::numerical(format!("sigma^2 draw {sigma2} in regression {d}")));
    }
    Ok(Block { beta, gamma, sigma2 })
}

/// One pass over regressions `d = 1..p-1` followed by the last variance.
pub fn bg_sweep<R: Rng + ?Sized>(state: &mut BernoulliGaussianState, z: &DMatrix<f64>, rng: &mut R) -> Result<()> {
    let p = state.dim();
    if z.ncols() != p {
        return Err(Error::input("data column count differs from the sampler dimension"));
    }
    let gram = Gram::new(z);
    let seeds = block_seeds(p.saturating_sub(1), rng);
    let blocks: Vec<Block> = {
        let snapshot = &*state;
        seeds
            .par_iter()
            .enumerate()
            .map(|(d, seed)| block_update(snapshot, &gram, d, &mut seeded_rng(*seed)))
            .collect::<Result<_>>()?
    };
    for (d, blk) in blocks.into_iter().enumerate() {
        state.beta[d] = blk.beta;
        state.gamma[d] = blk.gamma;
        state.sigma2[d] = blk.sigma2;
    }
    let last: Vec<f64> = z.column(p - 1).iter().copied().collect();
    state.sigma2[p - 1] = last_sigma2_conditional(&last).sample(rng);
    Ok(())
}

impl RegressionSweep for BernoulliGaussianState {
    fn sweep<R: Rng + ?Sized>(&mut self, z: &DMatrix<f64>, rng: &mut R) -> Result<()> {
        bg_sweep(self, z, rng)
    }

    fn factors(&self) -> CholeskyFactors {
        CholeskyFactors { beta: self.beta.clone(), gamma: self.gamma.clone(), sigma2: self.sigma2.clone() }
    }
}
