//! Gibbs sampler for the Cholesky regressions under a horseshoe prior with
//! the `sqrt(k)`-scaled global-local variance
//! `sigma_d^2 b_kd c^2 lambda_d^2 / (p^2 k)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cholesky::CholeskyFactors;
use crate::error::{Error, Result};
use crate::regression::{block_seeds, row_index, sample_gaussian_augmented, sample_gaussian_dense, Gram, RegressionSweep};
use crate::stats::{seeded_rng, InvGamma};

/// Shape and rate of the inverse-gamma prior on every `sigma_d^2`.
pub const SIGMA_PRIOR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorseshoeState {
    pub beta: Vec<DVector<f64>>,
    pub lambda2: DVector<f64>,
    pub a: DVector<f64>,
    pub b: Vec<DVector<f64>>,
    pub h: Vec<DVector<f64>>,
    pub sigma2: DVector<f64>,
    pub c: f64,
}

impl HorseshoeState {
    /// Coefficients and variances from `start`, every hyperparameter 1.
    pub fn new(start: &CholeskyFactors, c: f64) -> Result<Self> {
        start.validate()?;
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::config(format!("sparsity constant must be positive, got {c}")));
        }
        let p = start.dim();
        let ones = |d: usize| DVector::from_element(p - d - 1, 1.0);
        Ok(Self {
            beta: start.beta.clone(),
            lambda2: DVector::from_element(p, 1.0),
            a: DVector::from_element(p, 1.0),
            b: (0..p).map(ones).collect(),
            h: (0..p).map(ones).collect(),
            sigma2: start.sigma2.clone(),
            c,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma2.len()
    }
}

/// `p^2 k / (lambda^2 b_k c^2)` for each coefficient of regression `d`.
pub fn prior_precision_factors(b: &DVector<f64>, lambda2: f64, c: f64, p: usize, d: usize) -> DVector<f64> {
    let p2 = (p * p) as f64;
    DVector::from_iterator(
        b.len(),
        b.iter().enumerate().map(|(j, bk)| p2 * row_index(d, j) as f64 / (lambda2 * bk * c * c)),
    )
}

fn weighted_square(beta: &DVector<f64>, weights: &DVector<f64>) -> f64 {
    beta.iter().zip(weights.iter()).map(|(b, w)| b * b * w).sum()
}

pub fn lambda2_conditional(beta: &DVector<f64>, b: &DVector<f64>, sigma2: f64, a: f64, c: f64, p: usize, d: usize) -> InvGamma {
    let q = beta.len() as f64;
    // p^2 k / (sigma^2 b c^2) = lambda^2 * prior factor / sigma^2, with lambda^2 = 1
    let w = prior_precision_factors(b, 1.0, c, p, d) / sigma2;
    InvGamma::new(q / 2.0 + 0.5, 0.5 * weighted_square(beta, &w) + 1.0 / a)
}

pub fn a_conditional(lambda2: f64) -> InvGamma {
    InvGamma::new(1.0, 1.0 / lambda2 + 1.0)
}

/// `k` is the 1-based row index of the coefficient.
pub fn b_conditional(beta: f64, k: usize, sigma2: f64, lambda2: f64, h: f64, c: f64, p: usize) -> InvGamma {
    let p2 = (p * p) as f64;
    InvGamma::new(1.0, k as f64 * beta * beta * p2 / (2.0 * sigma2 * lambda2 * c * c) + 1.0 / h)
}

pub fn h_conditional(b: f64) -> InvGamma {
    InvGamma::new(1.0, 1.0 / b + 1.0)
}

#[allow(clippy::too_many_arguments)]
pub fn sigma2_conditional(
    residual_ss: f64,
    beta: &DVector<f64>,
    b: &DVector<f64>,
    lambda2: f64,
    c: f64,
    p: usize,
    d: usize,
    n: usize,
) -> InvGamma {
    let q = beta.len() as f64;
    let w = prior_precision_factors(b, lambda2, c, p, d);
    InvGamma::new(
        (n as f64 + q) / 2.0 + SIGMA_PRIOR,
        0.5 * residual_ss + 0.5 * weighted_square(beta, &w) + SIGMA_PRIOR,
    )
}

/// Conditional of the last column's variance, which has no regressors.
pub fn last_sigma2_conditional(z_last: &[f64]) -> InvGamma {
    let ss: f64 = z_last.iter().map(|v| v * v).sum();
    InvGamma::new(z_last.len() as f64 / 2.0 + SIGMA_PRIOR, 0.5 * ss + SIGMA_PRIOR)
}

struct Block {
    beta: DVector<f64>,
    lambda2: f64,
    a: f64,
    b: DVector<f64>,
    h: DVector<f64>,
    sigma2: f64,
}

fn sample<R: Rng + ?Sized>(law: InvGamma, rng: &mut R, what: &str) -> Result<f64> {
    if !(law.shape.is_finite() && law.rate.is_finite() && law.shape > 0.0 && law.rate > 0.0) {
        return Err(Error::numerical(format!("{what}: invalid inverse-gamma parameters ({}, {})", law.shape, law.rate)));
    }
    let v = law.sample(rng);
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::numerical(format!("{what}: draw {v} from IG({}, {})", law.shape, law.rate)))
    }
}

fn block_update<R: Rng + ?Sized>(state: &HorseshoeState, gram: &Gram, d: usize, rng: &mut R) -> Result<Block> {
    let p = state.dim();
    let n = gram.n();
    let c = state.c;
    let sigma2 = state.sigma2[d];
    let lambda2 = state.lambda2[d];
    let sigma = sigma2.sqrt();

    // beta | rest: prior variances D = sigma^2 lambda^2 b c^2 / (p^2 k)
    let prior_prec = prior_precision_factors(&state.b[d], lambda2, c, p, d);
    let dvar = prior_prec.map(|v| sigma2 / v);
    let q = dvar.len();
    let beta = if q > n {
        let phi = gram.design(d) / sigma;
        let alpha = gram.z.column(d) / sigma;
        sample_gaussian_augmented(&phi, &dvar, &alpha.into_owned(), rng)?
    } else {
        sample_gaussian_dense(&(gram.predictors(d) / sigma2), &(gram.cross(d) / sigma2), &dvar, rng)?
    };

    let lambda2 = sample(lambda2_conditional(&beta, &state.b[d], sigma2, state.a[d], c, p, d), rng, "lambda^2")?;
    let a = sample(a_conditional(lambda2), rng, "a")?;
    let mut b = state.b[d].clone();
    let mut h = state.h[d].clone();
    for j in 0..q {
        b[j] = sample(b_conditional(beta[j], row_index(d, j), sigma2, lambda2, h[j], c, p), rng, "b")?;
        h[j] = sample(h_conditional(b[j]), rng, "h")?;
    }
    let rss = gram.residual_ss(d, &beta);
    let sigma2 = sample(sigma2_conditional(rss, &beta, &b, lambda2, c, p, d, n), rng, "sigma^2")?;
    Ok(Block { beta, lambda2, a, b, h, sigma2 })
}

/// One pass over regressions `d = 1..p-1` followed by the last variance.
pub fn horseshoe_sweep<R: Rng + ?Sized>(state: &mut HorseshoeState, z: &DMatrix<f64>, rng: &mut R) -> Result<()> {
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
        state.lambda2[d] = blk.lambda2;
        state.a[d] = blk.a;
        state.b[d] = blk.b;
        state.h[d] = blk.h;
        state.sigma2[d] = blk.sigma2;
    }
    let last: Vec<f64> = z.column(p - 1).iter().copied().collect();
    state.sigma2[p - 1] = sample(last_sigma2_conditional(&last), rng, "last sigma^2")?;
    Ok(())
}

impl RegressionSweep for HorseshoeState {
    fn sweep<R: Rng + ?Sized>(&mut self, z: &DMatrix<f64>, rng: &mut R) -> Result<()> {
        horseshoe_sweep(self, z, rng)
    }

    fn factors(&self) -> CholeskyFactors {
        let p = self.dim();
        CholeskyFactors {
            beta: self.beta.clone(),
            gamma: (0..p).map(|d| vec![true; p - d - 1]).collect(),
            sigma2: self.sigma2.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cholesky::assemble_precision;
    use crate::linalg;
    use crate::stats::{ks_test, seeded_rng};

    #[test]
    fn single_column_updates_only_variance() {
        let z = DMatrix::from_column_slice(4, 1, &[1.0, 1.0, 1.0, 1.0]);
        let law = last_sigma2_conditional(&[1.0, 1.0, 1.0, 1.0]);
        assert!((law.shape - 2.01).abs() < 1e-15 && (law.rate - 2.01).abs() < 1e-15);
        let mut state = HorseshoeState::new(&CholeskyFactors::identity(1), 1.0).unwrap();
        let mut rng = seeded_rng(1);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| {
                horseshoe_sweep(&mut state, &z, &mut rng).unwrap();
                state.sigma2[0]
            })
            .collect();
        assert!(ks_test(&xs, |x| law.cdf(x)).p_value > 0.01);
    }

    #[test]
    fn conditional_parameters_by_hand() {
        let beta = DVector::from_vec(vec![0.5, -1.0]);
        let b = DVector::from_vec(vec![2.0, 0.5]);
        // p = 3, d = 0: rows k = 2, 3
        let l = lambda2_conditional(&beta, &b, 2.0, 4.0, 1.0, 3, 0);
        let expect = 0.5 * (0.25 * 9.0 * 2.0 / (2.0 * 2.0) + 1.0 * 9.0 * 3.0 / (2.0 * 0.5)) + 0.25;
        assert!((l.shape - 1.5).abs() < 1e-15 && (l.rate - expect).abs() < 1e-12);
        let bb = b_conditional(-1.0, 3, 2.0, 0.5, 4.0, 10.0, 3);
        assert!((bb.rate - (3.0 * 9.0 / (2.0 * 2.0 * 0.5 * 100.0) + 0.25)).abs() < 1e-15);
        let s = sigma2_conditional(3.0, &beta, &b, 0.5, 1.0, 3, 0, 10);
        let pen = 0.25 * 9.0 * 2.0 / (0.5 * 2.0) + 9.0 * 3.0 / (0.5 * 0.5);
        assert!((s.shape - 6.01).abs() < 1e-15 && (s.rate - (1.5 + 0.5 * pen + 0.01)).abs() < 1e-12);
        assert_eq!(a_conditional(0.5), InvGamma::new(1.0, 3.0));
        assert_eq!(h_conditional(0.25), InvGamma::new(1.0, 5.0));
    }

    #[test]
    fn sweep_keeps_state_positive_and_omega_pd() {
        let mut rng = seeded_rng(2);
        let z = DMatrix::from_fn(30, 6, |_, _| rng.random::<f64>() - 0.5);
        let mut state = HorseshoeState::new(&CholeskyFactors::identity(6), 1.0).unwrap();
        for _ in 0..200 {
            horseshoe_sweep(&mut state, &z, &mut rng).unwrap();
            assert!(state.sigma2.iter().all(|v| *v > 0.0));
            assert!(state.lambda2.iter().all(|v| *v > 0.0));
            assert!(linalg::is_spd(&assemble_precision(&state.factors())));
        }
    }

    #[test]
    fn wide_regressions_use_augmentation() {
        // p - 1 > n forces the augmented path for the first regressions
        let mut rng = seeded_rng(3);
        let z = DMatrix::from_fn(4, 8, |_, _| rng.random::<f64>() - 0.5);
        let mut state = HorseshoeState::new(&CholeskyFactors::identity(8), 0.1).unwrap();
        for _ in 0..50 {
            horseshoe_sweep(&mut state, &z, &mut rng).unwrap();
        }
        assert!(linalg::is_spd(&assemble_precision(&state.factors())));
    }

    #[test]
    fn sweep_is_reproducible() {
        let mut rng = seeded_rng(4);
        let z = DMatrix::from_fn(20, 5, |_, _| rng.random::<f64>());
        let run = || {
            let mut s = HorseshoeState::new(&CholeskyFactors::identity(5), 1.0).unwrap();
            let mut r = seeded_rng(99);
            for _ in 0..10 {
                horseshoe_sweep(&mut s, &z, &mut r).unwrap();
            }
            s
        };
        assert_eq!(run(), run());
    }
}
