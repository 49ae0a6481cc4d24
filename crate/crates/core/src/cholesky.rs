//! Precision matrices as sequences of regressions.
//!
//! With `Omega = L L'` and `L` lower triangular, column `d` of the data is
//! regressed on the columns after it:
//! `Z_d = sum_{k>d} beta_kd Z_k + eps_d`, `eps_d ~ N(0, sigma_d^2)`, where
//! `beta_kd = -l_kd / l_dd` and `sigma_d^2 = 1 / l_dd^2`. Any positive
//! `sigma2` and any `beta` therefore give a positive definite `Omega`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Largest admissible row probability.
pub const RHO_MAX: f64 = 1.0 - 1e-6;

/// Regression parameters of one precision matrix.
///
/// `beta[d]` and `gamma[d]` hold the coefficients of regression `d`
/// (0-based), one entry per later column `k = d + 1 + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CholeskyFactors {
    pub beta: Vec<DVector<f64>>,
    pub gamma: Vec<Vec<bool>>,
    pub sigma2: DVector<f64>,
}

impl CholeskyFactors {
    /// All coefficients zero, unit variances: `Omega = I`.
    pub fn identity(p: usize) -> Self {
        Self {
            beta: (0..p).map(|d| DVector::zeros(p - d - 1)).collect(),
            gamma: (0..p).map(|d| vec![true; p - d - 1]).collect(),
            sigma2: DVector::from_element(p, 1.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.sigma2.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dim();
        if self.beta.len() != p || self.gamma.len() != p {
            return Err(Error::input("ragged arrays must have one entry per column"));
        }
        for d in 0..p {
            if self.beta[d].len() != p - d - 1 || self.gamma[d].len() != p - d - 1 {
                return Err(Error::input(format!("regression {d} has the wrong length")));
            }
        }
        if self.sigma2.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::input("residual variances must be positive and finite"));
        }
        Ok(())
    }

    /// The lower-triangular factor `L` with `l_dd = 1/sigma_d` and
    /// `l_kd = -gamma_kd beta_kd / sigma_d`.
    pub fn lower_factor(&self) -> DMatrix<f64> {
        let p = self.dim();
        let mut l = DMatrix::zeros(p, p);
        for d in 0..p {
            let sd = self.sigma2[d].sqrt();
            l[(d, d)] = 1.0 / sd;
            for (j, (&b, &g)) in self.beta[d].iter().zip(&self.gamma[d]).enumerate() {
                if g {
                    l[(d + 1 + j, d)] = -b / sd;
                }
            }
        }
        l
    }
}

/// `Omega = L L'` from regression parameters.
pub fn assemble_precision(f: &CholeskyFactors) -> DMatrix<f64> {
    let l = f.lower_factor();
    linalg::symmetrize(&(&l * l.transpose()))
}

/// One posterior draw of the precision matrix with the factors it was
/// assembled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionSample {
    pub omega: DMatrix<f64>,
    pub factors: CholeskyFactors,
}

impl PrecisionSample {
    pub fn from_factors(factors: CholeskyFactors) -> Self {
        Self { omega: assemble_precision(&factors), factors }
    }
}

/// Inverse of [`assemble_precision`] with every indicator switched on.
pub fn decompose_precision(omega: &DMatrix<f64>) -> Result<CholeskyFactors> {
    if !omega.is_square() {
        return Err(Error::input("precision matrix must be square"));
    }
    let p = omega.nrows();
    let chol = linalg::cholesky(omega, "precision matrix")?;
    let l = chol.l();
    let beta = (0..p)
        .map(|d| {
            let ldd = l[(d, d)];
            DVector::from_iterator(p - d - 1, (d + 1..p).map(|k| -l[(k, d)] / ldd))
        })
        .collect();
    Ok(CholeskyFactors {
        beta,
        gamma: (0..p).map(|d| vec![true; p - d - 1]).collect(),
        sigma2: DVector::from_iterator(p, (0..p).map(|d| 1.0 / (l[(d, d)] * l[(d, d)]))),
    })
}

/// Row-wise inclusion probability `rho_k = c / (p sqrt(k))` for 1-based row `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsityRule {
    pub c: f64,
    pub p: usize,
}

impl SparsityRule {
    pub fn new(c: f64, p: usize) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) || p == 0 {
            return Err(Error::config(format!("sparsity rule needs c > 0 and p >= 1, got c={c}, p={p}")));
        }
        Ok(Self { c, p })
    }
}

/// `rho_k` clamped into `(0, RHO_MAX]`.
pub fn row_rho(rule: &SparsityRule, k: usize) -> f64 {
    assert!(k >= 1 && k <= rule.p, "row index {k} outside 1..={}", rule.p);
    scaled_probability(rule.c, rule.p, k)
}

/// `base / (p sqrt(k))`, clamped to a valid probability.
pub fn scaled_probability(base: f64, p: usize, k: usize) -> f64 {
    (base / (p as f64 * (k as f64).sqrt())).clamp(f64::MIN_POSITIVE, RHO_MAX)
}

/// `P(omega_kd != 0) = 1 - (1 - rho_k rho_d)^min(k, d)` for 1-based indices,
/// assuming independent supports across the entries of `L`.
pub fn nonzero_probability(k: usize, d: usize, rho: impl Fn(usize) -> f64) -> f64 {
    let m = k.min(d) as i32;
    let prod = rho(k) * rho(d);
    // 1 - (1 - x)^m without cancellation for small x
    -(m as f64 * (-prod).ln_1p()).exp_m1()
}
