//! Pieces shared by the regression samplers: Gaussian coefficient draws and
//! the per-sweep Gram matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::cholesky::CholeskyFactors;
use crate::error::{Error, Result};
use crate::linalg;

/// One Gibbs pass over every regression, after which the current precision
/// matrix can be read off.
pub trait RegressionSweep {
    fn sweep<R: Rng + ?Sized>(&mut self, z: &DMatrix<f64>, rng: &mut R) -> Result<()>;

    /// Current coefficients, indicators and variances.
    fn factors(&self) -> CholeskyFactors;
}

/// 1-based row index `k` of entry `j` in regression `d` (0-based).
#[inline]
pub fn row_index(d: usize, j: usize) -> usize {
    d + j + 2
}

/// `Z' Z` together with the columns, so blocks for every regression can be
/// sliced out without recomputation.
pub struct Gram<'a> {
    pub z: &'a DMatrix<f64>,
    pub g: DMatrix<f64>,
}

impl<'a> Gram<'a> {
    pub fn new(z: &'a DMatrix<f64>) -> Self {
        Self { z, g: z.transpose() * z }
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn p(&self) -> usize {
        self.z.ncols()
    }

    /// `Z_{k>d}' Z_{k>d}`.
    pub fn predictors(&self, d: usize) -> DMatrix<f64> {
        let q = self.p() - d - 1;
        self.g.view((d + 1, d + 1), (q, q)).into_owned()
    }

    /// `Z_{k>d}' Z_d`.
    pub fn cross(&self, d: usize) -> DVector<f64> {
        let q = self.p() - d - 1;
        self.g.view((d + 1, d), (q, 1)).column(0).into_owned()
    }

    pub fn design(&self, d: usize) -> DMatrix<f64> {
        let q = self.p() - d - 1;
        self.z.columns(d + 1, q).into_owned()
    }

    /// `|| Z_d - Z_{k>d} beta ||^2`, computed from the data columns.
    pub fn residual_ss(&self, d: usize, beta: &DVector<f64>) -> f64 {
        let q = self.p() - d - 1;
        let mut r = self.z.column(d).into_owned();
        if q > 0 {
            r -= self.z.columns(d + 1, q) * beta;
        }
        r.norm_squared()
    }
}

/// Draw from `N(P^-1 Phi' alpha, P^-1)` with `P = Phi' Phi + D^-1`, through
/// an `n x n` system only: `t ~ N(0, D)`, `v = Phi t + e`, solve
/// `(Phi D Phi' + I) w = alpha - v`, return `t + D Phi' w`.
pub fn sample_gaussian_augmented<R: Rng + ?Sized>(
    phi: &DMatrix<f64>,
    d: &DVector<f64>,
    alpha: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let (n, q) = phi.shape();
    check_prior_scales(d, q)?;
    if alpha.len() != n {
        return Err(Error::input("response length does not match the design"));
    }
    let sd = d.map(f64::sqrt);
    let t = linalg::standard_normal_vector(q, rng).component_mul(&sd);
    let e = linalg::standard_normal_vector(n, rng);
    let v = phi * &t + e;
    let phi_d = phi * DMatrix::from_diagonal(d);
    let m = &phi_d * phi.transpose() + DMatrix::identity(n, n);
    let chol = linalg::cholesky(&m, "augmented system")?;
    let w = chol.solve(&(alpha - v));
    let out = t + phi_d.transpose() * w;
    finite(out)
}

/// The same law through the `q x q` precision, given `Phi' Phi` and
/// `Phi' alpha`.
pub fn sample_gaussian_dense<R: Rng + ?Sized>(
    gram: &DMatrix<f64>,
    cross: &DVector<f64>,
    d: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let q = d.len();
    check_prior_scales(d, q)?;
    let mut precision = gram.clone();
    for j in 0..q {
        precision[(j, j)] += 1.0 / d[j];
    }
    let chol = linalg::cholesky(&precision, "regression posterior precision")?;
    let mean = chol.solve(cross);
    finite(linalg::sample_with_precision(&mean, &chol, rng))
}

/// Augmented path when `q > n`, dense path otherwise.
pub fn sample_gaussian<R: Rng + ?Sized>(
    phi: &DMatrix<f64>,
    d: &DVector<f64>,
    alpha: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if phi.ncols() > phi.nrows() {
        sample_gaussian_augmented(phi, d, alpha, rng)
    } else {
        let gram = phi.transpose() * phi;
        let cross = phi.transpose() * alpha;
        sample_gaussian_dense(&gram, &cross, d, rng)
    }
}

fn check_prior_scales(d: &DVector<f64>, q: usize) -> Result<()> {
    if d.len() != q {
        return Err(Error::input("prior scale vector length does not match the design"));
    }
    if let Some(bad) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::numerical(format!("prior variance {bad} is not positive and finite")));
    }
    Ok(())
}

fn finite(v: DVector<f64>) -> Result<DVector<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::numerical("non-finite regression coefficient draw"))
    }
}

/// Per-regression random streams for a sweep, so parallel blocks are
/// reproducible from the parent stream.
pub fn block_seeds<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<u64> {
    (0..count).map(|_| rng.random()).collect()
}
