use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::basis::BSplineBasis;
use crate::error::{Error, Result};
use crate::stats::std_normal_quantile;

/// Minimum slack `F theta >= MARGIN` for a coefficient vector to count as
/// strictly feasible.
pub const FEASIBILITY_MARGIN: f64 = 1e-8;

/// Hyperparameters of the normal prior on spline coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplinePrior {
    /// Location of the prior mean sequence.
    pub nu: f64,
    /// Spread of the prior mean sequence.
    pub tau: f64,
    /// Prior variance of each coefficient.
    pub sigma2: f64,
}

impl Default for SplinePrior {
    fn default() -> Self {
        Self { nu: 1.0, tau: 1.0, sigma2: 1.0 }
    }
}

/// Equality constraints `A theta = c` and the difference operator `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineConstraints {
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
    pub f: DMatrix<f64>,
}

/// Rows of `A` are the basis at 1/2 and the basis difference between 3/4
/// and 1/4, pinning `f(1/2) = 0` and `f(3/4) - f(1/4) = 1`.
pub fn build_constraints(basis: &BSplineBasis) -> SplineConstraints {
    let j = basis.num_basis();
    let at = |x: f64| basis.evaluate(x).expect("constraint points lie in [0, 1]");
    let half = at(0.5);
    let spread = at(0.75) - at(0.25);
    let mut a = DMatrix::zeros(2, j);
    a.row_mut(0).copy_from(&half.transpose());
    a.row_mut(1).copy_from(&spread.transpose());
    SplineConstraints {
        a,
        c: DVector::from_vec(vec![0.0, 1.0]),
        f: difference_matrix(j),
    }
}

/// `(J-1) x J` first-difference operator.
pub fn difference_matrix(j: usize) -> DMatrix<f64> {
    let mut f = DMatrix::zeros(j - 1, j);
    for r in 0..j - 1 {
        f[(r, r)] = -1.0;
        f[(r, r + 1)] = 1.0;
    }
    f
}

/// The prior after removing two coefficients through `A theta = c`.
///
/// The free coordinates `theta_bar` live in `R^(J-2)`; the eliminated pair is
/// recovered as `W theta_bar + q`, and the full vector as
/// `theta = M theta_bar + m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedPrior {
    pub eliminated: [usize; 2],
    pub free: Vec<usize>,
    pub xi_bar: DVector<f64>,
    pub gamma_bar: DMatrix<f64>,
    pub f_bar: DMatrix<f64>,
    pub g_bar: DVector<f64>,
    pub w: DMatrix<f64>,
    pub q: DVector<f64>,
    pub reconstruct_matrix: DMatrix<f64>,
    pub reconstruct_offset: DVector<f64>,
}

/// Everything needed to sample and evaluate one monotone transformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSplineModel {
    pub basis: BSplineBasis,
    pub zeta: DVector<f64>,
    pub sigma2: f64,
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
    pub f: DMatrix<f64>,
    pub xi: DVector<f64>,
    pub gamma: DMatrix<f64>,
    pub reduced: ReducedPrior,
}

/// Normal prior `N(zeta, sigma2 I)` conditioned on `A theta = c`, and its
/// reduction to `J - 2` free coordinates with truncation
/// `F_bar theta_bar + g_bar > 0`.
pub fn build_prior(basis: &BSplineBasis, prior: SplinePrior) -> Result<MonotoneSplineModel> {
    if !(prior.tau > 0.0 && prior.sigma2 > 0.0) {
        return Err(Error::config("spline prior needs tau > 0 and sigma2 > 0"));
    }
    let j = basis.num_basis();
    let SplineConstraints { a, c, f } = build_constraints(basis);

    let jf = j as f64;
    let zeta = DVector::from_iterator(
        j,
        (1..=j).map(|i| prior.nu + prior.tau * std_normal_quantile((i as f64 - 0.375) / (jf + 0.25))),
    );

    let aat_inv = (&a * a.transpose())
        .try_inverse()
        .ok_or_else(|| Error::numerical("constraint rows are linearly dependent"))?;
    let proj = a.transpose() * &aat_inv;
    let xi = &zeta + &proj * (&c - &a * &zeta);
    let gamma = (DMatrix::identity(j, j) - &proj * &a) * prior.sigma2;
    let gamma = (&gamma + gamma.transpose()) * 0.5;

    let reduced = reduce(&a, &c, &f, &xi, &gamma)?;
    Ok(MonotoneSplineModel {
        basis: basis.clone(),
        zeta,
        sigma2: prior.sigma2,
        a,
        c,
        f,
        xi,
        gamma,
        reduced,
    })
}

fn reduce(
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    f: &DMatrix<f64>,
    xi: &DVector<f64>,
    gamma: &DMatrix<f64>,
) -> Result<ReducedPrior> {
    let j = a.ncols();
    // eliminate the best-conditioned pair of coordinates
    let mut best = (0, 1, 0.0f64);
    for i0 in 0..j {
        for i1 in i0 + 1..j {
            let det = (a[(0, i0)] * a[(1, i1)] - a[(0, i1)] * a[(1, i0)]).abs();
            if det > best.2 + 1e-14 {
                best = (i0, i1, det);
            }
        }
    }
    let (e0, e1, det) = best;
    if det < 1e-12 {
        return Err(Error::numerical("constraint matrix has rank below 2"));
    }
    let free: Vec<usize> = (0..j).filter(|&i| i != e0 && i != e1).collect();
    let a_e = DMatrix::from_columns(&[a.column(e0), a.column(e1)]);
    let a_e_inv = a_e.try_inverse().expect("pair chosen with nonzero determinant");
    let a_free = a.select_columns(&free);
    let w = -(&a_e_inv * a_free);
    let q = &a_e_inv * c;

    let k = j - 2;
    let mut m = DMatrix::zeros(j, k);
    let mut offset = DVector::zeros(j);
    for (col, &i) in free.iter().enumerate() {
        m[(i, col)] = 1.0;
    }
    for (r, &i) in [e0, e1].iter().enumerate() {
        m.row_mut(i).copy_from(&w.row(r));
        offset[i] = q[r];
    }

    let xi_bar = DVector::from_iterator(k, free.iter().map(|&i| xi[i]));
    let gamma_bar = DMatrix::from_fn(k, k, |r, s| gamma[(free[r], free[s])]);
    Ok(ReducedPrior {
        eliminated: [e0, e1],
        f_bar: f * &m,
        g_bar: f * &offset,
        free,
        xi_bar,
        gamma_bar,
        w,
        q,
        reconstruct_matrix: m,
        reconstruct_offset: offset,
    })
}

impl MonotoneSplineModel {
    pub fn num_basis(&self) -> usize {
        self.basis.num_basis()
    }

    /// Full coefficient vector from the free coordinates.
    pub fn reconstruct(&self, theta_bar: &DVector<f64>) -> DVector<f64> {
        &self.reduced.reconstruct_matrix * theta_bar + &self.reduced.reconstruct_offset
    }

    /// Free coordinates of a full coefficient vector.
    pub fn reduce(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.reduced.free.len(), self.reduced.free.iter().map(|&i| theta[i]))
    }

    pub fn constraint_residual(&self, theta: &DVector<f64>) -> f64 {
        (&self.a * theta - &self.c).amax()
    }

    pub fn min_increment(&self, theta: &DVector<f64>) -> f64 {
        (&self.f * theta).min()
    }

    /// `A theta = c` to 1e-10 and increments at least the feasibility margin.
    pub fn is_strictly_feasible(&self, theta: &DVector<f64>) -> bool {
        self.constraint_residual(theta) <= 1e-10 && self.min_increment(theta) >= FEASIBILITY_MARGIN
    }

    /// Coefficients of `f(x) = 2x - 1`, which satisfy both equality
    /// constraints and are strictly increasing.
    pub fn linear_identity(&self) -> DVector<f64> {
        DVector::from_iterator(self.num_basis(), self.basis.greville().into_iter().map(|g| 2.0 * g - 1.0))
    }

    /// The prior mean `xi` if it is strictly feasible, otherwise the point
    /// closest to it on the segment towards [`Self::linear_identity`] that
    /// is.
    pub fn interior_prior_mean(&self) -> DVector<f64> {
        let anchor = self.linear_identity();
        let target_margin = 0.5 * self.min_increment(&anchor);
        let xi_inc = &self.f * &self.xi;
        let anchor_inc = &self.f * &anchor;
        // largest t in [0,1] with t*xi_inc + (1-t)*anchor_inc >= target for all rows
        let mut t: f64 = 1.0;
        for (x, a) in xi_inc.iter().zip(anchor_inc.iter()) {
            if *x < target_margin {
                t = t.min((a - target_margin) / (a - x));
            }
        }
        let t = t.clamp(0.0, 1.0);
        &self.xi * t + anchor * (1.0 - t)
    }

    pub fn evaluate(&self, theta: &DVector<f64>, x: f64) -> f64 {
        self.basis.spline_value(theta, x)
    }
}
