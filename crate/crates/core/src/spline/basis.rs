use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clamped B-spline basis on `[0, 1]` with equally spaced interior knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineBasis {
    degree: usize,
    num_basis: usize,
    knots: Vec<f64>,
}

impl BSplineBasis {
    /// `num_basis` functions of the given degree. There are
    /// `num_basis - degree - 1` interior knots.
    pub fn new(num_basis: usize, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::config("spline degree must be at least 1"));
        }
        if num_basis < degree + 1 {
            return Err(Error::config(format!(
                "{num_basis} basis functions is too few for degree {degree} (need at least {})",
                degree + 1
            )));
        }
        let interior = num_basis - degree - 1;
        let mut knots = vec![0.0; degree + 1];
        knots.extend((1..=interior).map(|i| i as f64 / (interior + 1) as f64));
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Ok(Self { degree, num_basis, knots })
    }

    pub fn cubic(num_basis: usize) -> Result<Self> {
        Self::new(num_basis, 3)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Knot averages; coefficients set to these reproduce `f(x) = x`.
    pub fn greville(&self) -> Vec<f64> {
        (0..self.num_basis)
            .map(|j| self.knots[j + 1..=j + self.degree].iter().sum::<f64>() / self.degree as f64)
            .collect()
    }

    fn span(&self, x: f64) -> usize {
        let last = self.num_basis - 1;
        if x >= 1.0 {
            return last;
        }
        // largest i in [degree, last] with knots[i] <= x
        let mut lo = self.degree;
        let mut hi = last + 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.knots[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Writes all basis values at `x` into `out` (length `num_basis`).
    /// Returns the index of the first possibly nonzero function.
    pub fn evaluate_into(&self, x: f64, out: &mut [f64]) -> usize {
        debug_assert_eq!(out.len(), self.num_basis);
        out.iter_mut().for_each(|v| *v = 0.0);
        let p = self.degree;
        let x = x.clamp(0.0, 1.0);
        let span = self.span(x);
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = x - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        let first = span - p;
        out[first..=span].copy_from_slice(&n);
        first
    }

    pub fn evaluate(&self, x: f64) -> Result<DVector<f64>> {
        check_unit(x)?;
        let mut out = vec![0.0; self.num_basis];
        self.evaluate_into(x, &mut out);
        Ok(DVector::from_vec(out))
    }

    /// `n x J` matrix of basis values at each point.
    pub fn design_matrix(&self, xs: &[f64]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(xs.len(), self.num_basis);
        let mut row = vec![0.0; self.num_basis];
        for (i, &x) in xs.iter().enumerate() {
            check_unit(x)?;
            self.evaluate_into(x, &mut row);
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    /// Spline value `sum_j theta_j B_j(x)`.
    pub fn spline_value(&self, theta: &DVector<f64>, x: f64) -> f64 {
        let mut row = vec![0.0; self.num_basis];
        let first = self.evaluate_into(x, &mut row);
        (first..=(first + self.degree).min(self.num_basis - 1))
            .map(|j| row[j] * theta[j])
            .sum()
    }
}

pub(crate) fn check_unit(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::input(format!("value {x} lies outside [0, 1]")));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::BSplineBasis;

    /// Textbook recursive Cox-de Boor definition, right-closed at x = 1.
    pub fn cox_de_boor(basis: &BSplineBasis, j: usize, degree: usize, x: f64) -> f64 {
        let t = basis.knots();
        if degree == 0 {
            let last_nonempty = t[j] < t[j + 1] && t[j + 1] == 1.0;
            return if (t[j] <= x && x < t[j + 1]) || (x == 1.0 && last_nonempty) {
                1.0
            } else {
                0.0
            };
        }
        let mut v = 0.0;
        let d1 = t[j + degree] - t[j];
        if d1 > 0.0 {
            v += (x - t[j]) / d1 * cox_de_boor(basis, j, degree - 1, x);
        }
        let d2 = t[j + degree + 1] - t[j + 1];
        if d2 > 0.0 {
            v += (t[j + degree + 1] - x) / d2 * cox_de_boor(basis, j + 1, degree - 1, x);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::cox_de_boor;
    use super::*;
    use crate::stats::seeded_rng;
    use rand::Rng;

    #[test]
    fn too_few_functions_rejected() {
        assert!(matches!(BSplineBasis::new(3, 3), Err(Error::Config(_))));
        assert!(BSplineBasis::new(4, 3).is_ok());
    }

    #[test]
    fn bernstein_case() {
        let b = BSplineBasis::cubic(4).unwrap();
        assert_eq!(b.knots(), &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(b.evaluate(0.0).unwrap().as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(b.evaluate(1.0).unwrap().as_slice(), &[0.0, 0.0, 0.0, 1.0]);
        let half = b.evaluate(0.5).unwrap();
        for (v, e) in half.iter().zip([0.125, 0.375, 0.375, 0.125]) {
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn ten_functions_at_0_37() {
        let b = BSplineBasis::cubic(10).unwrap();
        let v = b.evaluate(0.37).unwrap();
        assert!((v.sum() - 1.0).abs() < 1e-14);
        assert!(v.iter().filter(|x| **x != 0.0).count() <= 4);
        for j in 0..10 {
            assert!((v[j] - cox_de_boor(&b, j, 3, 0.37)).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_recursive_definition_on_random_grid() {
        let mut rng = seeded_rng(5);
        for &(j, deg) in &[(5, 3), (9, 3), (7, 2), (12, 3), (6, 1)] {
            let b = BSplineBasis::new(j, deg).unwrap();
            for _ in 0..200 {
                let x: f64 = rng.random();
                let v = b.evaluate(x).unwrap();
                for k in 0..j {
                    assert!((v[k] - cox_de_boor(&b, k, deg, x)).abs() < 1e-12);
                }
            }
            let v = b.evaluate(1.0).unwrap();
            for k in 0..j {
                assert!((v[k] - cox_de_boor(&b, k, deg, 1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn partition_of_unity_and_nonnegativity() {
        let mut rng = seeded_rng(9);
        for j in [4, 5, 8, 15] {
            let b = BSplineBasis::cubic(j).unwrap();
            for _ in 0..1000 {
                let v = b.evaluate(rng.random()).unwrap();
                assert!((v.sum() - 1.0).abs() < 1e-12);
                assert!(v.iter().all(|x| *x >= 0.0));
            }
        }
    }

    #[test]
    fn greville_reproduces_identity() {
        let b = BSplineBasis::cubic(9).unwrap();
        let theta = DVector::from_vec(b.greville());
        for i in 0..=50 {
            let x = i as f64 / 50.0;
            assert!((b.spline_value(&theta, x) - x).abs() < 1e-13);
        }
    }

    #[test]
    fn outside_unit_interval_is_an_input_error() {
        let b = BSplineBasis::cubic(6).unwrap();
        assert!(matches!(b.evaluate(1.5), Err(Error::Input(_))));
        assert!(matches!(b.design_matrix(&[0.2, -0.1]), Err(Error::Input(_))));
    }
}
