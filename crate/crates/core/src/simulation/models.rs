use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::stats::seeded_rng;
use crate::vb::linspace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Tridiagonal with 2 on the diagonal, 1 beside it, and 0.9 in the
    /// corners.
    Circle,
    /// Band of 1, 0.5, 0.25.
    Ar2,
    /// Random Cholesky factor giving `level` nonzero off-diagonal pairs.
    Percent { level: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionModel {
    pub kind: ModelKind,
    pub p: usize,
    pub seed: u64,
}

/// Off-diagonal nonzero rate used for the random models at the standard
/// dimensions.
pub fn percent_target(p: usize) -> Option<f64> {
    match p {
        25 => Some(0.10),
        50 => Some(0.05),
        100 => Some(0.02),
        _ => None,
    }
}

pub fn generate_precision(model: &PrecisionModel) -> Result<DMatrix<f64>> {
    let p = model.p;
    if p < 3 {
        return Err(Error::config("precision models need p >= 3"));
    }
    let omega = match model.kind {
        ModelKind::Circle => {
            let mut m = DMatrix::from_fn(p, p, |i, j| match i.abs_diff(j) {
                0 => 2.0,
                1 => 1.0,
                _ => 0.0,
            });
            m[(0, p - 1)] = 0.9;
            m[(p - 1, 0)] = 0.9;
            m
        }
        ModelKind::Ar2 => DMatrix::from_fn(p, p, |i, j| match i.abs_diff(j) {
            0 => 1.0,
            1 => 0.5,
            2 => 0.25,
            _ => 0.0,
        }),
        ModelKind::Percent { level } => percent_precision(p, level, model.seed)?,
    };
    if !linalg::is_spd(&omega) {
        return Err(Error::not_pd(format!("{:?} precision matrix with p = {p}", model.kind)));
    }
    Ok(omega)
}

/// Off-diagonal pairs to be nonzero at the given rate.
fn target_pairs(p: usize, level: f64) -> usize {
    (level * (p * (p - 1) / 2) as f64).round() as usize
}

fn percent_precision(p: usize, level: f64, seed: u64) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::config("sparsity level must lie in [0, 1]"));
    }
    let target = target_pairs(p, level);
    let mut rng = seeded_rng(seed);
    let mut pattern = DMatrix::from_fn(p, p, |i, j| i == j);
    let mut support = DMatrix::from_element(p, p, false);
    let mut count = 0usize;
    let mut positions: Vec<(usize, usize)> = (0..p).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
    positions.shuffle(&mut rng);
    // A factor entry (i, j) connects i with every k sharing column j.
    for (i, j) in positions {
        if count == target {
            break;
        }
        let new: Vec<usize> = (j..p).filter(|&k| k != i && pattern[(k, j)] && !support[(i, k)]).collect();
        if count + new.len() <= target {
            pattern[(i, j)] = true;
            for k in new {
                support[(i, k)] = true;
                support[(k, i)] = true;
                count += 1;
            }
        }
    }
    let mut l = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            if i == j {
                l[(i, i)] = 1.0 + 0.1 * rng.sample::<f64, _>(StandardNormal);
            } else if pattern[(i, j)] {
                l[(i, j)] = rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    let mut omega = &l * l.transpose();
    for i in 0..p {
        for k in 0..p {
            if i != k && !support[(i, k)] {
                omega[(i, k)] = 0.0;
            }
        }
    }
    Ok(linalg::symmetrize(&omega))
}

/// Means spaced evenly from 0 to 2.
pub fn mean_grid(p: usize) -> DVector<f64> {
    DVector::from_vec(linspace(0.0, 2.0, p))
}

/// `n` rows from `N(mu, Omega^-1)` with `mu` from [`mean_grid`].
pub fn generate_observations<R: Rng + ?Sized>(omega: &DMatrix<f64>, n: usize, rng: &mut R) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let p = omega.nrows();
    let chol = linalg::cholesky(omega, "true precision matrix")?;
    let mu = mean_grid(p);
    let e = DMatrix::from_fn(p, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let lt = chol.l().transpose();
    let x = lt
        .solve_upper_triangular(&e)
        .ok_or_else(|| Error::numerical("singular Cholesky factor"))?;
    let mut y = x.transpose();
    for (d, mut col) in y.column_iter_mut().enumerate() {
        col.add_scalar_mut(mu[d]);
    }
    Ok((y, mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(kind: ModelKind, p: usize, seed: u64) -> PrecisionModel {
        PrecisionModel { kind, p, seed }
    }

    #[test]
    fn circle_four() {
        let o = generate_precision(&model(ModelKind::Circle, 4, 0)).unwrap();
        let expect = DMatrix::from_row_slice(
            4,
            4,
            &[2.0, 1.0, 0.0, 0.9, 1.0, 2.0, 1.0, 0.0, 0.0, 1.0, 2.0, 1.0, 0.9, 0.0, 1.0, 2.0],
        );
        assert_eq!(o, expect);
    }

    #[test]
    fn ar2_five() {
        let o = generate_precision(&model(ModelKind::Ar2, 5, 0)).unwrap();
        for i in 0..5 {
            assert_eq!(o[(i, i)], 1.0);
            for j in 0..5 {
                let expect = [1.0, 0.5, 0.25, 0.0, 0.0][i.abs_diff(j)];
                assert_eq!(o[(i, j)], expect);
            }
        }
    }

    #[test]
    fn structured_models_pd_for_many_sizes() {
        for p in 3..60 {
            for kind in [ModelKind::Circle, ModelKind::Ar2] {
                assert!(generate_precision(&model(kind, p, 0)).is_ok(), "{kind:?} {p}");
            }
        }
        assert!(generate_precision(&model(ModelKind::Circle, 2, 0)).is_err());
    }

    #[test]
    fn percent_support_near_target() {
        for (p, level) in [(25, 0.10), (50, 0.05)] {
            let pairs = (p * (p - 1) / 2) as f64;
            let mut total = 0.0;
            for seed in 0..100 {
                let o = generate_precision(&model(ModelKind::Percent { level }, p, seed)).unwrap();
                let nz = (0..p).map(|i| (0..i).filter(|&j| o[(i, j)] != 0.0).count()).sum::<usize>() as f64;
                assert!((nz / pairs - level).abs() <= 0.01, "seed {seed}: {}", nz / pairs);
                total += nz / pairs;
            }
            assert!((total / 100.0 - level).abs() <= 0.01);
        }
    }

    #[test]
    fn mean_grids() {
        assert_eq!(mean_grid(3).as_slice(), &[0.0, 1.0, 2.0]);
        assert_eq!(mean_grid(5).as_slice(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn large_sample_recovers_precision() {
        let omega = generate_precision(&model(ModelKind::Circle, 3, 0)).unwrap();
        let mut rng = seeded_rng(1);
        let (y, mu) = generate_observations(&omega, 100_000, &mut rng).unwrap();
        assert_eq!(mu.as_slice(), &[0.0, 1.0, 2.0]);
        let est = linalg::sample_covariance(&y).try_inverse().unwrap();
        for (a, b) in est.iter().zip(omega.iter()) {
            assert!((a - b).abs() <= 0.05 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}
