use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::{check_unit, BSplineBasis};
use super::model::{build_prior, MonotoneSplineModel, SplinePrior, FEASIBILITY_MARGIN};
use crate::error::{Error, Result};
use crate::qp::QuadraticProgram;
use crate::stats::std_normal_quantile;

/// Normal scores `Phi^-1((rank - 0.375) / (n + 0.25))`, ties get the
/// average rank.
pub fn blom_scores(column: &[f64]) -> Vec<f64> {
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && column[order[j + 1]] == column[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    let nf = n as f64;
    ranks.iter().map(|r| std_normal_quantile((r - 0.375) / (nf + 0.25))).collect()
}

/// Result of the monotone least-squares pilot fit.
#[derive(Debug, Clone)]
pub struct PilotFit {
    pub theta: DVector<f64>,
    pub rss: f64,
    pub aic: f64,
}

/// Least squares of the basis expansion against normal scores with
/// nondecreasing coefficients.
pub fn pilot_fit(column: &[f64], basis: &BSplineBasis) -> Result<PilotFit> {
    let n = column.len();
    if n == 0 {
        return Err(Error::input("empty column"));
    }
    let design = basis.design_matrix(column)?;
    let targets = DVector::from_vec(blom_scores(column));
    let j = basis.num_basis();

    let gram = design.transpose() * &design;
    let scale = (gram.trace() / j as f64).max(1e-300);
    let hessian = &gram + DMatrix::identity(j, j) * (1e-10 * scale);
    let gradient = -(design.transpose() * &targets);
    let f = super::model::difference_matrix(j);
    let bounds = DVector::zeros(j - 1);
    let start = DVector::from_fn(j, |i, _| -1.0 + 2.0 * i as f64 / (j - 1) as f64);
    let qp = QuadraticProgram { hessian: &hessian, gradient: &gradient, constraints: &f, bounds: &bounds };
    let theta = qp.solve(&start)?;

    let rss = (&design * &theta - &targets).norm_squared();
    let sigma2 = (rss / n as f64).max(1e-12);
    let loglik = -0.5 * n as f64 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    Ok(PilotFit { theta, rss, aic: 2.0 * j as f64 - 2.0 * loglik })
}

/// Default candidate basis sizes `{5, ..., min(15, n / 4)}`, or `{5}` when
/// that range is empty.
pub fn default_candidates(n: usize) -> Vec<usize> {
    let hi = 15.min(n / 4);
    if hi < 5 {
        vec![5]
    } else {
        (5..=hi).collect()
    }
}

/// Basis size with the smallest pilot-fit AIC; ties go to the smaller size.
/// Candidates whose fit fails are skipped.
pub fn select_num_basis(column: &[f64], candidates: &[usize], degree: usize) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::config("no candidate basis sizes"));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(usize, f64)> = None;
    let mut last_err = None;
    for &j in &sorted {
        let fit = BSplineBasis::new(j, degree).and_then(|b| pilot_fit(column, &b));
        match fit {
            Ok(fit) => {
                if best.is_none_or(|(_, a)| fit.aic < a) {
                    best = Some((j, fit.aic));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some((j, _)), _) => Ok(j),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("at least one candidate was tried"),
    }
}

/// Return `theta` if strictly feasible; otherwise its Euclidean projection
/// onto `{A theta = c, F theta >= margin}`, falling back to the interior
/// prior mean when the projection is not strictly feasible.
pub fn project_feasible(model: &MonotoneSplineModel, theta: &DVector<f64>) -> DVector<f64> {
    if model.is_strictly_feasible(theta) {
        return theta.clone();
    }
    let red = &model.reduced;
    let m = &red.reconstruct_matrix;
    let hessian = m.transpose() * m;
    let gradient = m.transpose() * (&red.reconstruct_offset - theta);
    let margin = 100.0 * FEASIBILITY_MARGIN;
    let bounds = DVector::from_iterator(red.g_bar.len(), red.g_bar.iter().map(|g| margin - g));
    let start = model.reduce(&model.linear_identity());
    let qp = QuadraticProgram { hessian: &hessian, gradient: &gradient, constraints: &red.f_bar, bounds: &bounds };
    match qp.solve(&start) {
        Ok(tb) => {
            let out = model.reconstruct(&tb);
            if model.is_strictly_feasible(&out) {
                return out;
            }
            model.interior_prior_mean()
        }
        Err(_) => model.interior_prior_mean(),
    }
}

/// Strictly feasible starting coefficients from the pilot fit, rescaled so
/// that `f(1/2) = 0` and `f(3/4) - f(1/4) = 1`.
pub fn initial_coefficients(column: &[f64], model: &MonotoneSplineModel) -> Result<DVector<f64>> {
    let pilot = pilot_fit(column, &model.basis)?;
    let theta = pilot.theta;
    let centre = model.evaluate(&theta, 0.5);
    let spread = model.evaluate(&theta, 0.75) - model.evaluate(&theta, 0.25);
    if !(spread > 1e-12) || !spread.is_finite() {
        return Ok(model.interior_prior_mean());
    }
    let scaled = theta.map(|t| (t - centre) / spread);
    Ok(project_feasible(model, &scaled))
}

/// Settings for building the per-variable spline models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineSettings {
    pub degree: usize,
    /// Candidate basis sizes; `None` uses [`default_candidates`].
    pub candidates: Option<Vec<usize>>,
    pub prior: SplinePrior,
}

impl Default for SplineSettings {
    fn default() -> Self {
        Self { degree: 3, candidates: None, prior: SplinePrior::default() }
    }
}

/// Per-variable model and starting coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariableTransform {
    pub model: MonotoneSplineModel,
    pub theta_init: DVector<f64>,
}

/// Select the basis size, build the prior and compute starting values for
/// every column of `x`. Columns are processed in parallel.
pub fn initialize_transforms(x: &DMatrix<f64>, settings: &SplineSettings) -> Result<Vec<VariableTransform>> {
    for v in x.iter() {
        check_unit(*v)?;
    }
    let candidates = settings.candidates.clone().unwrap_or_else(|| default_candidates(x.nrows()));
    (0..x.ncols())
        .into_par_iter()
        .map(|d| {
            let col: Vec<f64> = x.column(d).iter().copied().collect();
            let j = select_num_basis(&col, &candidates, settings.degree)?;
            let basis = BSplineBasis::new(j, settings.degree)?;
            let model = build_prior(&basis, settings.prior)?;
            let theta_init = initial_coefficients(&col, &model)?;
            Ok(VariableTransform { model, theta_init })
        })
        .collect()
}

/// Centered transformed observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedData {
    pub z: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub theta_hat: Vec<DVector<f64>>,
}

/// Spline evaluations `Y` of every column.
pub fn evaluate_transforms(
    x: &DMatrix<f64>,
    models: &[MonotoneSplineModel],
    thetas: &[DVector<f64>],
) -> Result<DMatrix<f64>> {
    let (n, p) = x.shape();
    if models.len() != p || thetas.len() != p {
        return Err(Error::input(format!(
            "expected {p} transforms, got {} models and {} coefficient vectors",
            models.len(),
            thetas.len()
        )));
    }
    let mut y = DMatrix::zeros(n, p);
    for d in 0..p {
        if thetas[d].len() != models[d].num_basis() {
            return Err(Error::input(format!("coefficient length mismatch for column {d}")));
        }
        for i in 0..n {
            let v = x[(i, d)];
            check_unit(v)?;
            y[(i, d)] = models[d].evaluate(&thetas[d], v);
        }
    }
    Ok(y)
}

/// `Z_id = sum_j theta_jd B_j(X_id) - mu_d`.
pub fn transform(
    x: &DMatrix<f64>,
    models: &[MonotoneSplineModel],
    thetas: &[DVector<f64>],
    mu: &DVector<f64>,
) -> Result<TransformedData> {
    if mu.len() != x.ncols() {
        return Err(Error::input("mean vector length differs from column count"));
    }
    let mut z = evaluate_transforms(x, models, thetas)?;
    for (d, mut col) in z.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mu[d]);
    }
    Ok(TransformedData { z, mu: mu.clone(), theta_hat: thetas.to_vec() })
}
