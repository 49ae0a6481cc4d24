//! The joint Gibbs chain: spline coefficients, means, then one regression
//! sweep per iteration, plus the running posterior summaries and JSON
//! checkpoints.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cholesky::{assemble_precision, decompose_precision, CholeskyFactors, PrecisionSample};
use crate::error::{Error, Result};
use crate::graph::{partial_correlation, wishart_reference, zero_one_threshold, EdgeFrequency, EdgeMatrix};
use crate::linalg;
use crate::regression::RegressionSweep;
use crate::spline::{MonotoneSplineModel, TransformedData, VariableTransform};
use crate::stats::{seeded_rng, ChainRng};
use crate::tmvn::{gibbs_update_mu, gibbs_update_theta, GibbsThetaProblem, HmcSettings};

/// Ridge multiplier applied to the sample covariance when it cannot be
/// inverted directly.
pub const INITIAL_RIDGE: f64 = 0.1;

/// Starting precision: the inverse sample covariance, ridged by
/// `INITIAL_RIDGE` times the mean variance when `n <= p + 1` or the
/// covariance is singular.
pub fn initial_precision(y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, p) = y.shape();
    if n < 2 {
        return Err(Error::input("at least two observations are needed"));
    }
    let s = linalg::sample_covariance(y);
    let mean_var = s.trace() / p as f64;
    if !(mean_var > 0.0 && mean_var.is_finite()) {
        return Err(Error::input("data have no variation"));
    }
    if n > p + 1 && linalg::is_spd(&s) {
        if let Ok(inv) = linalg::spd_inverse(&s, "sample covariance") {
            if linalg::is_spd(&inv) {
                return Ok(inv);
            }
        }
    }
    let ridged = s + DMatrix::identity(p, p) * (INITIAL_RIDGE * mean_var);
    linalg::spd_inverse(&ridged, "ridged sample covariance")
}

/// Spline models of every variable with their current reduced coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplineState {
    pub models: Vec<MonotoneSplineModel>,
    pub theta_bar: Vec<DVector<f64>>,
    designs: Vec<DMatrix<f64>>,
}

impl SplineState {
    pub fn thetas(&self) -> Vec<DVector<f64>> {
        self.models.iter().zip(&self.theta_bar).map(|(m, t)| m.reconstruct(t)).collect()
    }
}

/// Everything in the chain other than the regression parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatentState {
    pub x: DMatrix<f64>,
    pub splines: Option<SplineState>,
    /// Transformed, uncentered data.
    pub y: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub omega: DMatrix<f64>,
    /// `y` minus `mu`.
    pub z: DMatrix<f64>,
}

impl LatentState {
    /// The data are used as they are; only the means are sampled.
    pub fn identity(x: DMatrix<f64>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("data contain non-finite values"));
        }
        Self::from_parts(x.clone(), None, x)
    }

    /// Monotone spline transformations started at each `theta_init`.
    pub fn with_splines(x: DMatrix<f64>, transforms: Vec<VariableTransform>) -> Result<Self> {
        let (n, p) = x.shape();
        if transforms.len() != p {
            return Err(Error::input(format!("expected {p} transforms, got {}", transforms.len())));
        }
        let mut y = DMatrix::zeros(n, p);
        let mut designs = Vec::with_capacity(p);
        let mut models = Vec::with_capacity(p);
        let mut theta_bar = Vec::with_capacity(p);
        for (d, t) in transforms.into_iter().enumerate() {
            if !t.model.is_strictly_feasible(&t.theta_init) {
                return Err(Error::input(format!("starting coefficients of column {} are not feasible", d + 1)));
            }
            let col: Vec<f64> = x.column(d).iter().copied().collect();
            let design = t.model.basis.design_matrix(&col)?;
            y.set_column(d, &(&design * &t.theta_init));
            theta_bar.push(t.model.reduce(&t.theta_init));
            designs.push(design);
            models.push(t.model);
        }
        Self::from_parts(x, Some(SplineState { models, theta_bar, designs }), y)
    }

    fn from_parts(x: DMatrix<f64>, splines: Option<SplineState>, y: DMatrix<f64>) -> Result<Self> {
        let omega = initial_precision(&y)?;
        let mu = linalg::column_means(&y);
        let z = centered(&y, &mu);
        Ok(Self { x, splines, y, mu, omega, z })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn p(&self) -> usize {
        self.y.ncols()
    }

    pub fn initial_factors(&self) -> Result<CholeskyFactors> {
        decompose_precision(&self.omega)
    }

    /// Redraw each variable's coefficients given the others, in column order.
    pub fn update_transforms<R: Rng + ?Sized>(&mut self, hmc: HmcSettings, rng: &mut R) -> Result<()> {
        let Some(sp) = self.splines.as_mut() else { return Ok(()) };
        for d in 0..self.y.ncols() {
            let model = &sp.models[d];
            let problem = GibbsThetaProblem::from_design(model, &sp.designs[d], &self.y, &self.mu, &self.omega, d)?;
            let tb = gibbs_update_theta(&problem, model, &sp.theta_bar[d], hmc, rng)?;
            let theta = model.reconstruct(&tb);
            self.y.set_column(d, &(&sp.designs[d] * &theta));
            sp.theta_bar[d] = tb;
        }
        Ok(())
    }

    pub fn update_mu<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.mu = gibbs_update_mu(&self.y, &self.omega, rng)?;
        self.z = centered(&self.y, &self.mu);
        Ok(())
    }

    pub fn thetas(&self) -> Option<Vec<DVector<f64>>> {
        self.splines.as_ref().map(SplineState::thetas)
    }
}

fn centered(y: &DMatrix<f64>, mu: &DVector<f64>) -> DMatrix<f64> {
    let mut z = y.clone();
    for (d, mut col) in z.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mu[d]);
    }
    z
}

/// One kept iteration.
#[derive(Debug, Clone, Copy)]
pub struct ChainDraw<'a> {
    pub iteration: u64,
    pub omega: &'a DMatrix<f64>,
    pub z: &'a DMatrix<f64>,
    pub mu: &'a DVector<f64>,
    pub splines: Option<&'a SplineState>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointChain<S> {
    pub latent: LatentState,
    pub sampler: S,
    pub hmc: HmcSettings,
    pub iteration: u64,
    rng: ChainRng,
}

impl<S: RegressionSweep> JointChain<S> {
    pub fn new(latent: LatentState, sampler: S, hmc: HmcSettings, seed: u64) -> Result<Self> {
        let f = sampler.factors();
        f.validate()?;
        if f.dim() != latent.p() {
            return Err(Error::input("sampler dimension differs from the data"));
        }
        Ok(Self { latent, sampler, hmc, iteration: 0, rng: seeded_rng(seed) })
    }

    /// Transformations, means, then the regression sweep.
    pub fn step(&mut self) -> Result<()> {
        self.latent.update_transforms(self.hmc, &mut self.rng)?;
        self.latent.update_mu(&mut self.rng)?;
        self.sampler.sweep(&self.latent.z, &mut self.rng)?;
        self.latent.omega = assemble_precision(&self.sampler.factors());
        self.iteration += 1;
        Ok(())
    }

    pub fn draw(&self) -> ChainDraw<'_> {
        ChainDraw {
            iteration: self.iteration,
            omega: &self.latent.omega,
            z: &self.latent.z,
            mu: &self.latent.mu,
            splines: self.latent.splines.as_ref(),
        }
    }

    /// Discard `n_burn` iterations, then pass each of the next `n_keep` to
    /// `sink`. No thinning.
    pub fn run(&mut self, n_burn: usize, n_keep: usize, mut sink: impl FnMut(ChainDraw<'_>) -> Result<()>) -> Result<()> {
        for _ in 0..n_burn {
            self.step()?;
        }
        for _ in 0..n_keep {
            self.step()?;
            sink(self.draw())?;
        }
        Ok(())
    }

    /// Every kept precision matrix with its factors.
    pub fn run_collect(&mut self, n_burn: usize, n_keep: usize) -> Result<Vec<PrecisionSample>> {
        for _ in 0..n_burn {
            self.step()?;
        }
        let mut out = Vec::with_capacity(n_keep);
        for _ in 0..n_keep {
            self.step()?;
            out.push(PrecisionSample { omega: self.latent.omega.clone(), factors: self.sampler.factors() });
        }
        Ok(out)
    }
}

const CHECKPOINT_FORMAT: &str = "npgm-chain";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint<T> {
    format: String,
    version: u32,
    chain: T,
}

impl<S: Serialize + DeserializeOwned> JointChain<S> {
    /// Versioned JSON snapshot, including the random stream position.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Checkpoint { format: CHECKPOINT_FORMAT.into(), version: CHECKPOINT_VERSION, chain: self })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cp: Checkpoint<Self> = serde_json::from_str(text)?;
        if cp.format != CHECKPOINT_FORMAT || cp.version != CHECKPOINT_VERSION {
            return Err(Error::input(format!("unsupported checkpoint {} v{}", cp.format, cp.version)));
        }
        Ok(cp.chain)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// How a single precision sample is turned into edge indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeRule {
    /// Partial correlations against the Wishart reference of the same
    /// iteration's data.
    WishartThreshold,
    /// Nonzero off-diagonal entries.
    Support,
}

/// Running means of the precision matrix and centered data, and edge
/// inclusion frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub rule: EdgeRule,
    omega_sum: DMatrix<f64>,
    z_sum: DMatrix<f64>,
    freq: EdgeFrequency,
    count: u64,
}

impl PosteriorSummary {
    pub fn new(n: usize, p: usize, rule: EdgeRule) -> Self {
        Self {
            rule,
            omega_sum: DMatrix::zeros(p, p),
            z_sum: DMatrix::zeros(n, p),
            freq: EdgeFrequency::new(p),
            count: 0,
        }
    }

    pub fn add(&mut self, omega: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<()> {
        if omega.shape() != self.omega_sum.shape() || z.shape() != self.z_sum.shape() {
            return Err(Error::input("sample shape differs from the summary"));
        }
        let indicator = match self.rule {
            EdgeRule::WishartThreshold => zero_one_threshold(&partial_correlation(omega), &wishart_reference(z)?)?,
            EdgeRule::Support => EdgeMatrix::support(omega).adjacency().clone(),
        };
        self.freq.add(&indicator)?;
        self.omega_sum += omega;
        self.z_sum += z;
        self.count += 1;
        Ok(())
    }

    pub fn add_draw(&mut self, draw: ChainDraw<'_>) -> Result<()> {
        self.add(draw.omega, draw.z)
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    fn denom(&self) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::input("no posterior samples were kept"));
        }
        Ok(self.count as f64)
    }

    pub fn omega_mean(&self) -> Result<DMatrix<f64>> {
        Ok(&self.omega_sum / self.denom()?)
    }

    pub fn z_mean(&self) -> Result<DMatrix<f64>> {
        Ok(&self.z_sum / self.denom()?)
    }

    pub fn inclusion_probabilities(&self) -> DMatrix<f64> {
        self.freq.probabilities()
    }

    pub fn edges(&self) -> Result<EdgeMatrix> {
        self.freq.median_model()
    }
}

/// Running mean of the spline coefficients.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThetaMean {
    sum: Option<Vec<DVector<f64>>>,
    count: u64,
}

impl ThetaMean {
    pub fn add(&mut self, splines: Option<&SplineState>) {
        let Some(sp) = splines else { return };
        let thetas = sp.thetas();
        match self.sum.as_mut() {
            None => self.sum = Some(thetas),
            Some(acc) => acc.iter_mut().zip(&thetas).for_each(|(a, t)| *a += t),
        }
        self.count += 1;
    }

    pub fn mean(&self) -> Option<Vec<DVector<f64>>> {
        let c = self.count as f64;
        self.sum.as_ref().map(|s| s.iter().map(|t| t / c).collect())
    }
}

/// Posterior means of the spline coefficients and means with the precision
/// matrix held at its current value, and the resulting centered data.
pub fn plug_in_transform<R: Rng + ?Sized>(
    latent: &mut LatentState,
    n_burn: usize,
    n_keep: usize,
    hmc: HmcSettings,
    rng: &mut R,
) -> Result<TransformedData> {
    let p = latent.p();
    let mut mu_sum = DVector::zeros(p);
    let mut thetas = ThetaMean::default();
    let n_keep = n_keep.max(1);
    for it in 0..n_burn + n_keep {
        latent.update_transforms(hmc, rng)?;
        latent.update_mu(rng)?;
        if it >= n_burn {
            mu_sum += &latent.mu;
            thetas.add(latent.splines.as_ref());
        }
    }
    let mu = mu_sum / n_keep as f64;
    let theta_hat = thetas.mean().unwrap_or_default();
    let y = match &latent.splines {
        Some(sp) => DMatrix::from_columns(&sp.designs.iter().zip(&theta_hat).map(|(b, t)| b * t).collect::<Vec<_>>()),
        None => latent.x.clone(),
    };
    Ok(TransformedData { z: centered(&y, &mu), mu, theta_hat })
}
