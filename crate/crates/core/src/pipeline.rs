//! End-to-end estimation for each engine: initialization, sampling or
//! variational fitting, and graph selection.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernoulli_gaussian::{BernoulliGaussianState, GammaResidual};
use crate::chain::{plug_in_transform, EdgeRule, JointChain, LatentState, PosteriorSummary, ThetaMean};
use crate::error::{Error, Result};
use crate::graph::{bic_select, BicCandidate, BicRow, EdgeMatrix};
use crate::horseshoe::HorseshoeState;
use crate::linalg;
use crate::spline::{initialize_transforms, SplineSettings};
use crate::stats::seeded_rng;
use crate::tmvn::HmcSettings;
use crate::vb::{tune_rho, vb_fit, vb_posterior_samples, TunedRho, TuningGrid, VariationalState, VbSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Vb,
    Horseshoe,
    BernoulliGaussian,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Vb => "vb",
            Method::Horseshoe => "horseshoe",
            Method::BernoulliGaussian => "bernoulli_gaussian",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vb" => Ok(Method::Vb),
            "horseshoe" | "hs" => Ok(Method::Horseshoe),
            "bernoulli_gaussian" | "bernoulli-gaussian" | "bg" => Ok(Method::BernoulliGaussian),
            other => Err(Error::config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub method: Method,
    /// `None` models the data as already Gaussian.
    pub transform: Option<SplineSettings>,
    pub n_burn: usize,
    pub n_keep: usize,
    pub c_grid: Vec<f64>,
    /// Also supplies the slab variance of the Bernoulli-Gaussian sampler.
    pub vb: VbSettings,
    pub tuning: TuningGrid,
    pub vb_samples: usize,
    /// Iterations for the plug-in transformation estimate of the
    /// variational engine.
    pub plug_in_burn: usize,
    pub plug_in_keep: usize,
    pub hmc: HmcSettings,
    #[serde(default)]
    pub gamma_residual: GammaResidual,
    pub seed: u64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            method: Method::Horseshoe,
            transform: Some(SplineSettings::default()),
            n_burn: 5000,
            n_keep: 10_000,
            c_grid: vec![0.1, 1.0, 10.0],
            vb: VbSettings::default(),
            tuning: TuningGrid::default(),
            vb_samples: 500,
            plug_in_burn: 500,
            plug_in_keep: 1000,
            hmc: HmcSettings::default(),
            gamma_residual: GammaResidual::Full,
            seed: 0,
        }
    }
}

impl FitSettings {
    pub fn validate(&self) -> Result<()> {
        self.vb.validate()?;
        if self.method == Method::Horseshoe && self.c_grid.is_empty() {
            return Err(Error::config("the c grid is empty"));
        }
        if self.c_grid.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::config("c values must be positive"));
        }
        if self.method != Method::Vb && self.n_keep == 0 {
            return Err(Error::config("at least one posterior sample must be kept"));
        }
        if self.method == Method::Vb && self.vb_samples == 0 {
            return Err(Error::config("at least one variational sample is needed"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: Method,
    pub omega_hat: DMatrix<f64>,
    pub edges: EdgeMatrix,
    pub inclusion: DMatrix<f64>,
    pub selected_c: Option<f64>,
    pub bic_table: Vec<BicRow>,
    pub vlb_trace: Vec<f64>,
    /// `Some(false)` when the variational fit hit its iteration cap.
    pub converged: Option<bool>,
    pub z_mean: DMatrix<f64>,
    pub theta_hat: Option<Vec<DVector<f64>>>,
    pub rho_star: Option<Vec<DVector<f64>>>,
}

fn initial_latent(x: &DMatrix<f64>, transform: &Option<SplineSettings>) -> Result<LatentState> {
    match transform {
        None => LatentState::identity(x.clone()),
        Some(s) => LatentState::with_splines(x.clone(), initialize_transforms(x, s)?),
    }
}

/// Estimate the precision matrix and graph of `x` (rows are observations).
/// With transformations enabled the data must lie in `[0, 1]`.
pub fn fit(x: &DMatrix<f64>, settings: &FitSettings) -> Result<FitResult> {
    settings.validate()?;
    let (n, p) = x.shape();
    if n < 2 || p < 2 {
        return Err(Error::input(format!("need at least 2 rows and 2 columns, got {n} x {p}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("data contain non-finite values"));
    }
    match settings.method {
        Method::Horseshoe => fit_horseshoe(x, settings),
        Method::BernoulliGaussian => fit_bernoulli_gaussian(x, settings),
        Method::Vb => fit_vb(x, settings),
    }
}

fn fit_horseshoe(x: &DMatrix<f64>, settings: &FitSettings) -> Result<FitResult> {
    let (n, p) = x.shape();
    let latent = initial_latent(x, &settings.transform)?;
    let start = latent.initial_factors()?;
    let mut rng = seeded_rng(settings.seed);
    let seeds: Vec<u64> = settings.c_grid.iter().map(|_| rng.random()).collect();
    let runs: Vec<Result<(f64, PosteriorSummary, Option<Vec<DVector<f64>>>)>> = settings
        .c_grid
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(&c, &seed)| {
            let sampler = HorseshoeState::new(&start, c)?;
            let mut chain = JointChain::new(latent.clone(), sampler, settings.hmc, seed)?;
            let mut summary = PosteriorSummary::new(n, p, EdgeRule::WishartThreshold);
            let mut thetas = ThetaMean::default();
            chain.run(settings.n_burn, settings.n_keep, |d| {
                thetas.add(d.splines);
                summary.add_draw(d)
            })?;
            Ok((c, summary, thetas.mean()))
        })
        .collect();
    let mut candidates = Vec::new();
    let mut last_err = None;
    for r in runs {
        match r {
            Ok((c, summary, theta)) => {
                candidates.push(BicCandidate { c, edges: summary.edges()?, z_mean: summary.z_mean()?, payload: (summary, theta) })
            }
            Err(e) => last_err = Some(e),
        }
    }
    if candidates.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::numerical("no chain finished")));
    }
    let selection = bic_select(candidates)?;
    let chosen = selection.chosen;
    let (summary, theta) = chosen.payload;
    Ok(FitResult {
        method: Method::Horseshoe,
        omega_hat: summary.omega_mean()?,
        edges: chosen.edges,
        inclusion: summary.inclusion_probabilities(),
        selected_c: Some(chosen.c),
        bic_table: selection.table,
        vlb_trace: Vec::new(),
        converged: None,
        z_mean: chosen.z_mean,
        theta_hat: theta,
        rho_star: None,
    })
}

fn fit_bernoulli_gaussian(x: &DMatrix<f64>, settings: &FitSettings) -> Result<FitResult> {
    let (n, p) = x.shape();
    let latent = initial_latent(x, &settings.transform)?;
    let tuned = tune_rho(&latent.z, &settings.tuning, &settings.vb)?;
    let mut start = latent.initial_factors()?;
    start.gamma = tuned.w.iter().map(|w| w.iter().map(|v| *v > 0.5).collect()).collect();
    let sampler = BernoulliGaussianState::new(&start, tuned.rho_star.clone(), settings.vb.zeta2)?.with_residual(settings.gamma_residual);
    let mut rng = seeded_rng(settings.seed);
    let mut chain = JointChain::new(latent, sampler, settings.hmc, rng.random())?;
    let mut summary = PosteriorSummary::new(n, p, EdgeRule::Support);
    let mut thetas = ThetaMean::default();
    chain.run(settings.n_burn, settings.n_keep, |d| {
        thetas.add(d.splines);
        summary.add_draw(d)
    })?;
    Ok(FitResult {
        method: Method::BernoulliGaussian,
        omega_hat: summary.omega_mean()?,
        edges: summary.edges()?,
        inclusion: summary.inclusion_probabilities(),
        selected_c: None,
        bic_table: Vec::new(),
        vlb_trace: Vec::new(),
        converged: None,
        z_mean: summary.z_mean()?,
        theta_hat: thetas.mean(),
        rho_star: Some(tuned.rho_star),
    })
}

/// Data the variational engine works on: plug-in transformed and centered,
/// or simply centered without transformations.
fn plug_in_data<R: Rng + ?Sized>(x: &DMatrix<f64>, settings: &FitSettings, rng: &mut R) -> Result<(DMatrix<f64>, Option<Vec<DVector<f64>>>)> {
    let mut latent = initial_latent(x, &settings.transform)?;
    if latent.splines.is_some() {
        let t = plug_in_transform(&mut latent, settings.plug_in_burn, settings.plug_in_keep, settings.hmc, rng)?;
        Ok((t.z, Some(t.theta_hat)))
    } else {
        let mu = linalg::column_means(x);
        let mut z = x.clone();
        for (d, mut col) in z.column_iter_mut().enumerate() {
            col.add_scalar_mut(-mu[d]);
        }
        Ok((z, None))
    }
}

/// The inclusion probabilities the variational engine would use for `x`.
pub fn tune(x: &DMatrix<f64>, settings: &FitSettings) -> Result<TunedRho> {
    settings.validate()?;
    let mut rng = seeded_rng(settings.seed);
    let (z, _) = plug_in_data(x, settings, &mut rng)?;
    tune_rho(&z, &settings.tuning, &settings.vb)
}

fn fit_vb(x: &DMatrix<f64>, settings: &FitSettings) -> Result<FitResult> {
    let (n, p) = x.shape();
    let mut rng = seeded_rng(settings.seed);
    let (z, theta_hat) = plug_in_data(x, settings, &mut rng)?;
    let tuned = tune_rho(&z, &settings.tuning, &settings.vb)?;
    let state = VariationalState::new(n, tuned.rho_star.clone(), tuned.w, settings.vb)?;
    let fitted = vb_fit(&z, state)?;
    let samples = vb_posterior_samples(&fitted.state, settings.vb_samples, &mut rng)?;
    let mut summary = PosteriorSummary::new(n, p, EdgeRule::Support);
    for s in &samples {
        summary.add(&s.omega, &z)?;
    }
    Ok(FitResult {
        method: Method::Vb,
        omega_hat: summary.omega_mean()?,
        edges: summary.edges()?,
        inclusion: summary.inclusion_probabilities(),
        selected_c: None,
        bic_table: Vec::new(),
        vlb_trace: fitted.trace,
        converged: Some(fitted.converged),
        z_mean: z,
        theta_hat,
        rho_star: Some(tuned.rho_star),
    })
}

/// Map each column to `[0, 1]` by `(x - min) / (max - min)`.
pub fn rescale_unit(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = x.clone();
    for (d, mut col) in out.column_iter_mut().enumerate() {
        let lo = col.min();
        let hi = col.max();
        if !(hi > lo) {
            return Err(Error::input(format!("column {} is constant", d + 1)));
        }
        col.apply(|v| *v = ((*v - lo) / (hi - lo)).clamp(0.0, 1.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn chain_data(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seeded_rng(seed);
        let mut x = DMatrix::zeros(n, 4);
        for i in 0..n {
            let a: f64 = rng.sample(StandardNormal);
            let b = 0.8 * a + 0.6 * rng.sample::<f64, _>(StandardNormal);
            x[(i, 0)] = a;
            x[(i, 1)] = b;
            x[(i, 2)] = rng.sample(StandardNormal);
            x[(i, 3)] = rng.sample(StandardNormal);
        }
        x
    }

    fn quick(method: Method) -> FitSettings {
        FitSettings {
            method,
            transform: None,
            n_burn: 200,
            n_keep: 400,
            vb_samples: 200,
            seed: 3,
            ..FitSettings::default()
        }
    }

    #[test]
    fn every_engine_finds_the_strong_edge() {
        let x = chain_data(200, 1);
        for m in [Method::Vb, Method::Horseshoe, Method::BernoulliGaussian] {
            let r = fit(&x, &quick(m)).unwrap();
            assert!(r.edges.has_edge(0, 1), "{m:?}");
            assert!(!r.edges.has_edge(2, 3), "{m:?}");
            assert!(linalg::is_spd(&r.omega_hat));
        }
    }

    #[test]
    fn horseshoe_reports_bic_for_each_c() {
        let x = chain_data(100, 2);
        let r = fit(&x, &quick(Method::Horseshoe)).unwrap();
        assert_eq!(r.bic_table.len(), 3);
        let best = r.bic_table.iter().map(|b| b.bic).fold(f64::INFINITY, f64::min);
        let chosen = r.bic_table.iter().find(|b| Some(b.c) == r.selected_c).unwrap();
        assert_eq!(chosen.bic, best);
    }

    #[test]
    fn fits_are_reproducible() {
        let x = rescale_unit(&chain_data(40, 4)).unwrap();
        for m in [Method::Vb, Method::BernoulliGaussian] {
            let s = FitSettings { transform: Some(SplineSettings::default()), n_burn: 10, n_keep: 20, plug_in_burn: 10, plug_in_keep: 20, ..quick(m) };
            assert_eq!(fit(&x, &s).unwrap(), fit(&x, &s).unwrap());
        }
    }

    #[test]
    fn rescale_maps_to_unit_interval() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 3.0, 0.0, 2.0, 2.0]);
        let u = rescale_unit(&x).unwrap();
        assert_eq!(u.column(0).as_slice(), &[0.0, 1.0, 0.5]);
        assert_eq!(u.column(1).as_slice(), &[0.0, 0.5, 1.0]);
        assert!(rescale_unit(&DMatrix::from_element(2, 2, 1.0)).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Vb, Method::Horseshoe, Method::BernoulliGaussian] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("lasso".parse::<Method>().is_err());
    }
}
