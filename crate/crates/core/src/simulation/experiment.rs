use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distort::{distort, Family};
use super::metrics::{score, MetricsReport};
use super::models::{generate_observations, generate_precision, ModelKind, PrecisionModel};
use crate::error::{Error, Result};
use crate::graph::EdgeMatrix;
use crate::pipeline::{fit, rescale_unit, FitSettings, Method};
use crate::spline::SplineSettings;
use crate::stats::seeded_rng;

fn default_replications() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// One simulation design. Every replication draws its own data (and, for
/// random models, its own precision matrix) from a seed derived from
/// `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub p: usize,
    pub n: usize,
    /// Distortion applied to the Gaussian draws; `None` keeps them.
    #[serde(default)]
    pub family: Option<Family>,
    pub method: Method,
    /// Estimate monotone transformations (data are rescaled to `[0, 1]`).
    #[serde(default = "default_true")]
    pub transform: bool,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub c_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub n_burn: Option<usize>,
    #[serde(default)]
    pub n_keep: Option<usize>,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl ExperimentConfig {
    pub fn fit_settings(&self, seed: u64) -> FitSettings {
        let mut s = FitSettings { method: self.method, seed, ..FitSettings::default() };
        s.transform = self.transform.then(SplineSettings::default);
        if let Some(c) = &self.c_grid {
            s.c_grid = c.clone();
        }
        if let Some(b) = self.n_burn {
            s.n_burn = b;
        }
        if let Some(k) = self.n_keep {
            s.n_keep = k;
        }
        if let Some(e) = self.epsilon {
            s.vb.epsilon = e;
        }
        s
    }

    /// Seeds of the replications, in order.
    pub fn replication_seeds(&self) -> Vec<u64> {
        let mut rng = seeded_rng(self.seed);
        (0..self.replications).map(|_| rng.random()).collect()
    }

    fn family_label(&self) -> String {
        match &self.family {
            None => "none".into(),
            Some(f) => serde_json::to_string(f).unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub replication: usize,
    pub seed: u64,
    pub model: String,
    pub p: usize,
    pub n: usize,
    pub family: String,
    pub method: String,
    pub transform: bool,
    #[serde(flatten)]
    pub metrics: MetricsReport,
    pub selected_c: Option<f64>,
    pub converged: Option<bool>,
    pub seconds: f64,
}

fn model_label(kind: &ModelKind) -> String {
    match kind {
        ModelKind::Circle => "circle".into(),
        ModelKind::Ar2 => "ar2".into(),
        ModelKind::Percent { level } => format!("percent_{level}"),
    }
}

/// Run one replication with the given seed.
pub fn run_replication(config: &ExperimentConfig, replication: usize, seed: u64) -> Result<ExperimentRow> {
    let start = Instant::now();
    let mut rng = seeded_rng(seed);
    let omega = generate_precision(&PrecisionModel { kind: config.model, p: config.p, seed: rng.random() })?;
    let (y, _) = generate_observations(&omega, config.n, &mut rng)?;
    let x = match &config.family {
        Some(f) => distort(&y, f)?.x,
        None => y,
    };
    let x = if config.transform { rescale_unit(&x)? } else { x };
    let result = fit(&x, &config.fit_settings(rng.random()))?;
    let metrics = score(&result.edges, &EdgeMatrix::support(&omega), &result.omega_hat, &omega)?;
    Ok(ExperimentRow {
        replication,
        seed,
        model: model_label(&config.model),
        p: config.p,
        n: config.n,
        family: config.family_label(),
        method: config.method.name().into(),
        transform: config.transform,
        metrics,
        selected_c: result.selected_c,
        converged: result.converged,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// All replications, run in parallel, returned in replication order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    if config.replications == 0 {
        return Err(Error::config("at least one replication is needed"));
    }
    config.fit_settings(0).validate()?;
    config
        .replication_seeds()
        .into_par_iter()
        .enumerate()
        .map(|(r, seed)| run_replication(config, r, seed))
        .collect()
}
