//! Synthetic regimes, monotone distortions and recovery metrics.

mod distort;
mod experiment;
mod metrics;
mod models;
pub mod stable;

pub use distort::{
    distort, fit_asymmetric_laplace, fit_gumbel, AsymmetricLaplace, Distortion, Family, FittedDistortion, Gumbel,
    GumbelOrientation, StableFit,
};
pub use experiment::{run_experiment, run_replication, ExperimentConfig, ExperimentRow};
pub use metrics::{scaled_l1, score, MetricsReport};
pub use models::{generate_observations, generate_precision, mean_grid, percent_target, ModelKind, PrecisionModel};
