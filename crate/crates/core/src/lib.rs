//! Bayesian inference for nonparanormal graphical models.

pub mod bernoulli_gaussian;
pub mod chain;
pub mod cholesky;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod pipeline;
pub mod horseshoe;
pub mod qp;
pub mod regression;
pub mod simulation;
pub mod spline;
pub mod stats;
pub mod tmvn;
pub mod vb;

pub use error::{Error, ErrorKind, Result};
