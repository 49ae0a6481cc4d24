mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use npgm::error::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "npgm", version, about = "Bayesian structure learning for nonparanormal graphical models")]
struct Cli {
    /// Cap on worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the precision matrix and graph of a data set.
    Fit(FitArgs),
    /// Tune the edge inclusion probabilities only.
    Tune(FitArgs),
    /// Draw a synthetic data set with known precision matrix.
    Simulate(SimulateArgs),
    /// Compare an estimated graph against the truth.
    Score(ScoreArgs),
    /// Run a replicated simulation study from a TOML or JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Args, Clone)]
pub struct FitArgs {
    /// CSV with one observation per row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, default_value = "horseshoe")]
    pub method: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5000)]
    pub burnin: usize,
    /// Posterior draws kept after burn-in.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10")]
    pub c_grid: Vec<f64>,
    /// Relative change in the bound that stops the variational fit.
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Use the data as given instead of rescaling columns to [0, 1].
    #[arg(long)]
    pub no_rescale: bool,
    /// Treat the data as Gaussian (no transformations).
    #[arg(long)]
    pub identity: bool,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 10.0)]
    pub zeta2: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub tau0: f64,
    /// Predictors removed from the response in the Bernoulli-Gaussian
    /// indicator update.
    #[arg(long, value_enum, default_value = "full")]
    pub gamma_residual: GammaResidualArg,
    /// Draws from the variational posterior.
    #[arg(long, default_value_t = 500)]
    pub vb_samples: usize,
    /// Resolved settings from an earlier manifest; replaces the
    /// estimation flags above.
    #[arg(long)]
    pub settings: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum GammaResidualArg {
    Full,
    LaterOnly,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Circle,
    Ar2,
    Percent,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    None,
    AsymmetricLaplace,
    Gumbel,
    GumbelMin,
    Stable,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub n: usize,
    /// Nonzero off-diagonal rate of the percent model (default by p).
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long, value_enum, default_value = "none")]
    pub family: FamilyArg,
    /// Fix the stable shape and fit only location and scale.
    #[arg(long, requires = "stable_beta")]
    pub stable_alpha: Option<f64>,
    #[arg(long, requires = "stable_alpha")]
    pub stable_beta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Square matrix; nonzero off-diagonal entries are edges.
    #[arg(long)]
    pub estimated: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Estimated precision matrix for the scaled L1 loss.
    #[arg(long, requires = "omega_true")]
    pub omega_hat: Option<PathBuf>,
    #[arg(long, requires = "omega_hat")]
    pub omega_true: Option<PathBuf>,
    /// Defaults to standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Results CSV; rows are appended when it exists.
    #[arg(long)]
    pub output: PathBuf,
}

pub enum Outcome {
    Done,
    NotConverged,
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Input => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::NonConvergence => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot set thread count: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Tune(a) => commands::tune(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Score(a) => commands::score(&a),
        Command::Experiment(a) => commands::experiment(&a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("warning: variational fit stopped at the iteration cap");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
