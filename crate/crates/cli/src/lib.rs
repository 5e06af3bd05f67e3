//! Command-line front end: `analyze`, `simulate`, `synthesize`, `tune` and
//! `reproduce-example`. Human tables go to stdout; `--out` writes the same
//! content as JSON.

pub mod commands;
pub mod error;
pub mod model;
pub mod reproduce;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lqgvar::monte_carlo::Scheme;
use lqgvar::tuner::Objective;
use lqgvar::Horizon;
use serde::Serialize;

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "lqgvar", version, about = "Mean and variance of LQG quadratic costs")]
pub struct Cli {
    /// Worker threads for simulation (default: all cores).
    #[arg(long, global = true, env = "LQGVAR_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic cost mean and variance of a system model.
    Analyze(AnalyzeArgs),
    /// Monte Carlo cost statistics of a system model.
    Simulate(SimulateArgs),
    /// Riccati feedback and Kalman gains of a plant, and its closed loop.
    Synthesize(SynthesizeArgs),
    /// Gradient descent on the feedback gain of a plant.
    Tune(TuneArgs),
    /// The two-state example: optimal versus minimum-variance feedback.
    ReproduceExample(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Lyapunov,
    Expm,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Mean,
    Variance,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Mean => Objective::Mean,
            ObjectiveArg::Variance => Objective::Variance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Exact,
    EulerMaruyama,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Exact => Scheme::Exact,
            SchemeArg::EulerMaruyama => Scheme::EulerMaruyama,
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub model: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: MethodArg,
    /// Overrides the model's horizon: seconds or `inf`.
    #[arg(long, value_parser = model::parse_horizon)]
    pub horizon: Option<Horizon>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub model: PathBuf,
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(2..))]
    pub paths: u64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Horizon in seconds; required when the model's horizon is infinite.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report the fraction of paths whose cost exceeds this value.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum, default_value = "exact")]
    pub scheme: SchemeArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    pub plant: PathBuf,
    /// Ignore any measurement model and close the loop on the full state.
    #[arg(long)]
    pub full_state: bool,
    /// Where to write the closed-loop system model.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    pub plant: PathBuf,
    #[arg(long, value_enum, default_value = "variance")]
    pub objective: ObjectiveArg,
    /// Initial gain, row-major and comma separated (default: Riccati gain).
    #[arg(long, allow_hyphen_values = true)]
    pub init: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub step_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub fd_step: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long, default_value_t = 250_000, value_parser = clap::value_parser!(u64).range(2..))]
    pub paths: u64,
    /// JSON file with any of `V`, `mu0`, `Sigma0` replacing the defaults.
    #[arg(long)]
    pub assumption_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1500.0)]
    pub threshold: f64,
    #[arg(long = "T", default_value_t = 20.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Points on the segment between the two gains.
    #[arg(long, default_value_t = 11, value_parser = clap::value_parser!(u64).range(2..))]
    pub landscape_points: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return 1;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Analyze(a) => commands::analyze(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Synthesize(a) => commands::synthesize(a),
        Command::Tune(a) => commands::tune(a),
        Command::ReproduceExample(a) => reproduce::reproduce_example(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
