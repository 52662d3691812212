use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ssanova::simulate::SimOptions;
use ssanova::{CliError, RunConfig, DEFAULT_SEED};

#[derive(Parser)]
#[command(name = "ssanova", version, about = "Smoothing-spline ANOVA models: fit, tune, predict, simulate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TrainArgs {
    /// Training data (CSV with header)
    #[arg(long)]
    data: PathBuf,
    /// Model spec (JSON)
    #[arg(long)]
    spec: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Override the spec's family
    #[arg(long)]
    family: Option<String>,
}

impl From<TrainArgs> for RunConfig {
    fn from(a: TrainArgs) -> Self {
        RunConfig { data: a.data, spec: a.spec, out: a.out, seed: a.seed, family: a.family }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Tune and fit; writes fit.json, components/ and diagnostics.csv
    Fit(TrainArgs),
    /// Smoothing-parameter search only; writes tune.json and diagnostics.csv
    Tune(TrainArgs),
    /// Evaluate a fit at new points; writes predictions.csv
    Predict {
        #[arg(long)]
        fit: PathBuf,
        /// Points to predict at (CSV with the training covariate columns)
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Add Bayesian confidence bands at this level (gaussian fits)
        #[arg(long)]
        level: Option<f64>,
    },
    /// Write component grids of a fit
    Components {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset with data.csv, spec.json and truth.json
    Simulate {
        /// gaussian, bernoulli, polychotomous, mvb or msvm
        #[arg(long)]
        generator: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        n: Option<usize>,
        /// Noise standard deviation (gaussian)
        #[arg(long)]
        sigma: Option<f64>,
        /// Between-eye log odds ratio (mvb)
        #[arg(long)]
        alpha: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(a) => {
            let out = a.out.clone();
            let fit = ssanova::run_fit(&a.into())?;
            log::info!("lambda = {:.6e}; wrote {}", fit.lambda, out.join("fit.json").display());
        }
        Command::Tune(a) => {
            let report = ssanova::run_tune(&a.into())?;
            log::info!("lambda = {:.6e}", report.lambda);
        }
        Command::Predict { fit, data, out, level } => {
            ssanova::run_predict(&fit, &data, &out, level)?;
        }
        Command::Components { fit, out } => {
            ssanova::run_components(&fit, &out)?;
        }
        Command::Simulate { generator, out, seed, n, sigma, alpha } => {
            ssanova::run_simulate(&SimOptions { generator, seed, n, sigma, alpha }, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
