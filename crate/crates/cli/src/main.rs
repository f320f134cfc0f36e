use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

#[derive(Parser, Debug)]
#[command(name = "spectramoment", version)]
#[command(about = "Spectral estimation under generalized moment constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Quadrature grid size (power of two)
    #[arg(long, env = "SPECTRAMOMENT_GRID_N", default_value_t = spectramoment::numerics::DEFAULT_GRID_N)]
    pub grid_n: usize,

    /// Write the main output here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report whether a covariance is attainable by the filter bank
    Check {
        #[arg(long)]
        fb: PathBuf,
        #[arg(long)]
        sigma: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Spectral factorization of G*ΛG through the Riccati equation
    Factorize {
        #[arg(long)]
        fb: PathBuf,
        #[arg(long)]
        lambda: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a density from the prior family to a state covariance
    Estimate(EstimateArgs),
    /// Simulate a scenario and estimate the state covariance
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the seed stored in the scenario file
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the projected covariance as a bare matrix file
        #[arg(long)]
        sigma_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Test the prior condition on random factor pairs
    Probe {
        #[arg(long)]
        fb: PathBuf,
        #[arg(long)]
        prior: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long)]
        seed: u64,
        /// JSON file `{"C": ..., "V": ...}` probed in addition to the random pairs
        #[arg(long)]
        witness: Option<PathBuf>,
        /// Relative gap tolerated before the condition counts as violated
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the density for a given Λ on the grid
    Spectrum {
        #[arg(long)]
        fb: PathBuf,
        #[arg(long)]
        prior: PathBuf,
        #[arg(long)]
        lambda: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[arg(long)]
    pub fb: PathBuf,
    #[arg(long)]
    pub prior: PathBuf,
    #[arg(long)]
    pub sigma: PathBuf,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub multistart: usize,
    /// Required when --multistart exceeds 1
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the fitted spectrum as CSV here
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { fb, sigma, common } => commands::check(&fb, &sigma, &common),
        Command::Factorize { fb, lambda, common } => commands::factorize(&fb, &lambda, &common),
        Command::Estimate(args) => commands::estimate(&args),
        Command::Simulate { scenario, seed, sigma_out, common } => {
            commands::simulate(&scenario, seed, sigma_out.as_deref(), &common)
        }
        Command::Probe { fb, prior, trials, seed, witness, tol, common } => {
            commands::probe(&fb, &prior, trials as usize, seed, witness.as_deref(), tol, &common)
        }
        Command::Spectrum { fb, prior, lambda, common } => commands::spectrum(&fb, &prior, &lambda, &common),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
