mod commands;
mod error;
mod output;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{CliError, CliResult};

/// Hyperbolic exponential families: divergences, sampling, Monte Carlo
/// estimation and mixture fitting.
///
/// Parameters are JSON: `[[a,b],[b,c]]` or `{"a":..,"b":..,"c":..}` for the
/// Poincaré family, `[t0,..,td]` for the hyperboloid family.
#[derive(Debug, Parser)]
#[command(name = "hyperstat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Measure {
    Kl,
    Hellinger,
    Neyman,
    Jeffreys,
    SkewJensen,
    Chernoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum McMeasure {
    Tv,
    Kl,
    Hellinger,
    Neyman,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum McMethod {
    Plugin,
    Mc1Logistic,
    Mc1T7,
    Mc2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Poincare,
    Hyperboloid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum What {
    Param,
    Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    UpperHalf,
    Hyperboloid,
    Disk,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form divergence between two parameters of one family.
    Divergence {
        #[arg(long, value_enum)]
        measure: Measure,
        #[arg(long)]
        theta: String,
        #[arg(long)]
        theta2: String,
        /// Skew for skew-jensen (default 0.5).
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Differential entropy and entropy relative to the invariant measure.
    Entropy {
        #[arg(long)]
        theta: String,
    },
    /// Fisher information matrix in the natural coordinates.
    Fim {
        #[arg(long)]
        theta: String,
    },
    /// Maximal invariant triple of a parameter pair.
    Invariant {
        #[arg(long)]
        theta: String,
        #[arg(long)]
        theta2: String,
    },
    /// Exact draws as CSV.
    Sample {
        #[arg(long)]
        theta: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimate of an f-divergence between planar distributions.
    Estimate {
        #[arg(long, value_enum)]
        measure: McMeasure,
        #[arg(long, value_enum)]
        method: McMethod,
        #[arg(long)]
        theta: String,
        #[arg(long)]
        theta2: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Fixed proposal scale for MC1 (optimized on a pilot run otherwise).
        #[arg(long)]
        sigma: Option<f64>,
        /// Radial truncation for MC2.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 1)]
        shards: usize,
        /// Compare with the closed form; exit 1 if more than 4 standard errors away.
        #[arg(long)]
        verify: bool,
    },
    /// Fit a k-component mixture by EM.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a parameter or a point between models.
    Convert {
        #[arg(long, value_enum)]
        what: What,
        #[arg(long, value_enum)]
        from: Model,
        #[arg(long, value_enum)]
        to: Model,
        #[arg(long)]
        value: String,
    },
}

/// Caps the global worker pool at `HYPERSTAT_THREADS`.
fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("HYPERSTAT_THREADS") else {
        return Ok(());
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Invalid(format!("cannot start {n} worker threads: {e}")))
        }
        _ => Err(CliError::Invalid(format!("HYPERSTAT_THREADS must be a positive integer, got {raw:?}"))),
    }
}

fn run(cli: Cli) -> CliResult<i32> {
    configure_threads()?;
    match cli.command {
        Command::Divergence {
            measure,
            theta,
            theta2,
            alpha,
        } => commands::divergence(measure, &theta, &theta2, alpha),
        Command::Entropy { theta } => commands::entropy(&theta),
        Command::Fim { theta } => commands::fim(&theta),
        Command::Invariant { theta, theta2 } => commands::invariant(&theta, &theta2),
        Command::Sample { theta, n, seed, out } => commands::sample(&theta, n, seed, out.as_deref()),
        Command::Estimate {
            measure,
            method,
            theta,
            theta2,
            n,
            seed,
            sigma,
            eps,
            shards,
            verify,
        } => commands::estimate(commands::EstimateArgs {
            measure,
            method,
            theta: &theta,
            theta2: &theta2,
            n,
            seed,
            sigma,
            eps,
            shards,
            verify,
        }),
        Command::Fit {
            input,
            family,
            k,
            seed,
            out,
        } => commands::fit(&input, family, k, seed, out.as_deref()),
        Command::Convert { what, from, to, value } => commands::convert(what, from, to, &value),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("hyperstat: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
