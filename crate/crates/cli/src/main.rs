mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Verdict;
use error::CliError;
use report::Outputs;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  I/O error
  2  configuration error (parse failure, missing field, unknown or empty law set)
  3  synthesis or numerical error
  4  divergence, projection invariant or step-size violation
  5  property failure (threshold missed, bound violated)
  6  missing upstream artifact (run the named subcommand first)";

#[derive(Parser)]
#[command(name = "dyadic", version, about = "Dyadic adaptive control: synthesis, simulation and benchmarks", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for concurrent runs (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `simulation.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Riccati gain, Gramians, decay certificate, Nehari compensators and the cost-gap constant.
    #[command(after_help = EXIT_CODES)]
    Synthesize(Common),
    /// One closed-loop run: trajectory.csv and cost.toml.
    #[command(after_help = EXIT_CODES)]
    Simulate(Common),
    /// Law comparison tables and seeded cost-gap draws.
    #[command(after_help = EXIT_CODES)]
    Benchmark(Common),
    /// Hankel singular values, compensators and the error profile over frequency.
    #[command(after_help = EXIT_CODES)]
    Nehari(Common),
    /// Small-gain verdict from the synthesize artifacts of the same config.
    #[command(name = "check", alias = "check-small-gain", after_help = EXIT_CODES)]
    Check(Common),
}

fn run(cli: Cli) -> Result<Verdict, CliError> {
    let (name, common) = match &cli.command {
        Command::Synthesize(c) => ("synthesize", c),
        Command::Simulate(c) => ("simulate", c),
        Command::Benchmark(c) => ("benchmark", c),
        Command::Nehari(c) => ("nehari", c),
        Command::Check(c) => ("check", c),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let (mut scenario, bytes) = config::load(&common.config)?;
    if let Some(seed) = common.seed {
        scenario.simulation.seed = seed;
    }
    let seed = scenario.simulation.seed;
    let hash = report::config_hash(&bytes, common.seed);
    let setup = config::Setup::new(scenario)?;
    let mut out = Outputs::new(&common.out, hash, name)?;
    let verdict = match cli.command {
        Command::Synthesize(_) => commands::synthesize(&setup, &mut out)?,
        Command::Simulate(_) => commands::simulate(&setup, &mut out)?,
        Command::Benchmark(_) => commands::benchmark(&setup, seed, &mut out)?,
        Command::Nehari(_) => commands::nehari_report(&setup, &mut out)?,
        Command::Check(_) => commands::check(&setup, &mut out)?,
    };
    out.finish()?;
    Ok(verdict)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail(msg)) => {
            let err = CliError::Property(msg);
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
