use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod generate;
mod hardcase;
mod output;
mod ratio;
mod run;
mod steps;
mod sweep;

/// Coordinate descent experiments: uniform, steepest and approximate-steepest
/// selection on least-squares problems.
#[derive(Parser, Debug)]
#[command(name = "ascd", version, args_override_self = true)]
struct Cli {
    /// Seed for every random choice of the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output directory.
    #[arg(long, global = true, env = "ASCD_OUT_DIR", default_value = ".")]
    out: PathBuf,

    /// Worker threads for sweeps (0: one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// JSON file whose keys mirror the flags; flags on the command line win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic sparse dataset in svmlight format.
    Generate(generate::GenerateArgs),
    /// One descent run, traced to CSV.
    Run(run::RunArgs),
    /// Cross-product of runs over rules, oracles, epsilons, seeds and inits.
    Sweep(sweep::SweepArgs),
    /// Steepest descent on the adversarial quadratic.
    Hardcase(hardcase::HardcaseArgs),
    /// Monte-Carlo simulation of the active-set ratio.
    RatioSim(ratio::RatioArgs),
}

pub struct Globals {
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
}

/// A check the command was asked to verify did not hold.
#[derive(Debug)]
pub struct VerificationFailed(pub String);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification failed: {}", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let argv: Vec<OsString> = std::env::args_os().collect();
    let argv = match config::splice(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    let globals = Globals {
        seed: cli.seed,
        out: cli.out,
        jobs: cli.jobs,
    };

    let result = match cli.command {
        Command::Generate(args) => generate::execute(&args, &globals),
        Command::Run(args) => run::execute(&args, &globals),
        Command::Sweep(args) => sweep::execute(&args, &globals),
        Command::Hardcase(args) => hardcase::execute(&args, &globals),
        Command::RatioSim(args) => ratio::execute(&args, &globals),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
