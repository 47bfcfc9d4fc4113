//! Command-line front end for the bandwidth/scheduling optimizers and the
//! Monte-Carlo sweep harness.
//!
//! Subcommands: `allocate`, `schedule`, `joint`, `sweep`, `validate`.
//! Exit codes: 0 success, 2 config error, 3 solver infeasibility,
//! 4 validation failure. Set `RRM_LOG=1` for diagnostics on stderr.

mod commands;
mod config;
mod report;
mod validate;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::Overrides;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    /// Bad config file, bad flag value, or an I/O problem.
    Config(String),
    /// The optimizer rejected the problem instance.
    Solver(String),
    /// A validation check failed.
    Validation,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Solver(msg) => write!(f, "{msg}"),
            CliError::Validation => write!(f, "validation failed"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Validation => 4,
        }
    }
}

impl From<feel_rrm::Error> for CliError {
    fn from(err: feel_rrm::Error) -> Self {
        match err {
            feel_rrm::Error::Config(msg) => CliError::Config(msg),
            other => CliError::Solver(other.to_string()),
        }
    }
}

/// True when `RRM_LOG` is set to anything but empty or `0`.
pub fn verbose() -> bool {
    std::env::var("RRM_LOG")
        .map(|v| !v.is_empty() && v != "0")
        .unwrap_or(false)
}

#[derive(Parser)]
#[command(
    name = "feel-rrm",
    version,
    about = "Energy-efficient bandwidth allocation and device scheduling for \
             federated edge learning uploads"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Config file (TOML); defaults apply for anything omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the scenario RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scheduling tradeoff (joules per scheduled device).
    #[arg(long)]
    lambda: Option<f64>,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn overrides(&self, trials: Option<usize>) -> Overrides {
        Overrides {
            seed: self.seed,
            lambda: self.lambda,
            trials,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    Allocation,
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ValidateLevel {
    Fast,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal bandwidth split for the whole population (everyone uploads).
    Allocate(CommonArgs),
    /// Selection priorities on top of the optimal feasible-set allocation.
    Schedule(CommonArgs),
    /// Alternating joint optimizer: relaxed priorities, then a rounded
    /// binary schedule with re-solved bandwidth.
    Joint(CommonArgs),
    /// Sweep the round deadline and emit CSV
    /// (T,energy_proposed,energy_baseline,scheduled_count,reduction_ratio).
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Which proposed policy to sweep.
        #[arg(long, value_enum, default_value = "allocation")]
        mode: SweepMode,
        /// Override the Monte-Carlo trial count.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Compare the closed forms against the brute-force oracles.
    Validate {
        /// fast: a few seconds; full: acceptance-sized instance counts.
        #[arg(value_enum, default_value = "fast")]
        level: ValidateLevel,
        /// Seed for the validation instances.
        #[arg(long, default_value = "1234")]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Allocate(common) => {
            let resolved = config::load(common.config.as_deref(), &common.overrides(None))?;
            commands::allocate(&resolved, common.out.as_deref())
        }
        Command::Schedule(common) => {
            let resolved = config::load(common.config.as_deref(), &common.overrides(None))?;
            commands::schedule(&resolved, common.out.as_deref())
        }
        Command::Joint(common) => {
            let resolved = config::load(common.config.as_deref(), &common.overrides(None))?;
            commands::joint_cmd(&resolved, common.out.as_deref())
        }
        Command::Sweep {
            common,
            mode,
            trials,
        } => {
            let resolved = config::load(common.config.as_deref(), &common.overrides(trials))?;
            commands::sweep(&resolved, mode, common.out.as_deref())
        }
        Command::Validate { level, seed } => {
            let level = match level {
                ValidateLevel::Fast => validate::Level::Fast,
                ValidateLevel::Full => validate::Level::Full,
            };
            validate::run(level, seed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
