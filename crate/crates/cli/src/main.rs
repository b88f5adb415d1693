//! `cltlab`: simulate processes, estimate Wasserstein rates, evaluate
//! dependence conditions and run the inequality suites.

mod commands;
mod config;
mod error;
mod manifest;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Format, Run};
use config::Config;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "cltlab", version, about = "Wasserstein rates and dependence diagnostics for stationary sequences")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; `cltlab-out/<command>` by default.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides `cli.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "all")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate normalized partial sums on the grid and cache them.
    Simulate,
    /// Wasserstein curves, fitted slopes and verdicts for each r.
    Rates,
    /// Evaluate the dependence conditions available for the process.
    Conditions,
    /// Run the inequality suites.
    Verify {
        /// List the suites and exit.
        #[arg(long)]
        list: bool,
    },
    /// Monte Carlo floor of the distance estimator under the null.
    Calibrate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Rates => "rates",
            Command::Conditions => "conditions",
            Command::Verify { .. } => "verify",
            Command::Calibrate => "calibrate",
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Command::Verify { list: true } = cli.command {
        for (name, what) in suites::SUITES {
            println!("{name:<11} {what}");
        }
        return Ok(());
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let path = cli.config.ok_or_else(|| CliError::Config("--config <file> is required".into()))?;
    let config_text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = Config::parse(&config_text)?;
    let command = cli.command.name();
    let run = Run {
        command,
        seed: cli.seed.unwrap_or(cfg.cli.seed),
        out: cli.out.unwrap_or_else(|| PathBuf::from("cltlab-out").join(command)),
        format: cli.format,
        config_text,
        cfg,
    };
    match cli.command {
        Command::Simulate => run.simulate(),
        Command::Rates => run.rates(),
        Command::Conditions => run.conditions(),
        Command::Verify { .. } => run.verify(),
        Command::Calibrate => run.calibrate(),
    }
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
