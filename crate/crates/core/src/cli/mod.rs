//! The `covert-ct` command line: argument parsing, config loading and the
//! subcommands. Exit codes: 0 success, 2 schema or usage error, 3 runtime
//! error, 4 a verdict gate failed.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::RunOptions;
pub use commands::Outcome;
use config::{keys_help, IcdDemoConfig, KnownLimitConfig, Overrides, PsdCheckConfig, TvConfig, UnknownLimitConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_VERDICT: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Schema(String),
    #[error(transparent)]
    Runtime(#[from] crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => EXIT_SCHEMA,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "covert-ct", version, about = "Covert communication with an uninformed jammer: simulations and exact analysis")]
pub struct Cli {
    /// JSON config file; keys as listed in each subcommand's help.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the `seed` key).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Trials per hypothesis (overrides the `trials` key).
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    pub out: PathBuf,
    /// Override one config key; the value is parsed as JSON, else taken as a string.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Also write long-format `series,x,y` CSV for plotting.
    #[arg(long, global = true)]
    pub plot_data: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// ROC curves of the power detector and the interference-cancellation detector.
    IcdDemo,
    /// Pulse-count test error sums versus n for the known-path-loss construction.
    KnownLimit,
    /// Level-count test error sums versus lambda, plus the jammer design rule.
    UnknownLimit,
    /// Total variation distance between Pois(lambda) and Pois(lambda) + 1.
    Tv {
        /// Overrides the `lambda` key.
        lambda: Option<f64>,
    },
    /// Averaged periodogram of the construction against the raised-cosine shape.
    PsdCheck,
}

fn command_with_key_help() -> clap::Command {
    Cli::command()
        .mut_subcommand("icd-demo", |c| c.after_help(keys_help::<IcdDemoConfig>()))
        .mut_subcommand("known-limit", |c| c.after_help(keys_help::<KnownLimitConfig>()))
        .mut_subcommand("unknown-limit", |c| c.after_help(keys_help::<UnknownLimitConfig>()))
        .mut_subcommand("tv", |c| c.after_help(keys_help::<TvConfig>()))
        .mut_subcommand("psd-check", |c| c.after_help(keys_help::<PsdCheckConfig>()))
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match command_with_key_help()
        .try_get_matches_from(args)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.message);
            if outcome.passed {
                EXIT_OK
            } else {
                eprintln!("verdict: FAILED");
                EXIT_VERDICT
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let mut ov = Overrides {
        seed: cli.seed,
        trials: cli.trials,
        set: cli.set.clone(),
    };
    let file = cli.config.as_deref();
    let ctx = commands::Context {
        out: cli.out.clone(),
        plot_data: cli.plot_data,
        opts: match cli.workers {
            Some(n) => RunOptions::with_workers(n),
            None => RunOptions::default(),
        },
    };
    match &cli.command {
        Command::IcdDemo => commands::icd_demo(&ctx, &config::load(file, &ov)?),
        Command::KnownLimit => commands::known_limit(&ctx, &config::load(file, &ov)?),
        Command::UnknownLimit => commands::unknown_limit(&ctx, &config::load(file, &ov)?),
        Command::Tv { lambda } => {
            if let Some(l) = lambda {
                ov.set.push(format!("lambda={l}"));
            }
            commands::tv(&ctx, &config::load(file, &ov)?)
        }
        Command::PsdCheck => commands::psd_check(&ctx, &config::load(file, &ov)?),
    }
}
