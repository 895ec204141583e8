//! `airlfd` command-line tool: synthetic data, AIRL training, scoring,
//! thresholding, baselines, evaluation and plots, composed through files.

pub mod commands;
pub mod config;
pub mod error;
pub mod files;
pub mod gradcheck;
pub mod pipeline;
pub mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

pub use commands::{run, Command};
pub use config::{ConfigError, ModelKind, RunConfig};
pub use error::{CliError, EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "airlfd", version, about = "Fault-onset detection from AIRL reward models of healthy vibration")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config file (flat object of keys)
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Config overrides, `--key value` or `--key=value` (e.g. `--gamma 0.5 --win-len 16`)
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Generate a synthetic run-to-failure dataset and manifest
    Synth(Common),
    /// Train the AIRL model on the healthy training split
    Train(Common),
    /// Score every trajectory with the trained model and fit the threshold
    Score(Common),
    /// Find the first persistent exceedance in a scores file
    Detect(Common),
    /// Fit and score a baseline (--model iforest|ae|static)
    Baseline(Common),
    /// Compute delay, false alarms, PDC and AUC against the manifest
    Eval(Common),
    /// Finite-difference check of every network
    Gradcheck(Common),
    /// Render the score series as SVG
    Plot(Common),
}

impl Cmd {
    fn split(self) -> (Command, Common) {
        match self {
            Cmd::Synth(c) => (Command::Synth, c),
            Cmd::Train(c) => (Command::Train, c),
            Cmd::Score(c) => (Command::Score, c),
            Cmd::Detect(c) => (Command::Detect, c),
            Cmd::Baseline(c) => (Command::Baseline, c),
            Cmd::Eval(c) => (Command::Eval, c),
            Cmd::Gradcheck(c) => (Command::Gradcheck, c),
            Cmd::Plot(c) => (Command::Plot, c),
        }
    }
}

/// Parses arguments, resolves the config against `env` and runs. Returns the exit code.
pub fn main_with<I, T>(args: I, env: Vec<(String, String)>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let (cmd, common) = cli.command.split();
    let cfg = match RunConfig::resolve(common.config.as_deref(), env, &common.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match run(cmd, &cfg) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
