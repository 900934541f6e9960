//! `audioaug` command-line front end.
//!
//! Exit codes: 0 on success, 1 when processing fails, 2 for usage or
//! configuration errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use audioaug::exec::Execution;
use audioaug::protocols::ProtocolKind;
use clap::{Args, Parser, Subcommand};

use crate::config::Config;

#[derive(Debug, Parser)]
#[command(name = "audioaug", version, about = "Audio data augmentation pipeline")]
struct Cli {
    /// TOML configuration file; flags given on the command line take
    /// precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for per-file stages (1 runs sequentially; default
    /// uses every core). Output does not depend on this value.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Log progress at info level (twice for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert WAV files to Gabor spectrograms (.spg plus a PNG rendering).
    Spectrogram(SpectrogramArgs),
    /// Build the augmented training set for one test fold.
    Augment(AugmentArgs),
    /// Assign manifest samples to stratified folds.
    Split(SplitArgs),
    /// Fuse classifier score files by the sum rule.
    Fuse(FuseArgs),
    /// Print per-fold, mean and pooled recognition rates of a score file.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SpectrogramArgs {
    /// A WAV file or a directory of WAV files.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// Output directory (default: `output_dir` from the config).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// CSV manifest with header `sample_id,path,label`.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Augmentation protocol: none, std-img, std-sgn, signal or spectro.
    #[arg(long)]
    pub protocol: ProtocolKind,
    /// Fold assignment written by `split`.
    #[arg(long, value_name = "FILE")]
    pub folds_file: PathBuf,
    /// Fold held out for testing; its samples are never augmented.
    #[arg(long, value_name = "I")]
    pub test_fold: usize,
    /// Master seed (default: `seed` from the config, else 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: `output_dir` from the config).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// CSV manifest with header `sample_id,path,label`.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Number of folds (default: `folds` from the config, else 10).
    #[arg(long)]
    pub k: Option<usize>,
    /// Master seed (default: `seed` from the config, else 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Destination JSON file.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// JSON recipe `{"variant": ..., "classifiers": [...]}`.
    #[arg(long, value_name = "FILE")]
    pub recipe: PathBuf,
    /// Destination CSV for the fused scores.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Score CSV with header `sample_id,fold,true_label,<classes>`.
    #[arg(long, value_name = "FILE")]
    pub scores: PathBuf,
}

/// Resolved global settings shared by every command.
pub struct Context {
    pub config: Config,
    pub exec: Execution,
}

/// A command failure, classified for the exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Processing(String),
}

impl From<audioaug::Error> for Failure {
    fn from(e: audioaug::Error) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Processing(e.to_string())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    let config = match &cli.config {
        Some(p) => Config::load(p).map_err(Failure::Usage)?,
        None => Config::default(),
    };
    let exec = match cli.jobs.or(config.jobs) {
        None | Some(0) => Execution::Auto,
        Some(n) => Execution::with_jobs(n),
    };
    let ctx = Context { config, exec };
    match cli.command {
        Command::Spectrogram(a) => commands::spectrogram(&ctx, &a),
        Command::Augment(a) => commands::augment(&ctx, &a),
        Command::Split(a) => commands::split(&ctx, &a),
        Command::Fuse(a) => commands::fuse(&a),
        Command::Eval(a) => commands::eval(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Processing(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
