mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use actok_core::eval::ExecMode;
use actok_core::DctAxis;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Action tokenization toolkit: demo generation, codec fitting, policies
/// and closed-loop evaluation on a toy tabletop.
#[derive(Debug, Parser)]
#[command(name = "actok", version)]
struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for every written file.
    #[arg(long, global = true, env = "ACTOK_OUT_DIR")]
    out_dir: Option<PathBuf>,

    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitKind {
    Fast,
    Binning,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    /// Nearest-neighbour memory built by `build-policy`.
    Knn,
    /// Scripted expert chunks, encoded with the codec.
    Expert,
    /// Full-speed approach at a fixed height; a chunking stress test.
    MaxDelta,
}

#[derive(Debug, Args)]
pub struct CodecArgs {
    /// Chunk length N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Fixed quantization scale.
    #[arg(long, conflicts_with = "target_error")]
    pub scale: Option<f64>,
    /// Calibrate the scale to this p99 error in normalized units.
    #[arg(long)]
    pub target_error: Option<f64>,
    #[arg(long)]
    pub clamp: Option<u32>,
    #[arg(long)]
    pub max_vocab: Option<u32>,
    /// across-dims or across-time.
    #[arg(long)]
    pub axis: Option<DctAxis>,
    /// Bins per dimension for the binning tokenizer.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Chunk stride over each trajectory.
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll out the scripted expert and write a trajectory dataset.
    GenDemos {
        /// Built-in suite name or suite JSON file.
        #[arg(long)]
        suite: Option<String>,
        #[arg(long)]
        count: Option<usize>,
        /// Idle steps appended after success.
        #[arg(long)]
        settle: Option<usize>,
        #[arg(short, long, default_value = "demos.jsonl")]
        output: PathBuf,
    },
    /// Fit the chunk codec and/or the binning tokenizer on a dataset.
    Fit {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        kind: FitKind,
        #[command(flatten)]
        codec: CodecArgs,
    },
    /// Tokenize a dataset with a fitted model.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(short, long, default_value = "tokens.jsonl")]
        output: PathBuf,
    },
    /// Turn token records back into actions.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(short, long, default_value = "decoded.jsonl")]
        output: PathBuf,
    },
    /// Build a nearest-neighbour policy memory from demonstrations.
    BuildPolicy {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(short, long, default_value = "policy.json")]
        output: PathBuf,
    },
    /// Run a suite closed loop and write a success-rate report.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Policy memory; required for the knn policy.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "knn")]
        policy_kind: PolicyKind,
        #[arg(long)]
        suite: Option<String>,
        #[arg(long)]
        mode: Option<ExecMode>,
        #[arg(long)]
        trials: Option<usize>,
        /// Keep per-step rollout logs in the episode file.
        #[arg(long)]
        logs: bool,
        /// Base name for report.json, report.txt and episodes.jsonl.
        #[arg(long, default_value = "report")]
        name: String,
    },
    /// Print a saved report, optionally next to a second one.
    Report {
        input: PathBuf,
        #[arg(long)]
        against: Option<PathBuf>,
    },
    /// Recompute the averages of the published result tables.
    VerifyTables {
        #[arg(long)]
        json: bool,
    },
    /// Write a built-in suite as JSON, to edit or pin.
    ExportSuite {
        name: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
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

    let ctx = match commands::Context::new(cli.config.as_deref(), cli.out_dir, cli.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    match commands::run(ctx, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
