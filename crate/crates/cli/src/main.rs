//! `narrowspace`: train, evaluate, benchmark collision detection, serve
//! teleoperation and inspect tracks.
//!
//! Settings resolve as built-in defaults, then `--config FILE`, then flags.
//! Every run writes the resolved config (with its hash) next to its outputs.
//! Exit codes: 0 success, 1 runtime fault, 2 usage or configuration error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use narrowspace::agents::Algorithm;
use narrowspace::env::RewardMode;
use narrowspace::eval::CollisionSampling;

/// Default root for run outputs when `--out` is not given.
pub const OUT_ENV: &str = "NARROWSPACE_OUT";

#[derive(Debug, Parser)]
#[command(name = "narrowspace", version, about = "Narrow-space self-exploration toolkit")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train agents on one world, one independent run per seed.
    Train(TrainArgs),
    /// Evaluate saved policies on a set of tracks.
    Eval(EvalArgs),
    /// Compare SR, FIRect and FIFR collision detection on sampled contacts.
    BenchCollision(BenchArgs),
    /// Serve live teleoperation over a websocket.
    Serve(ServeArgs),
    /// Print tracks, safety-region tables or the resolved config.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// JSON config file (overrides defaults; flags override it).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, value_parser = parse_from_str::<Algorithm>)]
    pub algo: Option<Algorithm>,
    #[arg(long, value_parser = parse_from_str::<RewardMode>)]
    pub reward: Option<RewardMode>,
    /// Bundled track name or track file.
    #[arg(long)]
    pub world: Option<String>,
    /// Number of seeds (runs use seeds 0..N).
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub fine_tune_episodes: Option<usize>,
    /// Demonstration file for `--algo bc`.
    #[arg(long, value_name = "FILE")]
    pub demos: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Policy checkpoint; repeat to compare several.
    #[arg(long, required = true, value_name = "FILE")]
    pub model: Vec<PathBuf>,
    /// Method label per model (defaults to algorithm and reward mode).
    #[arg(long)]
    pub method: Vec<String>,
    /// Track names, files or glob patterns; repeatable.
    #[arg(long)]
    pub tracks: Vec<String>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// External results (CSV: method,track,outcome,time) merged into the report.
    #[arg(long = "import", value_name = "CSV")]
    pub imports: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SamplingArg {
    FirstContact,
    Band,
}

impl From<SamplingArg> for CollisionSampling {
    fn from(s: SamplingArg) -> Self {
        match s {
            SamplingArg::FirstContact => CollisionSampling::FirstContact,
            SamplingArg::Band => CollisionSampling::Band,
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub world: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub sampling: Option<SamplingArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub world: Option<String>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
    /// Directory where stopped recordings are exported.
    #[arg(long)]
    pub demo_dir: Option<PathBuf>,
    /// Wall-clock step period in milliseconds (defaults to the control interval).
    #[arg(long)]
    pub tick_ms: Option<u64>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[command(subcommand)]
    pub what: InspectWhat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableKind {
    Sr,
    Firect,
    Fifr,
}

#[derive(Debug, Subcommand)]
pub enum InspectWhat {
    /// List the bundled tracks.
    Tracks,
    /// Print a track as a track file.
    Track { spec: String },
    /// Print the scan table for the configured footprint.
    Table {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_enum, default_value = "sr")]
        kind: TableKind,
    },
    /// Print the resolved config and its hash.
    Config {
        #[command(flatten)]
        config: ConfigArg,
    },
}

fn parse_from_str<T>(s: &str) -> Result<T, String>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

/// A failed command and its exit code class.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::BenchCollision(a) => commands::bench_collision(a),
        Command::Serve(a) => commands::serve(a),
        Command::Inspect(a) => commands::inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
