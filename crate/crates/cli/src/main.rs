mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Tracks people by fusing camera detections with phone RSSI.
#[derive(Debug, Parser)]
#[command(name = "fusetrack", version)]
struct Cli {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scene seed (simulate) or the first sweep seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scene and write its ground truth, detections and RSSI.
    Simulate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Track one device through a detection log, window by window.
    Track(TrackArgs),
    /// Score trajectory files against simulator ground truth.
    Eval(EvalArgs),
    /// Run a simulator experiment over a range of settings.
    Sweep(SweepArgs),
    /// Print the effective configuration.
    Config {
        /// Print the built-in defaults instead.
        #[arg(long)]
        print_defaults: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Ravel,
    Vision,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Camera detections, JSONL.
    #[arg(long)]
    detections: PathBuf,
    /// RSSI samples of the tracked device, JSONL (ravel mode).
    #[arg(long)]
    rssi: Option<PathBuf>,
    /// Access point positions, JSON array or JSONL (ravel mode).
    #[arg(long)]
    basestations: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Ravel)]
    mode: Mode,
    /// `frame,x,y` of the target's first detection (vision mode).
    #[arg(long, value_parser = commands::parse_hint)]
    init_hint: Option<commands::GlobalHint>,
    /// Overrides `window.window_size_frames`.
    #[arg(long)]
    window_frames: Option<usize>,
    /// Overrides `window.stride_frames`.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Trajectory JSONL files, or directories holding `trajectory_*.jsonl`.
    #[arg(long, required = true, num_args = 1..)]
    est: Vec<PathBuf>,
    #[arg(long)]
    truth: PathBuf,
    /// Walker whose ground truth is compared.
    #[arg(long, default_value_t = 0)]
    walker: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    WindowSize,
    RssiRate,
    ModelGrid,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    kind: SweepKind,
    /// Window lengths (frames) or RSSI rates (Hz); defaults per kind.
    #[arg(long, value_delimiter = ',')]
    points: Option<Vec<f64>>,
    /// Number of consecutive seeds, starting at `--seed`.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Window length for the RSSI-rate sweep.
    #[arg(long)]
    window_frames: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
