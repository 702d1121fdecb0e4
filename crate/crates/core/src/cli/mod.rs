//! Command-line front end.
//!
//! Mask directories ("result trees") follow the CDnet submission layout,
//! `<root>/<category>/<video>/binNNNNNN.png`, with frame numbers matching
//! the dataset's `inNNNNNN` inputs.
//!
//! Exit codes: 0 on success, 2 for usage errors, 3 for data or format
//! errors.

mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::bgs::Algorithm;
use crate::metrics::ReportFormat;
use crate::Error;

pub use config::{parse_config_file, ConfigEntry};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fuselab", version, about = "Foreground mask generation, fusion and scoring")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Plain-text key=value file; keys are long flag names, flags on the
    /// command line win
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice [default: $FUSELAB_SEED or 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-video work; 1 is fully deterministic
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: u32,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset in the CDnet layout
    Synth(SynthArgs),
    /// Run a background-subtraction generator over a video or dataset
    Bgs(BgsArgs),
    /// Fuse result trees by majority vote or a boolean expression
    Vote(VoteArgs),
    /// Train the fusion network and write a checkpoint
    FuseTrain(FuseTrainArgs),
    /// Fuse result trees with a trained checkpoint
    FuseApply(FuseApplyArgs),
    /// Score a result tree against the dataset ground truth
    Eval(EvalArgs),
    /// Render a score file as CSV or markdown
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Dataset root to create
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 200)]
    pub frames: usize,
    /// Moving objects per video
    #[arg(long, default_value_t = 2)]
    pub objects: usize,
    /// Standard deviation of per-frame pixel noise
    #[arg(long, default_value_t = 4.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 1)]
    pub videos: usize,
    #[arg(long, default_value = "synthetic")]
    pub category: String,
    /// First labelled frame (1-based); earlier frames are burn-in
    #[arg(long, default_value_t = 51)]
    pub roi_start: u32,
    /// Also write the three corrupted ground-truth streams as result trees
    /// under this directory
    #[arg(long, value_name = "DIR")]
    pub candidates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BgsArgs {
    #[arg(long, value_parser = parse_algorithm)]
    pub algorithm: Algorithm,
    /// One video directory containing `input/`
    #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
    pub video: Option<PathBuf>,
    /// Dataset root; output is a result tree
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub gmm_alpha: f32,
    #[arg(long, default_value_t = 2.5)]
    pub gmm_lambda: f32,
    #[arg(long, default_value_t = 5)]
    pub gmm_components: usize,
    #[arg(long, default_value_t = 20)]
    pub sc_radius: u8,
    #[arg(long, default_value_t = 2)]
    pub sc_min_matches: usize,
    #[arg(long, default_value_t = 30.0)]
    pub median_threshold: f32,
    #[arg(long, default_value_t = 51)]
    pub median_buffer: usize,
}

#[derive(Debug, Args)]
pub struct VoteArgs {
    /// Result tree, optionally named as NAME=DIR; unnamed trees are A, B, C...
    #[arg(long = "masks", required = true, action = clap::ArgAction::Append)]
    pub masks: Vec<String>,
    /// Boolean expression over tree names, e.g. "(A AND B) OR NOT C";
    /// majority vote when absent
    #[arg(long)]
    pub expr: Option<String>,
    /// 3x3 median filter on the fused mask
    #[arg(long)]
    pub median_filter: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FuseTrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Candidate result trees, in channel order
    #[arg(long = "masks", required = true, action = clap::ArgAction::Append)]
    pub masks: Vec<PathBuf>,
    /// Checkpoint to write
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub input_size: usize,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,32,32")]
    pub channels: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2,2,3,3,3")]
    pub convs: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 4)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub adam_eps: f64,
    /// Minimum labelled foreground fraction for a training frame
    #[arg(long, default_value_t = 0.0)]
    pub min_fg: f64,
    /// Use the first fraction of each video's labelled frames
    #[arg(long, default_value_t = 1.0)]
    pub train_fraction: f64,
    /// Keep every n-th candidate training frame
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub frame_step: u32,
    /// Copy encoder weights from this checkpoint before training
    #[arg(long, value_name = "CHECKPOINT")]
    pub init_encoder: Option<PathBuf>,
    /// Write the per-epoch loss as JSON
    #[arg(long, value_name = "FILE")]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuseApplyArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Candidate result trees, in the order used for training
    #[arg(long = "masks", required = true, action = clap::ArgAction::Append)]
    pub masks: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Result tree to score
    #[arg(long)]
    pub masks: PathBuf,
    /// Write the score tree as JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format, default_value = "markdown")]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Score tree JSON written by `eval`
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, value_parser = parse_format, default_value = "csv")]
    pub format: ReportFormat,
    /// Write here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownAlgorithm(_) | Error::UnknownFormat(_) | Error::Parse { .. } | Error::UnboundName(_) => {
            EXIT_USAGE
        }
        _ => EXIT_DATA,
    }
}

/// Parses `argv` (program name first) and runs the command, writing
/// results to `out` and diagnostics to `err`.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match config::parse_with_config(&argv) {
        Ok(cli) => cli,
        Err(config::ParseFailure::Clap(e)) => {
            let code = if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                EXIT_USAGE
            } else {
                let _ = write!(out, "{}", e.render());
                EXIT_OK
            };
            return code;
        }
        Err(config::ParseFailure::Other(e)) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    match commands::execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// [`run_with`] on the process's standard streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
