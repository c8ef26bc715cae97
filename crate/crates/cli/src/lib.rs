//! Command-line front end: data generation, training, evaluation, planning,
//! the task suite and scene rendering.

pub mod commands;
pub mod config;
pub mod fixtures;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_STRICT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "foresight",
    version,
    about = "Affordance-based planning with a learned forward model"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command. Values given here override `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; flags below take precedence over it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Image side in pixels (16, 32 or 64).
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    /// Maximum plan length.
    #[arg(long, global = true)]
    pub n_max: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
    /// Checkpoint for the neural backend.
    #[arg(long, global = true, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Recognition confidence cutoff.
    #[arg(long, global = true)]
    pub cutoff: Option<f64>,
    /// Exit with status 2 when an acceptance threshold is missed.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Goal image (RGBDF file).
    #[arg(long, global = true, value_name = "FILE")]
    pub goal: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub polarity: Option<PolarityArg>,
    /// Channels compared by the goal loss.
    #[arg(long, global = true, value_enum)]
    pub channels: Option<ChannelsArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Oracle,
    Neural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolarityArg {
    Pos,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelsArg {
    Rgb,
    Rgbd,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a dataset of random action sequences.
    GenData {
        /// Number of sequences.
        #[arg(long)]
        sequences: Option<usize>,
    },
    /// Train the forward model and write `net.ckpt` and `train_report.json`.
    Train {
        /// Dataset directory from `gen-data`; generated in memory if omitted.
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        /// Training budget in batches.
        #[arg(long)]
        batches: Option<usize>,
    },
    /// Score recognition or prediction.
    Eval {
        #[arg(value_enum)]
        target: EvalTarget,
        /// Dataset directory (prediction only); generated in memory if omitted.
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
    },
    /// Plan from a scene towards (or away from) a goal image.
    Plan {
        /// Scene JSON file.
        #[arg(long, value_name = "FILE")]
        scene: PathBuf,
    },
    /// Run the ten-task suite.
    Tasks {
        /// Directory with task fixtures; the built-in ones by default.
        #[arg(long, value_name = "DIR")]
        fixtures: Option<PathBuf>,
        /// Comma-separated task numbers to run.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
    /// Render a scene to RGBDF and PPM.
    Render {
        #[arg(long, value_name = "FILE")]
        scene: PathBuf,
    },
    /// Write the task fixtures to `--out`.
    ExportTasks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalTarget {
    Recognition,
    Prediction,
}

/// Parse arguments, run the command and return the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match commands::execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
