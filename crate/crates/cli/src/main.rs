//! `socnav`: scenario tooling, training, evaluation, agreement reports and
//! heatmaps.
//!
//! Exit status is 0 on success, 1 when the data is at fault and 2 for usage
//! errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "socnav", version, about = "Score the social acceptability of robot motion with graph neural networks")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Hyperparameter JSON.
    #[arg(long, global = true, env = "SOCNAV_CONFIG")]
    pub config: Option<PathBuf>,
    /// Split manifest JSON.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Directory of scenario JSON files.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check scenario files against the schema and semantic rules.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Write the mirrored, rotated and mirrored+rotated variants of a scenario.
    Augment {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Dump the graph built from a scenario.
    Transform {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
    },
    /// Convert legacy recordings into the current scenario format.
    Convert {
        #[arg(long)]
        input_dir: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write synthetic scenarios with rule-based labels.
    Generate {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 5)]
        max_humans: usize,
        #[arg(long, default_value_t = 3)]
        max_objects: usize,
    },
    /// Split the base scenarios of `--data-dir` into train/dev/test.
    Split {
        #[arg(long)]
        dev: usize,
        #[arg(long)]
        test: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; with `--search N`, keep the best of N sampled configurations.
    Train {
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch CSV log.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Train on the four augmented variants of each training scenario.
        #[arg(long)]
        augment: bool,
        #[arg(long)]
        search: Option<usize>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
    },
    /// Mean squared error of a checkpoint on one split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
    },
    /// Histogram of absolute errors of a checkpoint on one split.
    Histogram {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        #[arg(long, value_enum, default_value_t = QuestionArg::Both)]
        question: QuestionArg,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
    },
    /// Rater agreement (weighted kappa) and the human baseline MSE.
    Kappa {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long, value_enum, default_value_t = QuestionArg::Q1)]
        question: QuestionArg,
    },
    /// Sweep the robot over the room and render the scores.
    Heatmap {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        question: QuestionArg,
        /// Metres per cell.
        #[arg(long, default_value_t = 0.25)]
        res: f64,
        /// PNG, or PGM when the name ends in `.pgm`. The grid goes to a sibling `.csv`.
        #[arg(long)]
        out: PathBuf,
        /// Advance speed held during the sweep (m/s).
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        adv: f64,
        /// Rotation speed held during the sweep (rad/s).
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        rot: f64,
        /// Robot heading in every cell (rad); defaults to the recorded one.
        #[arg(long, allow_negative_numbers = true)]
        heading: Option<f64>,
        #[arg(long, default_value_t = 8)]
        pixels_per_cell: u32,
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitArg {
    Train,
    Dev,
    Test,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuestionArg {
    Q1,
    Q2,
    Both,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(e)) => e.exit(),
        Err(commands::Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
