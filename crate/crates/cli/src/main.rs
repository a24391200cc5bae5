use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use smiley_core::lottery::TruthPool;
use smiley_core::tessim::SamplingMode;
use smiley_core::{Architecture, FeatureScheme, LossKind, SplitStrategy};

mod commands;
mod config;

/// Simulate tea-leaf coin readings, train classifiers on them, and audit
/// where their accuracy comes from.
#[derive(Parser, Debug)]
#[command(name = "smiley", version)]
pub struct Cli {
    /// Master seed; overrides every seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON run configuration; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Only print warnings and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a dataset and write PGMs, manifest.csv and config.json
    Generate(GenerateArgs),
    /// Train a model on a dataset and write a checkpoint
    Train(TrainArgs),
    /// Score a checkpoint, or check an accuracy claim given as counts
    Eval(EvalArgs),
    /// Run the parity-leak audit on a dataset
    Audit(AuditArgs),
    /// Lottery probability arithmetic and Monte Carlo
    Lottery(LotteryArgs),
    /// Full pipeline: dataset, models, audit, claimed vs measured report
    Repro(ReproArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub rounds: Option<u64>,
    /// Pixels toggled per round.
    #[arg(long = "k")]
    pub k_change: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long, value_enum)]
    pub sampling: Option<Sampling>,
    #[arg(long)]
    pub tea_fraction: Option<f64>,
    #[arg(long)]
    pub blobs: Option<u32>,
    /// Seed of the starting image.
    #[arg(long)]
    pub base_seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Sampling {
    Distinct,
    WithReplacement,
}

impl From<Sampling> for SamplingMode {
    fn from(s: Sampling) -> Self {
        match s {
            Sampling::Distinct => SamplingMode::Distinct,
            Sampling::WithReplacement => SamplingMode::WithReplacement,
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// raw, count, parity or count-parity.
    #[arg(long)]
    pub features: Option<FeatureScheme>,
    /// cross-entropy, squared or smiley.
    #[arg(long)]
    pub loss: Option<LossKind>,
    /// sequential, every-fifth, shuffled[:SEED] or custom:FRACTION[:SEED].
    #[arg(long)]
    pub split: Option<SplitStrategy>,
    /// linear, mlp or mlp:WIDTH.
    #[arg(long)]
    pub arch: Option<Architecture>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Correct predictions (arithmetic mode, with --n).
    #[arg(long, requires = "n", conflicts_with_all = ["data", "model"])]
    pub correct: Option<u64>,
    /// Number of cases (arithmetic mode, with --correct).
    #[arg(long, requires = "correct")]
    pub n: Option<u64>,
    #[arg(long, requires = "model")]
    pub data: Option<PathBuf>,
    /// Checkpoint written by `train`.
    #[arg(long, requires = "data")]
    pub model: Option<PathBuf>,
    /// Evaluate on the test part of this split instead of every record.
    #[arg(long)]
    pub split: Option<SplitStrategy>,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub split: Option<SplitStrategy>,
    /// A second split of the same data whose test part is checked against
    /// the first split's training part.
    #[arg(long)]
    pub compare_with: Option<SplitStrategy>,
    #[arg(long, value_enum, default_value_t = ClassifierChoice::ParityOracle)]
    pub classifier: ClassifierChoice,
    #[arg(long)]
    pub n_perm: Option<usize>,
    /// Replace the labels with fair coin flips before auditing.
    #[arg(long)]
    pub honest_relabel: bool,
    /// Exit with status 3 when PARITY_LEAK is found.
    #[arg(long)]
    pub fail_on_leak: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClassifierChoice {
    ParityOracle,
    Majority,
    /// The configured architecture, features and training settings.
    Model,
}

#[derive(Args, Debug)]
pub struct LotteryArgs {
    /// Per-bit accuracy of each net.
    #[arg(long = "p")]
    pub p_bit: Option<f64>,
    #[arg(long)]
    pub simulate: bool,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, value_enum)]
    pub truth_pool: Option<Pool>,
    /// List every value the ten-bit combiner can produce.
    #[arg(long)]
    pub enumerate_range: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Pool {
    Full,
    Reachable,
}

impl From<Pool> for TruthPool {
    fn from(p: Pool) -> Self {
        match p {
            Pool::Full => TruthPool::Full,
            Pool::Reachable => TruthPool::Reachable,
        }
    }
}

#[derive(Args, Debug)]
pub struct ReproArgs {
    #[arg(long = "k")]
    pub k_change: Option<usize>,
    #[arg(long)]
    pub n_perm: Option<usize>,
    /// Monte Carlo trials for the lottery section.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Also write the simulated dataset under `<out>/data`.
    #[arg(long)]
    pub export_data: bool,
}

/// Why a command stopped; each maps to one exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Leak,
}

impl From<smiley_core::Error> for Failure {
    fn from(e: smiley_core::Error) -> Self {
        match e {
            smiley_core::Error::Domain(_) => Failure::Usage(e.to_string()),
            other => Failure::Data(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Leak) => {
            eprintln!("PARITY_LEAK detected");
            ExitCode::from(3)
        }
    }
}
