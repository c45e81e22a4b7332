use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Structured analysis dictionary learning: train, evaluate and benchmark.
#[derive(Parser, Debug)]
#[command(name = "sadl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write it with its objective trace.
    Train(TrainArgs),
    /// Predict labels for every sample of a dataset.
    Predict(PredictArgs),
    /// Report accuracy, timing and the confusion matrix on a labeled dataset.
    Eval(EvalArgs),
    /// Write a synthetic union-of-subspaces train/test pair.
    Synth(SynthArgs),
    /// Sweep dictionary sizes over repeated realizations.
    Bench(BenchArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeArg {
    Sadl,
    #[value(name = "plain_adl")]
    PlainAdl,
    Ridge,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// `key = value` config file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub model: PathBuf,
    /// Trace CSV (defaults to the model path with a `.trace.csv` suffix).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// CSV of `index,predicted,label`; printed to stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use `W·(Q·(Ω·x))` instead of the precomputed scorer.
    #[arg(long)]
    pub chained: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Timing repetitions; the reported time is their median.
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    /// Report CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output prefix; writes `<prefix>_train` and `<prefix>_test` datasets.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 5)]
    pub subspace_dim: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 40)]
    pub train_per_class: usize,
    #[arg(long, default_value_t = 20)]
    pub test_per_class: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Shift of the in-subspace coordinates (0 keeps classes sign-symmetric).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub offset: f64,
    /// Write the binary encoding instead of text.
    #[arg(long)]
    pub binary: bool,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training data, or the full pool to split when `--test` is absent.
    #[arg(long)]
    pub data: PathBuf,
    /// Fixed test set; realizations then differ only in the training seed.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Comma-separated dictionary sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub realizations: usize,
    /// Training share of each class when splitting `--data`.
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Per-run CSV; printed to stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accuracy-vs-size summary CSV.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Base seed; realization `k` uses `seed + k`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Eval(a) => commands::eval(a),
        Command::Synth(a) => commands::synth(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
