//! Command line surface. Every knob that also exists in a run-spec file is
//! optional here; explicit flags always win over spec-file values.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "tgp",
    about = "Tree-based genetic programming engine for symbolic regression and classification",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run evolution on a dataset (or the built-in polynomial grid).
    Run(RunArgs),
    /// Time both evaluation strategies over a sweep of dataset sizes.
    Calibrate(CalibrateArgs),
    /// Evaluate a stored individual or an expression on a dataset.
    Eval(EvalArgs),
    /// Export the individuals of a checkpoint as expression text.
    Export(ExportArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyArg {
    Auto,
    Hybrid,
    Data,
}

impl StrategyArg {
    pub fn to_core(self) -> tgp_core::eval::EvalStrategy {
        match self {
            StrategyArg::Auto => tgp_core::eval::EvalStrategy::Auto,
            StrategyArg::Hybrid => tgp_core::eval::EvalStrategy::Hybrid,
            StrategyArg::Data => tgp_core::eval::EvalStrategy::DataParallel,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveArg {
    Mse,
    Accuracy,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum GpopsArg {
    Literal,
    PerCase,
}

impl GpopsArg {
    pub fn to_core(self) -> tgp_core::engine::GpopsFormula {
        match self {
            GpopsArg::Literal => tgp_core::engine::GpopsFormula::Literal,
            GpopsArg::PerCase => tgp_core::engine::GpopsFormula::PerCase,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FunctionSetArg {
    /// `+ - * / sin cos tan`
    Standard,
    /// Standard plus `max` and `min`.
    Extended,
}

/// Dataset selection flags shared by `run` and `eval`.
#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// CSV dataset; the last --targets columns are targets.
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// Number of trailing target columns in the CSV.
    #[arg(long)]
    pub targets: Option<usize>,

    /// Treat the first CSV row as data, not a header.
    #[arg(long)]
    pub no_header: bool,

    /// Use the built-in Pagie polynomial grid instead of a CSV.
    #[arg(long)]
    pub pagie: bool,

    /// Grid lower bound (with --pagie).
    #[arg(long)]
    pub lo: Option<f64>,

    /// Grid upper bound (with --pagie).
    #[arg(long)]
    pub hi: Option<f64>,

    /// Grid step (with --pagie).
    #[arg(long)]
    pub step: Option<f64>,

    /// Objective: mean squared error or classification accuracy.
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveArg>,

    /// Fraction of points held out (seeded shuffle); evolution uses the rest.
    #[arg(long)]
    pub holdout: Option<f64>,

    /// Z-score the input columns before running.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Run-spec file (TOML); flags override its values.
    #[arg(long)]
    pub spec: Option<PathBuf>,

    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long)]
    pub pop: Option<usize>,

    #[arg(long)]
    pub generations: Option<usize>,

    #[arg(long)]
    pub max_len: Option<usize>,

    #[arg(long)]
    pub tournament: Option<usize>,

    #[arg(long)]
    pub p_cross: Option<f64>,

    #[arg(long)]
    pub p_mut: Option<f64>,

    #[arg(long)]
    pub elite: Option<usize>,

    #[arg(long)]
    pub target_fitness: Option<f64>,

    #[arg(long, value_enum)]
    pub eval_strategy: Option<StrategyArg>,

    #[arg(long, value_enum)]
    pub function_set: Option<FunctionSetArg>,

    /// Execution lanes (default: detected, TGP_LANES overrides detection).
    #[arg(long)]
    pub lanes: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Comma-separated seed list; one run per seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,

    /// Output directory (per-seed subdirectories are created inside).
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub gpops_formula: Option<GpopsArg>,

    /// Zero all wall-time fields in outputs (byte-determinism testing).
    #[arg(long)]
    pub redact_timing: bool,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Population size used for the sweep.
    #[arg(long, default_value_t = 1000)]
    pub pop: usize,

    /// Dataset sizes to sweep.
    #[arg(long, value_delimiter = ',',
          default_values_t = vec![64usize, 256, 1024, 4096, 16384, 65536])]
    pub d_values: Vec<usize>,

    /// Timing repetitions per point (median is reported).
    #[arg(long, default_value_t = 3)]
    pub reps: usize,

    #[arg(long)]
    pub lanes: Option<usize>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Write the sweep CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Checkpoint file holding the individual(s) to evaluate.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,

    /// Expression text to evaluate.
    #[arg(long)]
    pub expr: Option<String>,

    /// File containing one expression.
    #[arg(long)]
    pub expr_file: Option<PathBuf>,

    /// Evaluate every checkpoint row, not just the stored best.
    #[arg(long)]
    pub all: bool,

    /// Print the expression together with its fitness.
    #[arg(long)]
    pub infix: bool,

    #[arg(long)]
    pub lanes: Option<usize>,

    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,

    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
