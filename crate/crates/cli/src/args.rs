use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "sdca-topk", version, about = "Train and evaluate top-k, multiclass and multilabel linear or kernel classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the synthetic circle benchmark (train, val and test files).
    #[command(alias = "gen-synthetic")]
    Gen(GenArgs),
    /// Train a model with SDCA.
    Train(TrainArgs),
    /// Write scores and top-k labels for every example.
    Predict(PredictArgs),
    /// Compute the metrics report of a model on a labeled file.
    Evaluate(EvaluateArgs),
    /// Grid search by k-fold cross-validation.
    Cv(CvArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub n_train: usize,
    #[arg(long, default_value_t = 200)]
    pub n_val: usize,
    #[arg(long, default_value_t = 200_000)]
    pub n_test: usize,
    /// Output directory; receives circle.{train,val,test}.<ext>.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// libsvm or csv
    #[arg(long, default_value = "libsvm")]
    pub format: String,
}

#[derive(Args, Debug, Clone)]
pub struct LossArgs {
    /// Loss family, e.g. softmax, topk-svm-a, ml-svm-smooth.
    #[arg(long)]
    pub loss: String,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Smoothing of the hinge losses; 0 is nonsmooth.
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// C = 1/(λn)
    #[arg(long, conflicts_with = "lambda")]
    pub c: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Relative duality gap target.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Epochs between duality gap evaluations.
    #[arg(long, default_value_t = 1)]
    pub gap_check_period: usize,
    /// none, linear, rbf:THETA or precomputed:PATH
    #[arg(long, default_value = "none")]
    pub kernel: String,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training data (.csv for CSV, anything else LibSVM).
    #[arg(long)]
    pub train: PathBuf,
    /// Parse label fields as label sets.
    #[arg(long)]
    pub multilabel: bool,
    #[command(flatten)]
    pub loss: LossArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Duality gap history, one `epoch primal dual relative_gap` line per check.
    #[arg(long)]
    pub gap_log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub multilabel: bool,
    /// Cross-Gram matrix (rows: data, columns: training points) for
    /// precomputed-kernel models.
    #[arg(long)]
    pub gram: Option<PathBuf>,
    /// Number of top labels listed per example.
    #[arg(long, default_value_t = 1)]
    pub top: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub multilabel: bool,
    #[arg(long)]
    pub gram: Option<PathBuf>,
    /// Fixed threshold δ for the partition metrics.
    #[arg(long, default_value_t = 0.0, conflicts_with = "tune_threshold")]
    pub threshold: f64,
    /// Tune δ on --val for this metric (f1_instance, f1_macro, f1_micro,
    /// accuracy, subset_accuracy, hamming_loss).
    #[arg(long, requires = "val")]
    pub tune_threshold: Option<String>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub val_gram: Option<PathBuf>,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CvArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub multilabel: bool,
    #[command(flatten)]
    pub loss: LossArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Comma-separated values of C.
    #[arg(long, default_value = "0.0625,0.25,1,4,16")]
    pub c_grid: String,
    /// Comma-separated values of k; defaults to --k.
    #[arg(long)]
    pub k_grid: Option<String>,
    /// Comma-separated RBF parameters; a linear model when absent.
    #[arg(long)]
    pub theta_grid: Option<String>,
    /// topK (accuracy at K), rank_loss or map.
    #[arg(long, default_value = "top1")]
    pub metric: String,
    /// Concurrent fold/grid trainings. Fold f trains with seed + f, so
    /// results do not depend on this value.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Result table; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
