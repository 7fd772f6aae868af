//! `sensekit`: dataset preparation, Gram matrices, SVM training and
//! prediction, cross-validation, experiments and the verification suite.

mod commands;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "sensekit",
    version,
    about = "Sensing-aware bag-of-words kernel SVMs"
)]
struct Cli {
    /// Log progress (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize raw text and write vocabulary and corpus files.
    PrepareText(PrepareTextArgs),
    /// Fit a visual vocabulary on descriptor files and write pyramid corpora.
    PrepareBof(PrepareBofArgs),
    /// Build a Gram matrix from corpus files.
    Gram(GramArgs),
    /// Train one-vs-all SVMs on a training Gram matrix.
    Train(TrainArgs),
    /// Predict labels from a test-vs-train Gram matrix.
    Predict(PredictArgs),
    /// Cross-validate a kernel and C grid on a training set.
    Cv(CvArgs),
    /// Cross-validate, retrain on the training split and score the test split.
    Experiment(ExperimentArgs),
    /// Run the oracle and acceptance checks.
    Verify(VerifyArgs),
}

#[derive(Args)]
pub struct PrepareTextArgs {
    /// Training documents: a directory per class or a TSV file (id, label, text).
    #[arg(long)]
    pub train: PathBuf,
    /// Test documents in the same layout.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Output directory for vocab.txt, train.corpus and test.corpus.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub text: TextOptions,
}

#[derive(Args, Clone)]
pub struct TextOptions {
    /// `smart`, `none`, or a file with one stopword per line.
    #[arg(long, default_value = "smart")]
    pub stoplist: String,
    /// Message header handling: keep, drop, or subject (keep only Subject:).
    #[arg(long, default_value = "subject")]
    pub headers: String,
    /// Minimum training-set frequency for a vocabulary term.
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
}

#[derive(Args)]
pub struct PrepareBofArgs {
    /// Directory per class holding descriptor files (`.txt` text, otherwise binary).
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Output directory for visual_vocab.txt, train.pyramid and test.pyramid.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub bof: BofOptions,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Args, Clone)]
pub struct BofOptions {
    /// Visual vocabulary size W.
    #[arg(long, default_value_t = 200)]
    pub words: usize,
    /// Highest pyramid level L.
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
    /// Number of descriptors sampled for k-means.
    #[arg(long, default_value_t = 100_000)]
    pub sample: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Args)]
pub struct GramArgs {
    /// Corpus whose documents index the rows (text or pyramid corpus file).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Corpus indexing the columns; defaults to the row corpus.
    #[arg(long)]
    pub cols: Option<PathBuf>,
    /// Kernel spec, e.g. `sensing1:n=150` or `sensing2:N=150` (seed from --seed).
    #[arg(long)]
    pub kernel: String,
    /// Seed for resampling kernels.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the debug text form instead of the binary form.
    #[arg(long)]
    pub text: bool,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Square training Gram matrix.
    #[arg(long)]
    pub gram: PathBuf,
    /// Corpus holding the labels of the Gram's documents.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub c: f64,
    /// KKT tolerance of the solver.
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Test-vs-train Gram matrix.
    #[arg(long)]
    pub gram: PathBuf,
    /// Test corpus; when given, the CCR is reported.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Predictions as `id<TAB>label` lines; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct GridOptions {
    /// Kernel spec; repeat for a grid. Defaults to Sensing 1, Sensing 2 and
    /// RBF over the default scale and sigma grids.
    #[arg(long = "kernel")]
    pub kernels: Vec<String>,
    /// Comma-separated C values.
    #[arg(long, default_value = "0.01,0.1,1,10,100")]
    pub c_grid: String,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    #[arg(long)]
    pub seed: u64,
    /// Input kind: auto (prepared corpus file, else raw text), text, corpus,
    /// pyramid or descriptors.
    #[arg(long, default_value = "auto")]
    pub format: String,
    #[command(flatten)]
    pub text: TextOptions,
    #[command(flatten)]
    pub bof: BofOptions,
}

#[derive(Args)]
pub struct CvArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[command(flatten)]
    pub grid: GridOptions,
    /// Output directory for cv.txt and cv.kv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub grid: GridOptions,
    /// Output directory for report.txt, report.kv and timings.txt.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub seed: u64,
    /// Directory holding 20news-bydate-train and 20news-bydate-test.
    #[arg(long)]
    pub newsgroups: Option<PathBuf>,
    /// Also run the 20-class reproduction.
    #[arg(long)]
    pub heavy: bool,
    /// Run only these check numbers.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u32>,
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
    let result = match cli.command {
        Command::PrepareText(a) => commands::prepare_text(a),
        Command::PrepareBof(a) => commands::prepare_bof(a),
        Command::Gram(a) => commands::gram(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Cv(a) => commands::cv(a),
        Command::Experiment(a) => commands::experiment(a),
        Command::Verify(a) => commands::verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("sensekit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
