mod commands;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::exit::CliError;

#[derive(Debug, Parser)]
#[command(name = "radfuse", version, about = "Chest X-ray classification with fused handcrafted and deep features")]
struct Cli {
    /// Worker threads for feature extraction (0 = all cores).
    #[arg(long, global = true, env = "RADFUSE_JOBS", default_value_t = 0)]
    jobs: usize,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract handcrafted (and optionally deep) features into RFF1 files.
    Extract(ExtractArgs),
    /// Split, train and evaluate as described by a run configuration.
    Train(TrainArgs),
    /// Evaluate one or more models on labeled images.
    Eval(EvalArgs),
    /// Classify images with a trained model.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DeepBackend {
    Precomputed,
    Onnx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Dtype {
    F32,
    F64,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Manifest CSV (`id,path,label`) or class-directory root.
    #[arg(long)]
    manifest: PathBuf,
    /// Output RFF1 file for handcrafted features.
    #[arg(long)]
    out: PathBuf,
    /// `all` or a comma list of texture, glcm, gldm, fft, wavelet, lbp.
    #[arg(long, default_value = "all")]
    groups: String,
    /// Run configuration supplying preprocessing settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Dtype::F64)]
    dtype: Dtype,
    #[arg(long, value_enum, requires_all = ["deep_path", "deep_width", "deep_out"])]
    deep_backend: Option<DeepBackend>,
    /// ONNX model or precomputed RFF1 file for the deep backend.
    #[arg(long, requires = "deep_backend")]
    deep_path: Option<PathBuf>,
    #[arg(long, requires = "deep_backend")]
    deep_width: Option<usize>,
    /// Output RFF1 file for deep features.
    #[arg(long, requires = "deep_backend")]
    deep_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `paths.model_out`.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Overrides `paths.report_out`.
    #[arg(long)]
    report_out: Option<PathBuf>,
    /// Overrides `svm.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `split.seed`.
    #[arg(long)]
    split_seed: Option<u64>,
    /// Overrides `kpca.k`.
    #[arg(long)]
    k: Option<usize>,
    /// Name of the model in the evaluation report.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalSplit {
    /// Every sample in the manifest.
    All,
    /// The test part of the split recorded in each model.
    Test,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Model file; repeat to compare several models.
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    /// Report names, one per model (defaults to the file stems).
    #[arg(long = "name")]
    names: Vec<String>,
    /// Manifest CSV or class-directory root.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalSplit::All)]
    split: EvalSplit,
    /// Replacement deep-feature file or ONNX model for every model.
    #[arg(long)]
    deep_path: Option<PathBuf>,
    /// Write the JSON reports here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Confusion matrix CSV (suffixed with the model name when several).
    #[arg(long)]
    cm_csv: Option<PathBuf>,
    /// Confusion matrix heatmap PNG (suffixed with the model name when several).
    #[arg(long)]
    cm_png: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Jsonl)]
    format: OutputFormat,
    /// Replacement deep-feature file or ONNX model.
    #[arg(long)]
    deep_path: Option<PathBuf>,
    #[arg(required = true)]
    images: Vec<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(|e| CliError::internal(e.to_string()))?;
    }
    match cli.command {
        Command::Extract(a) => commands::extract(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Predict(a) => commands::predict(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
