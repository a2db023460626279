mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use songembed::baselines::LabelKind;
use songembed::{AlphaScheme, LossKind, TaskId};

/// Train and evaluate joint song/artist/tag embeddings.
#[derive(Debug, Parser)]
#[command(name = "songembed", version)]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an embedding model (or an ensemble of them).
    Train(TrainArgs),
    /// Evaluate a model on held-out songs.
    Eval(EvalArgs),
    /// Print the top-ranked outputs for one song or artist.
    Query(QueryArgs),
    /// Fit a k-means codebook on frame files.
    FeaturizeFit(FitArgs),
    /// Encode songs' frames as codeword counts.
    FeaturizeEncode(EncodeArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Evaluate the summed scores of several models.
    EnsembleEval(EnsembleEvalArgs),
    /// Train a one-vs-rest margin perceptron baseline.
    OvrTrain(OvrTrainArgs),
    /// Evaluate a one-vs-rest baseline.
    OvrEval(OvrEvalArgs),
    /// Evaluate cosine similarity on the similar-songs task.
    CosineEval(CosineEvalArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub valid: PathBuf,
    /// Artist similarity file; needed for the sa task.
    #[arg(long)]
    pub artist_sim: Option<PathBuf>,
    /// Comma-separated tasks out of ap, sp, sa, ss, tp.
    #[arg(long, value_delimiter = ',', default_value = "tp")]
    pub tasks: Vec<TaskId>,
    #[arg(long, default_value_t = LossKind::Warp)]
    pub loss: LossKind,
    /// uniform, harmonic or p@K.
    #[arg(long, default_value_t = AlphaScheme::Harmonic)]
    pub alpha: AlphaScheme,
    /// Norm bound on every embedding column.
    #[arg(long = "C", default_value_t = 1.0)]
    pub max_norm: f32,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub dim: usize,
    #[arg(long, default_value_t = 100_000)]
    pub max_steps: usize,
    /// Steps between validation checks (default: 10 x training songs).
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 1)]
    pub k_eval: usize,
    /// Cap on the song universe used by the sp/ss rank estimate.
    #[arg(long)]
    pub song_pool: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train this many members with seeds seed, seed+1, ...; outputs get a
    /// `.N` suffix before the extension.
    #[arg(long, default_value_t = 1)]
    pub members: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the training report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalTarget {
    /// Test dataset.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub artist_sim: Option<PathBuf>,
    /// Comma-separated cutoffs.
    #[arg(long, value_delimiter = ',', default_value = "1,3,6,9,12,15")]
    pub k: Vec<usize>,
    /// Rank by a full sort instead of top-k selection.
    #[arg(long)]
    pub full_sort: bool,
    /// Print a human-readable table instead of TSV.
    #[arg(long)]
    pub table: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "ap,sp,ss,tp")]
    pub tasks: Vec<TaskId>,
    #[command(flatten)]
    pub target: EvalTarget,
}

#[derive(Debug, Args)]
pub struct EnsembleEvalArgs {
    /// Comma-separated model files.
    #[arg(long, value_delimiter = ',', required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "ap,sp,ss,tp")]
    pub tasks: Vec<TaskId>,
    #[command(flatten)]
    pub target: EvalTarget,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Songs to take the query from and, for sp/ss, to rank.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub task: TaskId,
    /// Query song id (ap, tp, ss).
    #[arg(long, conflicts_with = "artist")]
    pub song: Option<String>,
    /// Query artist id (sp, sa).
    #[arg(long)]
    pub artist: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Directory of `.frm` frame files.
    #[arg(long)]
    pub frames: PathBuf,
    /// Codebook size.
    #[arg(long, default_value_t = 2000)]
    pub size: usize,
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Codebook files; the encodings are concatenated in this order.
    #[arg(long, value_delimiter = ',', required = true)]
    pub codebook: Vec<PathBuf>,
    /// One frame directory per codebook, holding `<song_id>.frm` files.
    #[arg(long, value_delimiter = ',', required = true)]
    pub frames: Vec<PathBuf>,
    /// Dataset whose artist and tag labels are copied onto matching songs.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Separable,
    Latent,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub preset: Preset,
    /// Output directory for train/valid/test.tsv and artist_sim.tsv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Defaults: 20 (separable), 2000 (latent).
    #[arg(long)]
    pub songs: Option<usize>,
    /// Defaults: 4 (separable), 50 (latent).
    #[arg(long)]
    pub tags: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub artists: usize,
    #[arg(long, default_value_t = 100)]
    pub feat_dim: usize,
    #[arg(long, default_value_t = 20)]
    pub latent_dim: usize,
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    /// Keep only the largest features of each song.
    #[arg(long)]
    pub nnz: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub zipf: f64,
}

#[derive(Debug, Args)]
pub struct OvrTrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_label)]
    pub label: LabelKind,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OvrEvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_parser = parse_label)]
    pub label: LabelKind,
    #[command(flatten)]
    pub target: EvalTarget,
}

#[derive(Debug, Args)]
pub struct CosineEvalArgs {
    #[command(flatten)]
    pub target: EvalTarget,
}

fn parse_label(s: &str) -> Result<LabelKind, String> {
    s.parse().map_err(|e: songembed::Error| e.to_string())
}

/// Exit codes: 1 for usage errors, 2 for I/O failures, 3 for invalid data.
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_DATA: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
