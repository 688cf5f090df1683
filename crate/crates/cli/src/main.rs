//! `kp`: train embeddings, evaluate them with knowledge persistence and the
//! ranking metrics, and analyse the resulting reports.
//!
//! Every flag can also be set through a `KP_*` environment variable.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "kp", version, about = "Knowledge persistence evaluation of KG embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a TSV dataset and report its size.
    LoadCheck(LoadCheckArgs),
    /// Train one model and write checkpoints.
    Train(TrainArgs),
    /// Train (or load checkpoints) and evaluate every checkpoint.
    Eval(EvalArgs),
    /// Correlate two metrics across reports.
    Correlate(CorrelateArgs),
    /// Pick a checkpoint by one metric and tabulate the cost for the others.
    EarlyStop(EarlyStopArgs),
    /// Correlation of KP with Hits@10 under shrinking sample sizes.
    Robustness(RobustnessArgs),
    /// KP versus ranking wall time per model.
    Timing(TimingArgs),
    /// Lemma sweep, stability trials and bound table.
    Theory(TheoryArgs),
    /// Write a synthetic dataset as TSV splits.
    SynthGen(SynthGenArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Directory with train.tsv, valid.tsv and test.tsv; synthetic data when absent
    #[arg(long, env = "KP_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// Entities of the synthetic graph
    #[arg(long, env = "KP_SYNTH_ENTITIES", default_value_t = 200)]
    pub synth_entities: usize,
    /// Clusters of the synthetic graph
    #[arg(long, env = "KP_SYNTH_CLUSTERS", default_value_t = 20)]
    pub synth_clusters: usize,
    /// Seed of the synthetic graph
    #[arg(long, env = "KP_SYNTH_SEED", default_value_t = 0)]
    pub synth_seed: u64,
    /// Treat validation triples as unknown for negatives and filtering
    #[arg(long, env = "KP_EXCLUDE_VALID")]
    pub exclude_valid: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Embedding dimension
    #[arg(long, env = "KP_DIM", default_value_t = 32)]
    pub dim: usize,
    #[arg(long, env = "KP_EPOCHS", default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, env = "KP_LR", default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, env = "KP_MARGIN", default_value_t = 1.0)]
    pub margin: f64,
    #[arg(long, env = "KP_NEGATIVES", default_value_t = 1)]
    pub negatives: usize,
    #[arg(long, env = "KP_BATCH_SIZE", default_value_t = 64)]
    pub batch_size: usize,
    /// Checkpoint interval in epochs
    #[arg(long, env = "KP_EVAL_EVERY", default_value_t = 5)]
    pub eval_every: usize,
    #[arg(long, env = "KP_WEIGHT_DECAY", default_value_t = 0.0)]
    pub weight_decay: f64,
    /// Project entity vectors into this L2 ball after each batch
    #[arg(long, env = "KP_MAX_NORM")]
    pub max_norm: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct KpArgs {
    /// Sampled edges per entity in each score graph
    #[arg(long, env = "KP_EDGES_PER_ENTITY", default_value_t = 1.0)]
    pub edges_per_entity: f64,
    /// Sliced Wasserstein directions
    #[arg(long, env = "KP_SLICES", default_value_t = 100)]
    pub slices: usize,
    /// Wasserstein order (1 or 2)
    #[arg(long, env = "KP_ORDER", default_value_t = 2)]
    pub order: u32,
    /// Negative sampling: full-grid or head-tail
    #[arg(long, env = "KP_NEGATIVE_MODE", default_value = "full-grid")]
    pub negative_mode: String,
    /// KP samples averaged per checkpoint
    #[arg(long, env = "KP_EVAL_SEEDS", default_value_t = 1)]
    pub eval_seeds: usize,
    /// Ranking protocol: filtered or raw
    #[arg(long, env = "KP_RANKING", default_value = "filtered")]
    pub ranking: String,
    #[arg(long, env = "KP_BETA_E", default_value_t = 1.0)]
    pub beta_e: f64,
    #[arg(long, env = "KP_BETA_R", default_value_t = 0.0)]
    pub beta_r: f64,
    /// Skip conicity, AVL and the graph kernel
    #[arg(long, env = "KP_NO_BASELINES")]
    pub no_baselines: bool,
}

#[derive(Args, Debug)]
pub struct LoadCheckArgs {
    #[arg(long, env = "KP_DATA_DIR")]
    pub data_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// transe, distmult, complex or rotate
    #[arg(long, env = "KP_MODEL", default_value = "transe")]
    pub model_kind: String,
    #[arg(long, env = "KP_SEED")]
    pub seed: u64,
    /// Checkpoint directory
    #[arg(long, env = "KP_OUT")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub kp: KpArgs,
    /// Comma-separated model kinds
    #[arg(long, env = "KP_MODELS", value_delimiter = ',', default_value = "transe")]
    pub models: Vec<String>,
    /// Evaluate saved checkpoints instead of training
    #[arg(long, env = "KP_CHECKPOINT_DIR")]
    pub checkpoint_dir: Option<PathBuf>,
    #[arg(long, env = "KP_SEED")]
    pub seed: u64,
    #[arg(long, env = "KP_RUN_ID")]
    pub run_id: Option<String>,
    /// Output root; the run goes into <out>/<run id>
    #[arg(long, env = "KP_OUT")]
    pub out: PathBuf,
    #[arg(long, env = "KP_SAVE_CHECKPOINTS")]
    pub save_checkpoints: bool,
}

#[derive(Args, Debug)]
pub struct ReportSelect {
    /// reports.jsonl file or a directory searched for them
    #[arg(long, env = "KP_REPORTS")]
    pub reports: PathBuf,
    /// Restrict to one model kind
    #[arg(long, env = "KP_MODEL")]
    pub model_kind: Option<String>,
}

#[derive(Args, Debug)]
pub struct CorrelateArgs {
    #[command(flatten)]
    pub select: ReportSelect,
    #[arg(long, env = "KP_METRIC_X", default_value = "kp_test")]
    pub metric_x: String,
    #[arg(long, env = "KP_METRIC_Y", default_value = "hits@10")]
    pub metric_y: String,
    /// intra: across checkpoints; inter: across final checkpoints of models
    #[arg(long, env = "KP_SCOPE", default_value = "intra")]
    pub scope: String,
    #[arg(long, env = "KP_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EarlyStopArgs {
    #[command(flatten)]
    pub select: ReportSelect,
    #[arg(long, env = "KP_CRITERION", default_value = "kp_test")]
    pub criterion: String,
    #[arg(long, env = "KP_METRICS", value_delimiter = ',', default_value = "hits@1,hits@3,hits@10,mrr,mr")]
    pub metrics: Vec<String>,
    #[arg(long, env = "KP_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RobustnessArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub kp: KpArgs,
    #[arg(long, env = "KP_MODEL", default_value = "transe")]
    pub model_kind: String,
    #[arg(long, env = "KP_FRACTIONS", value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,1.0")]
    pub fractions: Vec<f64>,
    #[arg(long, env = "KP_N_SEEDS", default_value_t = 5)]
    pub n_seeds: usize,
    #[arg(long, env = "KP_SEED")]
    pub seed: u64,
    /// Directory for robustness.csv and robustness.json
    #[arg(long, env = "KP_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TimingArgs {
    #[command(flatten)]
    pub select: ReportSelect,
    /// Directory for timing.csv and timing.json
    #[arg(long, env = "KP_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TheoryArgs {
    #[arg(long, env = "KP_NOISE", default_value_t = 0.3)]
    pub noise: f64,
    #[arg(long, env = "KP_TRIALS", default_value_t = 100)]
    pub trials: usize,
    #[arg(long, env = "KP_SAMPLES", default_value_t = 5000)]
    pub samples: usize,
    #[arg(long, env = "KP_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "KP_OUT")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthGenArgs {
    #[arg(long, env = "KP_SYNTH_ENTITIES", default_value_t = 200)]
    pub entities: usize,
    #[arg(long, env = "KP_SYNTH_CLUSTERS", default_value_t = 20)]
    pub clusters: usize,
    #[arg(long, env = "KP_SYNTH_BASE_RELATIONS", default_value_t = 6)]
    pub base_relations: usize,
    #[arg(long, env = "KP_SYNTH_COMPOSED_RELATIONS", default_value_t = 2)]
    pub composed_relations: usize,
    #[arg(long, env = "KP_SYNTH_DENSITY", default_value_t = 0.6)]
    pub density: f64,
    #[arg(long, env = "KP_SYNTH_TAILS", default_value_t = 4)]
    pub tails_per_head: usize,
    #[arg(long, env = "KP_SYNTH_VALID", default_value_t = 0.05)]
    pub valid_fraction: f64,
    #[arg(long, env = "KP_SYNTH_TEST", default_value_t = 0.1)]
    pub test_fraction: f64,
    #[arg(long, env = "KP_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "KP_OUT")]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(commands::Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
