//! `veracity`: prepare intent caches, train, evaluate, ablate, sweep, and
//! export per-article graphs.

mod commands;
mod manifest;
mod pipeline;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use veracity_core::data::{SplitMode, SplitSpec};
use veracity_core::encoders::DEFAULT_API_KEY_ENV;
use veracity_core::{Ablation, ModelConfig, TrainConfig};

#[derive(Parser)]
#[command(name = "veracity", version, about = "Intent-semantic graph fake news detector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and cache intent analyses (and adapter embeddings).
    Prepare(PrepareArgs),
    /// Train one model and write a checkpoint.
    Train(RunArgs),
    /// Score a trained run on one of its splits.
    Evaluate(EvaluateArgs),
    /// Train the full model and each single-component ablation.
    Ablate(RunArgs),
    /// Retrain over grids of fine-node count and pseudo-node count.
    Sweep(SweepArgs),
    /// Export nodes, edges, edge weights and attention for articles.
    InspectGraph(InspectArgs),
    /// Repeat a train, ablate or sweep run from its manifest.
    Rerun(RerunArgs),
    /// Write a seeded synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
pub struct InputArgs {
    /// Corpus file, one JSON record per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Prompt set JSON; defaults to the bundled four-perspective set.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    /// Intent cache file; defaults to `<out>/intents.jsonl`.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// `offline` or `adapter:<model>`.
    #[arg(long, default_value = "offline")]
    pub encoder: String,
    /// Base URL for adapters.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Environment variable holding the adapter credential.
    #[arg(long, default_value = DEFAULT_API_KEY_ENV)]
    pub api_key_env: String,
    /// Concurrent adapter requests.
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    /// Entity dictionary, one term per line; replaces the capitalized-span
    /// recognizer.
    #[arg(long)]
    pub entity_dict: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

impl InputArgs {
    pub fn cache_path(&self) -> PathBuf {
        self.cache.clone().unwrap_or_else(|| self.out.join("intents.jsonl"))
    }
}

#[derive(Args)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// `stub` or `adapter:<model>`.
    #[arg(long, default_value = "stub")]
    pub generator: String,
    /// Embedding width, used to warm the adapter embedding cache.
    #[arg(long, default_value_t = ModelConfig::default().dim)]
    pub dim: usize,
}

#[derive(Args, Clone)]
pub struct ModelArgs {
    #[arg(long, default_value_t = ModelConfig::default().dim)]
    pub dim: usize,
    #[arg(long, default_value_t = ModelConfig::default().window)]
    pub window: usize,
    #[arg(long, default_value_t = ModelConfig::default().fine_l)]
    pub fine_l: usize,
    #[arg(long, default_value_t = ModelConfig::default().pseudo_r)]
    pub pseudo_r: usize,
    #[arg(long, default_value_t = ModelConfig::default().depth)]
    pub depth: usize,
    #[arg(long, default_value_t = ModelConfig::default().align_depth)]
    pub align_depth: usize,
    /// Hidden widths of the classifier, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = ModelConfig::default().head_hidden)]
    pub head_hidden: Vec<usize>,
    #[arg(long, default_value_t = ModelConfig::default().edge_hidden)]
    pub edge_hidden: usize,
    #[arg(long, default_value_t = ModelConfig::default().max_entities)]
    pub max_entities: usize,
    /// Components to disable, e.g. `no_entity` or `no_global+no_dpga`.
    #[arg(long, default_value = "full")]
    pub ablate: String,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().weight_decay)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = TrainConfig::default().max_epochs)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().patience)]
    pub patience: usize,
    #[arg(long, default_value_t = TrainConfig::default().seed)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, value_enum, default_value_t = Mode::Chronological)]
    pub split_mode: Mode,
    /// Shuffle seed for random splits.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Mode {
    Chronological,
    Random,
}

impl ModelArgs {
    pub fn train_config(&self) -> anyhow::Result<TrainConfig> {
        let ablation = if self.ablate == "full" {
            Ablation::default()
        } else {
            self.ablate.parse()?
        };
        Ok(TrainConfig {
            model: ModelConfig {
                dim: self.dim,
                window: self.window,
                fine_l: self.fine_l,
                pseudo_r: self.pseudo_r,
                depth: self.depth,
                align_depth: self.align_depth,
                head_hidden: self.head_hidden.clone(),
                edge_hidden: self.edge_hidden,
                max_entities: self.max_entities,
                ablation,
                ..ModelConfig::default()
            },
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
            ..TrainConfig::default()
        })
    }

    pub fn split_spec(&self) -> anyhow::Result<SplitSpec> {
        let mode = match self.split_mode {
            Mode::Chronological => SplitMode::Chronological,
            Mode::Random => SplitMode::Random,
        };
        Ok(SplitSpec::new(self.train_fraction, self.val_fraction, self.test_fraction, mode)?.with_seed(self.split_seed))
    }
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Values of the fine-node count to try, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub l_grid: Vec<usize>,
    /// Values of the pseudo-node count to try, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub r_grid: Vec<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SplitName {
    Train,
    Val,
    Test,
    All,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Run directory (or its manifest.json).
    #[arg(long)]
    pub run: PathBuf,
    /// Checkpoint to score instead of the run's own.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SplitName::Val)]
    pub split: SplitName,
    /// Report file; defaults to `<run>/eval-<split>.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct InspectArgs {
    /// Run directory (or its manifest.json).
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Article ids to export; repeatable.
    #[arg(long = "item", required = true)]
    pub items: Vec<String>,
    /// Output directory; defaults to `<run>/graphs`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RerunArgs {
    /// Manifest file or run directory.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    pub n_real: usize,
    #[arg(long, default_value_t = 20)]
    pub n_fake: usize,
    /// Probability that an article carries its class signature.
    #[arg(long, default_value_t = 0.9)]
    pub signal: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prepare(a) => commands::prepare(&a),
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Ablate(a) => commands::ablate(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::InspectGraph(a) => commands::inspect_graph(&a),
        Command::Rerun(a) => commands::rerun(&a),
        Command::Synth(a) => commands::synth(&a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
