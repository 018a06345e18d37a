//! `stance-scope`: operator entry points for the stance pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "stance-scope", version, about = "Stance dataset construction, training and serving")]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the topic list from a triple store and source lists.
    CurateTopics(CurateTopics),
    /// Pair articles with the topics they mention and extract annotation contexts.
    BuildDataset(BuildDataset),
    /// Resolve three votes per context into a labelled dataset.
    Aggregate(Aggregate),
    /// Split a dataset into topic-disjoint train, validation and test files.
    Split(Split),
    /// Generate a synthetic annotated corpus.
    SynthCorpus(SynthCorpus),
    /// Train the conditional BiLSTM stance model.
    Train(Train),
    /// Report accuracy and macro-F1 of a checkpoint on a dataset.
    Evaluate(Evaluate),
    /// Classify one text with respect to one topic.
    Predict(Predict),
    /// Compare analytic and finite-difference gradients of the full model.
    Gradcheck(Gradcheck),
    /// Run the HTTP API.
    Serve(Serve),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Plain,
    Records,
}

#[derive(Debug, Args)]
pub struct CurateTopics {
    /// N-Triples knowledge graph.
    #[arg(long)]
    pub triples: PathBuf,
    /// Wikipedia URLs of controversial issues, one per line.
    #[arg(long)]
    pub controversial: PathBuf,
    /// Candidate popular entity URIs, one per line.
    #[arg(long)]
    pub popular: PathBuf,
    /// Political figure URIs, one per line.
    #[arg(long)]
    pub political: PathBuf,
    /// URIs removed from the popular candidates, one per line.
    #[arg(long)]
    pub exclude: Option<PathBuf>,
    /// Article corpus; when given, popular candidates are narrowed to the most mentioned per month.
    #[arg(long)]
    pub articles: Option<PathBuf>,
    /// Entities kept per calendar month when --articles is given.
    #[arg(long, default_value_t = 10)]
    pub per_month: usize,
    /// Controversial topics kept after ranking by out-degree.
    #[arg(long, default_value_t = 300)]
    pub top_k: usize,
    /// Output topic records.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildDataset {
    /// Article corpus, one JSON record per line.
    #[arg(long)]
    pub articles: PathBuf,
    /// Topic records from curate-topics.
    #[arg(long)]
    pub topics: PathBuf,
    /// Sentences kept on each side of the first mention.
    #[arg(long, default_value_t = stance_scope::corpus::DEFAULT_WINDOW)]
    pub window: usize,
    /// Output annotation contexts.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Aggregate {
    /// Annotation contexts, each with a `votes` array of three labels.
    #[arg(long)]
    pub votes: PathBuf,
    /// Output dataset, discarded examples included.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Split {
    /// Dataset file.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory receiving train.jsonl, validation.jsonl and test.jsonl; created when missing.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Share of retained examples aimed at the training part.
    #[arg(long, default_value_t = 0.7)]
    pub train_ratio: f64,
    /// Share aimed at the validation part.
    #[arg(long, default_value_t = 0.2)]
    pub validation_ratio: f64,
    /// Share aimed at the test part.
    #[arg(long, default_value_t = 0.1)]
    pub test_ratio: f64,
}

#[derive(Debug, Args)]
pub struct SynthCorpus {
    /// Number of examples, discarded ones included.
    #[arg(long)]
    pub n: usize,
    /// Distinct topics, at most 144.
    #[arg(long, default_value_t = 144)]
    pub topics: usize,
    /// Output dataset.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Train {
    /// Training split.
    #[arg(long)]
    pub train: PathBuf,
    /// Validation split used for early stopping.
    #[arg(long)]
    pub validation: PathBuf,
    /// Pretrained embeddings in `word v1 .. vd` text format.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Output checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch history records; defaults to the checkpoint path with a `.history.jsonl` suffix.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Word embedding width; must match --embeddings when given.
    #[arg(long, default_value_t = 100)]
    pub embedding_dim: usize,
    /// LSTM hidden size per direction.
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Examples per gradient step.
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Upper bound on training epochs.
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// Non-improving epochs tolerated; 0 stops after the first epoch.
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// Tokens seen at least this often enter the vocabulary.
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,
    /// Article inputs are truncated to this many tokens.
    #[arg(long, default_value_t = 128)]
    pub max_tokens: usize,
    /// Keep embeddings fixed during training.
    #[arg(long)]
    pub freeze_embeddings: bool,
}

#[derive(Debug, Args)]
pub struct Evaluate {
    /// Model checkpoint written by train.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset file to score.
    #[arg(long)]
    pub split: PathBuf,
    /// Human-readable text or one JSON record per metric.
    #[arg(long, value_enum, default_value_t = Format::Plain)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct Predict {
    /// Model checkpoint written by train.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Topic the stance is taken towards.
    #[arg(long)]
    pub topic: String,
    /// Headline and excerpt as one string.
    #[arg(long)]
    pub text: String,
    /// Human-readable text or one JSON record.
    #[arg(long, value_enum, default_value_t = Format::Plain)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct Gradcheck {
    /// Consecutive seeds checked, starting at --seed.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Word embedding width of the checked model.
    #[arg(long, default_value_t = 8)]
    pub embedding_dim: usize,
    /// LSTM hidden size of the checked model.
    #[arg(long, default_value_t = 8)]
    pub hidden: usize,
    /// Length of the topic and the article sequence.
    #[arg(long, default_value_t = 5)]
    pub tokens: usize,
    /// Central-difference step.
    #[arg(long, default_value_t = 5e-4)]
    pub eps: f64,
    /// Largest relative error that still passes.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    Fixture,
    Http,
}

#[derive(Debug, Args)]
pub struct Serve {
    /// Checkpoint to serve; without one the API answers 503 until a model is loaded.
    #[arg(long, env = "STANCE_MODEL")]
    pub model: Option<PathBuf>,
    /// Article source: the fixture corpus or a news API over HTTP.
    #[arg(long, value_enum, default_value_t = ProviderKind::Fixture)]
    pub provider: ProviderKind,
    /// Article corpus for the fixture provider.
    #[arg(long, env = "STANCE_CORPUS")]
    pub corpus: Option<PathBuf>,
    /// JSON configuration of the HTTP provider.
    #[arg(long, env = "STANCE_PROVIDER_CONFIG")]
    pub provider_config: Option<PathBuf>,
    /// Outlet prominence table, `host<TAB>rank` per line.
    #[arg(long, env = "STANCE_RANKS")]
    pub ranks: PathBuf,
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Port to bind.
    #[arg(long, env = "STANCE_PORT", default_value_t = stance_scope_server::DEFAULT_PORT)]
    pub port: u16,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
