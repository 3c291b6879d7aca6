//! `ivkg`: mine instrument candidates from a causal graph, build text features,
//! train the classifier, and estimate IV regressions.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ivkg_core::{Direction, ExclusionMode};

/// Version of the JSON layouts written by this binary.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "ivkg",
    version,
    about = "Instrument mining over causal knowledge graphs and IV estimation"
)]
pub struct Cli {
    #[command(flatten)]
    pub shared: Shared,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Shared {
    /// Seed for every random draw (default 0; `synth panel` defaults to 42).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Hop bound for reachability.
    #[arg(long, global = true, default_value_t = 3)]
    pub hops: usize,
    #[arg(long, global = true, value_enum, default_value_t = DirectionArg::Directed)]
    pub direction: DirectionArg,
    #[arg(long, global = true, value_enum, default_value_t = ExclusionArg::ARemoved)]
    pub exclusion: ExclusionArg,
    /// Edge weight at or above which a rubric point is awarded.
    #[arg(long, global = true, default_value_t = 5.0)]
    pub weight_threshold: f64,
    /// Report format for standard output; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (default: all cores). Output never depends on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionArg {
    Directed,
    Undirected,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Directed => Direction::Directed,
            DirectionArg::Undirected => Direction::Undirected,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExclusionArg {
    ARemoved,
    Literal,
}

impl From<ExclusionArg> for ExclusionMode {
    fn from(e: ExclusionArg) -> Self {
        match e {
            ExclusionArg::ARemoved => ExclusionMode::ARemoved,
            ExclusionArg::Literal => ExclusionMode::Literal,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Tsv,
    Json,
    Text,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Enumerate and score (Z, A, B) instrument triples.
    Mine(MineArgs),
    /// Compare the instrument sets of two triple files.
    Compare(CompareArgs),
    /// Build the weighted term-frequency matrix for a corpus.
    Features(FeaturesArgs),
    /// Train and evaluate the random-forest classifier.
    Classify(ClassifyArgs),
    /// Two-stage least squares with weak-instrument diagnostics.
    Tsls(TslsArgs),
    /// Write synthetic fixtures.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct MineArgs {
    #[arg(long)]
    pub nodes: PathBuf,
    #[arg(long)]
    pub edges: PathBuf,
    /// Write triples.tsv, stats.json and quality.json here instead of stdout.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Enumerate with the brute-force oracle (small graphs only).
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    /// Directory of `.txt` documents with an optional labels.tsv.
    #[arg(long)]
    pub corpus: PathBuf,
    /// `term\tscore` table of similarity-filtered concepts.
    #[arg(long, conflicts_with_all = ["nodes", "edges"], required_unless_present = "nodes")]
    pub similarity: Option<PathBuf>,
    #[arg(long, default_value_t = ivkg_core::textfeat::DEFAULT_SIMILARITY_THRESHOLD)]
    pub similarity_threshold: f64,
    /// Take concepts from graph node terms.
    #[arg(long, requires = "edges")]
    pub nodes: Option<PathBuf>,
    #[arg(long, requires = "nodes")]
    pub edges: Option<PathBuf>,
    /// Give every graph concept weight 1 instead of its largest edge weight.
    #[arg(long, requires = "nodes")]
    pub unweighted: bool,
    /// One stopword per line; replaces the built-in English list.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    /// Labelled feature matrix CSV from `features`.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub min_samples_split: usize,
    /// `sqrt`, `all`, or a count.
    #[arg(long, default_value = "sqrt")]
    pub max_features: String,
    /// Class counted as positive (default: the larger label in sort order).
    #[arg(long)]
    pub positive_label: Option<String>,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TslsArgs {
    #[arg(long)]
    pub panel: PathBuf,
    /// JSON regression spec; overrides the column flags.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, required_unless_present = "spec")]
    pub outcome: Option<String>,
    #[arg(long, required_unless_present = "spec")]
    pub endogenous: Option<String>,
    #[arg(long = "instrument", required_unless_present = "spec")]
    pub instruments: Vec<String>,
    #[arg(long = "control")]
    pub controls: Vec<String>,
    #[arg(long = "fixed-effect")]
    pub fixed_effects: Vec<String>,
    /// `HC1` or `none`.
    #[arg(long, default_value = "HC1")]
    pub robust: String,
    #[arg(long)]
    pub json_out: Option<PathBuf>,
    #[arg(long)]
    pub table_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(subcommand)]
    pub kind: SynthKind,
}

#[derive(Subcommand, Debug)]
pub enum SynthKind {
    /// Random weighted digraph as nodes.tsv and edges.tsv.
    Graph {
        #[arg(long, default_value_t = 100)]
        n_nodes: usize,
        #[arg(long, default_value_t = 0.05)]
        edge_prob: f64,
        #[arg(long, default_value_t = 0.5)]
        weight_min: f64,
        #[arg(long, default_value_t = 10.0)]
        weight_max: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// The 7-node worked example as nodes.tsv and edges.tsv.
    WorkedExample {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Confounded panel CSV with columns z, a, b (+ industry, year).
    Panel {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        pi: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_nu: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_eps: f64,
        /// Adds industry and year factors with random intercepts.
        #[arg(long, requires = "years")]
        industries: Option<usize>,
        #[arg(long, requires = "industries")]
        years: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        intercept_sd: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Labelled two-class corpus plus a similarity table.
    Corpus {
        #[arg(long, default_value_t = 400)]
        n_docs: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<ivkg_core::Error> for Failure {
    fn from(e: ivkg_core::Error) -> Self {
        Self {
            code: if e.is_numeric() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::input(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.shared.workers {
        Some(0) => Err(Failure::input("--workers must be at least 1")),
        workers => ivkg_core::exec::with_workers(workers, || commands::run(&cli)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
