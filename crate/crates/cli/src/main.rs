mod commands;
mod output;

use std::panic;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use depsim::recommend::{ModelKind, Neighbors};
use depsim::Scaling;

/// Library embeddings, clustering and recommendations from dependency files.
#[derive(Debug, Parser)]
#[command(name = "depsim", version)]
struct Cli {
    /// Worker threads for parallel steps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a tree of owner__name/requirements-YYYY.txt files into a corpus.
    Ingest {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Library popularity report.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        /// Restrict counts to one year.
        #[arg(long)]
        year: Option<i32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Factor the co-occurrence matrix into library and repository vectors.
    Embed {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = depsim::embed::DEFAULT_DIM)]
        dim: usize,
        #[arg(long, value_enum, default_value_t = ScalingArg::Sigma)]
        scaling: ScalingArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Group library vectors with k-means.
    Cluster(ClusterArgs),
    /// Merge clusters bottom-up into a tree.
    Dendrogram {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        /// Newick output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON merge list output.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Suggest libraries for a project.
    Recommend(RecommendArgs),
    /// Build and run the historical benchmark.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Generate a synthetic corpus with planted domains.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScalingArg {
    Sigma,
    None,
}

impl From<ScalingArg> for Scaling {
    fn from(s: ScalingArg) -> Self {
        match s {
            ScalingArg::Sigma => Scaling::Sigma,
            ScalingArg::None => Scaling::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Rle,
    Dre,
    Jaccard,
    Baseline,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Rle => ModelKind::Rle,
            KindArg::Dre => ModelKind::Dre,
            KindArg::Jaccard => ModelKind::Jaccard,
            KindArg::Baseline => ModelKind::Baseline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Relevant,
    Explore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[arg(long)]
    model: PathBuf,
    /// Fixed number of clusters.
    #[arg(long, conflicts_with_all = ["select_k", "refs"])]
    k: Option<usize>,
    /// Range of cluster counts to scan, as LO..HI (default 2..64).
    #[arg(long)]
    select_k: Option<String>,
    /// Random relabelings per cluster count.
    #[arg(long)]
    refs: Option<usize>,
    #[arg(long, default_value_t = depsim::cluster::DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = depsim::cluster::DEFAULT_WINDOW)]
    window: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Partition CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Gap curve CSV output.
    #[arg(long)]
    gap_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScoringArgs {
    #[arg(long, value_enum, default_value_t = Mode::Relevant)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = KindArg::Rle)]
    model_type: KindArg,
    /// Power of the IDF term (overrides the mode).
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Power of the similarity term (overrides the mode).
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Number of nearest repositories, or "all" (overrides the mode).
    #[arg(long)]
    neighbors: Option<Neighbors>,
}

#[derive(Debug, Args)]
struct RecommendArgs {
    /// Embedding model; needed for rle and dre.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, required_unless_present = "repo", conflicts_with = "repo")]
    requirements: Option<PathBuf>,
    /// Repository id, owner/name.
    #[arg(long, requires = "year")]
    repo: Option<String>,
    /// Year slice to search.
    #[arg(long)]
    year: Option<i32>,
    #[command(flatten)]
    scoring: ScoringArgs,
    #[arg(long, default_value_t = 10)]
    top: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    /// Derive benchmark entries from consecutive years.
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate one parameter set.
    Run {
        #[arg(long)]
        bench: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a parameter grid.
    Grid {
        #[arg(long)]
        bench: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        /// Model types to evaluate.
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [KindArg::Rle, KindArg::Dre, KindArg::Jaccard, KindArg::Baseline])]
        models: Vec<KindArg>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0])]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.0, 1.0, 2.0])]
        betas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [10, 50, 100, 200, 500].map(Neighbors::Top))]
        neighbors: Vec<Neighbors>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    domains: usize,
    #[arg(long, default_value_t = 60)]
    libs_per_domain: usize,
    #[arg(long, default_value_t = 1.5)]
    zipf: f64,
    #[arg(long, default_value_t = 2000)]
    projects: usize,
    #[arg(long, default_value_t = 3)]
    deps_min: usize,
    #[arg(long, default_value_t = 12)]
    deps_max: usize,
    #[arg(long, default_value_t = 3)]
    years: usize,
    #[arg(long, default_value_t = 0.5)]
    add_rate: f64,
    #[arg(long, default_value_t = 0.5)]
    tail_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub(crate) enum CliError {
    /// Bad flags; one message per offending flag.
    Usage(Vec<String>),
    /// Unreadable or inconsistent input.
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Data(e.into())
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    panic::set_hook(Box::new(|info| eprintln!("internal error: {info}")));
    match panic::catch_unwind(|| commands::run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(CliError::Usage(messages))) => {
            for m in messages {
                eprintln!("error: {m}");
            }
            ExitCode::from(EXIT_USAGE)
        }
        Ok(Err(CliError::Data(e))) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
