//! A benchmark replayed from how repositories actually changed.
//!
//! For every repository present in two consecutive years, the libraries it
//! added in the later year are the targets a recommender should find given
//! the earlier dependency set. Rankings only see the earlier year's slice.

mod metrics;
mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{idf_table, Corpus, CorpusError, IdfScope, IdfTable, SnapshotKey};
use crate::embed::{EmbedError, EmbeddingModel};
use crate::recommend::{rank, score_candidates, ModelKind, Neighbors, Query, RecommendError, ScoringParams, SliceIndex};
use crate::reqparse::LibraryName;

pub use metrics::{precision_at_k, recall_at_k, reciprocal_rank, EntryMetrics, MetricsReport};
pub use synth::{synth_corpus, SynthConfig, SynthCorpus, SYNTH_FIRST_YEAR};

/// Largest number of added plus removed libraries between two versions.
pub const MAX_CHANGES: usize = 10;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no repository has snapshots in two consecutive years")]
    NoConsecutivePairs,
    #[error("target set is empty")]
    EmptyTargets,
    #[error("the benchmark has no entries")]
    EmptyBenchmark,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{}:{line}: {reason}", path.display())]
    MalformedRecord { path: PathBuf, line: usize, reason: String },
    #[error(transparent)]
    Recommend(#[from] RecommendError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkEntry {
    pub repo: String,
    pub year: i32,
    /// Dependencies at `year`.
    pub given: BTreeSet<LibraryName>,
    /// Libraries added by `year + 1`.
    pub targets: BTreeSet<LibraryName>,
}

impl BenchmarkEntry {
    pub fn key(&self) -> SnapshotKey {
        SnapshotKey::new(self.repo.clone(), self.year)
    }
}

/// One entry per repository and year `Y` with a snapshot at `Y + 1` that
/// added at least one library and changed at most [`MAX_CHANGES`].
pub fn build_benchmark(corpus: &Corpus) -> Result<Vec<BenchmarkEntry>, BenchError> {
    let mut entries = Vec::new();
    let mut pairs = 0;
    // Snapshots are sorted by (repo, year).
    for w in corpus.snapshots().windows(2) {
        let (old, new) = (&w[0], &w[1]);
        if old.repo != new.repo || new.year != old.year + 1 {
            continue;
        }
        pairs += 1;
        let added: BTreeSet<LibraryName> = new.deps.difference(&old.deps).cloned().collect();
        let removed = old.deps.difference(&new.deps).count();
        if added.is_empty() || added.len() + removed > MAX_CHANGES {
            continue;
        }
        entries.push(BenchmarkEntry {
            repo: old.repo.clone(),
            year: old.year,
            given: old.deps.clone(),
            targets: added,
        });
    }
    if pairs == 0 {
        return Err(BenchError::NoConsecutivePairs);
    }
    Ok(entries)
}

pub fn write_benchmark<W: Write>(entries: &[BenchmarkEntry], mut out: W) -> io::Result<()> {
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_benchmark(entries: &[BenchmarkEntry], path: &Path) -> Result<(), BenchError> {
    write_benchmark(entries, BufWriter::new(File::create(path)?))?;
    Ok(())
}

pub fn read_benchmark<R: BufRead>(input: R, path: &Path) -> Result<Vec<BenchmarkEntry>, BenchError> {
    let mut entries = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| BenchError::MalformedRecord {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let e: BenchmarkEntry = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if e.targets.is_empty() {
            return Err(malformed("empty targets".into()));
        }
        if !e.targets.is_disjoint(&e.given) {
            return Err(malformed("targets overlap the given dependencies".into()));
        }
        entries.push(e);
    }
    Ok(entries)
}

pub fn load_benchmark(path: &Path) -> Result<Vec<BenchmarkEntry>, BenchError> {
    read_benchmark(BufReader::new(File::open(path)?), path)
}

/// Slice-level state shared by every entry of one year.
struct YearContext<'a> {
    index: SliceIndex<'a>,
    idf: IdfTable,
}

fn contexts<'a>(
    entries: &[&BenchmarkEntry],
    kind: ModelKind,
    corpus: &'a Corpus,
    model: Option<&EmbeddingModel>,
) -> Result<BTreeMap<i32, YearContext<'a>>, BenchError> {
    let years: BTreeSet<i32> = entries.iter().map(|e| e.year).collect();
    years
        .into_iter()
        .filter(|&y| !corpus.slice(y).is_empty())
        .map(|y| {
            Ok((
                y,
                YearContext {
                    index: SliceIndex::for_slice(corpus, Some(y), kind, model)?,
                    idf: idf_table(corpus, IdfScope::Year(y))?,
                },
            ))
        })
        .collect()
}

/// Errors that leave an entry with nothing to rank rather than abort.
fn unrankable(e: &RecommendError) -> bool {
    matches!(
        e,
        RecommendError::NoCandidates
            | RecommendError::EmptySlice
            | RecommendError::Embed(EmbedError::UnknownLibraries(_) | EmbedError::ZeroVector | EmbedError::EmptyDeps)
    )
}

fn or_empty<T>(r: Result<Vec<T>, RecommendError>) -> Result<Vec<T>, BenchError> {
    match r {
        Ok(v) => Ok(v),
        Err(e) if unrankable(&e) => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}

fn query_for(entry: &BenchmarkEntry, kind: ModelKind, model: Option<&EmbeddingModel>) -> Result<Query, RecommendError> {
    Query::new(entry.given.clone(), kind, model, Some(entry.key()))
}

fn full(params: &ScoringParams) -> ScoringParams {
    ScoringParams {
        top_n: usize::MAX,
        ..*params
    }
}

fn rank_in(
    entry: &BenchmarkEntry,
    params: &ScoringParams,
    ctx: Option<&YearContext<'_>>,
    model: Option<&EmbeddingModel>,
) -> Result<Vec<LibraryName>, BenchError> {
    let Some(ctx) = ctx else { return Ok(Vec::new()) };
    let recs = or_empty(query_for(entry, params.model_kind, model).and_then(|q| rank(&q, &ctx.index, &ctx.idf, &full(params))))?;
    Ok(recs.into_iter().map(|r| r.library).collect())
}

/// Full candidate ranking for one entry, computed on the entry's year only.
pub fn rank_for_entry(
    entry: &BenchmarkEntry,
    params: &ScoringParams,
    corpus: &Corpus,
    model: Option<&EmbeddingModel>,
) -> Result<Vec<LibraryName>, BenchError> {
    params.validate()?;
    let ctx = contexts(&[entry], params.model_kind, corpus, model)?;
    rank_in(entry, params, ctx.get(&entry.year), model)
}

fn canonical(benchmark: &[BenchmarkEntry]) -> Result<Vec<&BenchmarkEntry>, BenchError> {
    if benchmark.is_empty() {
        return Err(BenchError::EmptyBenchmark);
    }
    let mut sorted: Vec<&BenchmarkEntry> = benchmark.iter().collect();
    sorted.sort_by(|a, b| (&a.repo, a.year, &a.given, &a.targets).cmp(&(&b.repo, b.year, &b.given, &b.targets)));
    Ok(sorted)
}

/// Mean metrics over the benchmark. Independent of entry order.
pub fn evaluate(
    params: &ScoringParams,
    benchmark: &[BenchmarkEntry],
    corpus: &Corpus,
    model: Option<&EmbeddingModel>,
) -> Result<MetricsReport, BenchError> {
    params.validate()?;
    let entries = canonical(benchmark)?;
    let ctx = contexts(&entries, params.model_kind, corpus, model)?;
    let per_entry = entries
        .par_iter()
        .map(|e| EntryMetrics::of(&rank_in(e, params, ctx.get(&e.year), model)?, &e.targets))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricsReport::average(&per_entry))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub kinds: Vec<ModelKind>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub neighbors: Vec<Neighbors>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            kinds: ModelKind::ALL.to_vec(),
            alphas: vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0],
            betas: vec![0.0, 1.0, 2.0],
            neighbors: [10, 50, 100, 200, 500].map(Neighbors::Top).to_vec(),
        }
    }
}

/// One evaluated grid point. The baseline has no parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRow {
    pub kind: ModelKind,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub k_neighbors: Option<Neighbors>,
    pub metrics: MetricsReport,
}

fn widest(ks: &[Neighbors]) -> Neighbors {
    if ks.contains(&Neighbors::All) {
        Neighbors::All
    } else {
        Neighbors::Top(ks.iter().map(|k| if let Neighbors::Top(n) = k { *n } else { 0 }).max().unwrap_or(0))
    }
}

/// Evaluates every (kind, α, β, K) combination. Rows are ordered by kind
/// as given, then α, β and K. Each entry's neighbor list is searched once
/// per kind and reused for every grid point.
pub fn grid_search(
    spec: &GridSpec,
    benchmark: &[BenchmarkEntry],
    corpus: &Corpus,
    model: Option<&EmbeddingModel>,
) -> Result<Vec<GridRow>, BenchError> {
    let needs_grid = spec.kinds.iter().any(|k| *k != ModelKind::Baseline);
    if spec.kinds.is_empty() || (needs_grid && (spec.alphas.is_empty() || spec.betas.is_empty() || spec.neighbors.is_empty())) {
        return Err(BenchError::InvalidConfig("grids must be nonempty".into()));
    }
    let entries = canonical(benchmark)?;
    let mut rows = Vec::new();
    for &kind in &spec.kinds {
        if kind == ModelKind::Baseline {
            let params = ScoringParams::relevant(kind);
            rows.push(GridRow {
                kind,
                alpha: None,
                beta: None,
                k_neighbors: None,
                metrics: evaluate(&params, benchmark, corpus, model)?,
            });
            continue;
        }
        let points: Vec<ScoringParams> = spec
            .alphas
            .iter()
            .flat_map(|&alpha| {
                spec.betas.iter().flat_map(move |&beta| {
                    spec.neighbors.iter().map(move |&k| ScoringParams {
                        alpha,
                        beta,
                        k_neighbors: k,
                        model_kind: kind,
                        top_n: usize::MAX,
                    })
                })
            })
            .collect();
        for p in &points {
            p.validate()?;
        }
        let ctx = contexts(&entries, kind, corpus, model)?;
        let widest = widest(&spec.neighbors);
        let per_entry: Vec<Vec<EntryMetrics>> = entries
            .par_iter()
            .map(|e| -> Result<Vec<EntryMetrics>, BenchError> {
                let Some(c) = ctx.get(&e.year) else {
                    return points.iter().map(|_| EntryMetrics::of::<LibraryName>(&[], &e.targets)).collect();
                };
                let neighbors = or_empty(query_for(e, kind, model).and_then(|q| c.index.nearest(&q, widest)))?;
                points
                    .iter()
                    .map(|p| {
                        let k = match p.k_neighbors {
                            Neighbors::All => neighbors.len(),
                            Neighbors::Top(k) => k.min(neighbors.len()),
                        };
                        let recs = or_empty(score_candidates(&e.given, &neighbors[..k], p, &c.idf, &c.index))?;
                        let ranked: Vec<LibraryName> = recs.into_iter().map(|r| r.library).collect();
                        EntryMetrics::of(&ranked, &e.targets)
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        for (i, p) in points.iter().enumerate() {
            let column: Vec<EntryMetrics> = per_entry.iter().map(|m| m[i]).collect();
            rows.push(GridRow {
                kind,
                alpha: Some(p.alpha),
                beta: Some(p.beta),
                k_neighbors: Some(p.k_neighbors),
                metrics: MetricsReport::average(&column),
            });
        }
    }
    Ok(rows)
}

pub const RESULTS_HEADER: [&str; 11] = [
    "model", "alpha", "beta", "k_neighbors", "prec1", "prec3", "prec5", "rec5", "rec10", "mrr", "n_entries",
];

/// Results CSV; parameter cells are empty for the baseline.
pub fn write_results<W: Write>(rows: &[GridRow], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.kind.to_string(),
            opt(r.alpha),
            opt(r.beta),
            r.k_neighbors.map_or(String::new(), |k| k.to_string()),
            m.prec1.to_string(),
            m.prec3.to_string(),
            m.prec5.to_string(),
            m.rec5.to_string(),
            m.rec10.to_string(),
            m.mrr.to_string(),
            m.n_entries.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

impl GridRow {
    /// The row for a single evaluated parameter set.
    pub fn single(params: &ScoringParams, metrics: MetricsReport) -> Self {
        let baseline = params.model_kind == ModelKind::Baseline;
        Self {
            kind: params.model_kind,
            alpha: (!baseline).then_some(params.alpha),
            beta: (!baseline).then_some(params.beta),
            k_neighbors: (!baseline).then_some(params.k_neighbors),
            metrics,
        }
    }
}
