//! Library recommendations from nearest-neighbor repositories.
//!
//! For a query repository `R`, the `K` repositories of a year slice closest
//! to `R` are found. Every library `L` they use that `R` does not is scored
//!
//! ```text
//! score(L) = idf(L)^α · Σ_{neighbors n containing L} sim(R, n)^β
//! ```
//!
//! where `sim = clamp(1 − distance, 0, 1)`. A negative `α` favors popular
//! libraries, a large positive `α` surfaces rare ones.
//!
//! Four [`ModelKind`]s differ only in how distance is measured:
//! [`ModelKind::Rle`] and [`ModelKind::Dre`] use cosine distance between
//! embeddings, [`ModelKind::Jaccard`] compares dependency sets directly, and
//! [`ModelKind::Baseline`] ignores the query and ranks by popularity.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{idf_table, Corpus, CorpusError, IdfScope, IdfTable, ProjectSnapshot, SnapshotKey};
use crate::embed::{dot, dre_vector, rle_vector, EmbedError, EmbeddingModel};
use crate::reqparse::LibraryName;

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error("the slice has no repositories to compare against")]
    EmptySlice,
    #[error("every library used by the neighbors is already a dependency")]
    NoCandidates,
    #[error("jaccard distance is undefined for two empty sets")]
    BothEmpty,
    #[error("snapshot {0} is not in the corpus")]
    UnknownSnapshot(SnapshotKey),
    #[error("model kind {0} needs an embedding model")]
    MissingModel(ModelKind),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Mean of the library embeddings.
    Rle,
    /// Fold-in of the dependency indicator row.
    Dre,
    /// Jaccard distance between dependency sets.
    Jaccard,
    /// Popularity in the slice.
    Baseline,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Rle, ModelKind::Dre, ModelKind::Jaccard, ModelKind::Baseline];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rle => "rle",
            ModelKind::Dre => "dre",
            ModelKind::Jaccard => "jaccard",
            ModelKind::Baseline => "baseline",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, ModelKind::Rle | ModelKind::Dre)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rle" => Ok(ModelKind::Rle),
            "dre" => Ok(ModelKind::Dre),
            "jaccard" => Ok(ModelKind::Jaccard),
            "baseline" => Ok(ModelKind::Baseline),
            _ => Err(format!("unknown model kind {s:?} (expected rle, dre, jaccard or baseline)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Neighbors {
    All,
    Top(usize),
}

impl Neighbors {
    fn limit(self, n: usize) -> usize {
        match self {
            Neighbors::All => n,
            Neighbors::Top(k) => k.min(n),
        }
    }
}

impl fmt::Display for Neighbors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Neighbors::All => f.write_str("all"),
            Neighbors::Top(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for Neighbors {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(Neighbors::All);
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(Neighbors::Top(k)),
            _ => Err(format!("neighbor count must be a positive integer or \"all\", got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringParams {
    /// Power of the IDF term.
    pub alpha: f64,
    /// Power of the similarity term.
    pub beta: f64,
    pub k_neighbors: Neighbors,
    pub model_kind: ModelKind,
    pub top_n: usize,
}

impl ScoringParams {
    /// Settings that recover libraries a project is likely to adopt next.
    pub fn relevant(kind: ModelKind) -> Self {
        let k = if kind == ModelKind::Jaccard { 100 } else { 500 };
        Self {
            alpha: -1.0,
            beta: 2.0,
            k_neighbors: Neighbors::Top(k),
            model_kind: kind,
            top_n: 10,
        }
    }

    /// Settings that favor rare, specialized libraries.
    pub fn explore(kind: ModelKind) -> Self {
        Self {
            alpha: 3.0,
            beta: 2.0,
            k_neighbors: Neighbors::Top(50),
            model_kind: kind,
            top_n: 10,
        }
    }

    pub fn validate(&self) -> Result<(), RecommendError> {
        if !self.alpha.is_finite() {
            return Err(RecommendError::InvalidParams(format!("alpha must be finite, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(RecommendError::InvalidParams(format!("beta must be a finite value >= 0, got {}", self.beta)));
        }
        if self.k_neighbors == Neighbors::Top(0) {
            return Err(RecommendError::InvalidParams("neighbor count must be positive".into()));
        }
        if self.top_n == 0 {
            return Err(RecommendError::InvalidParams("top must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub library: LibraryName,
    pub score: f64,
    /// Neighbors that use the library (slice popularity for the baseline).
    pub supporting_neighbors: usize,
}

/// `1 − |A ∩ B| / |A ∪ B|`.
pub fn jaccard_distance<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> Result<f64, RecommendError> {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        return Err(RecommendError::BothEmpty);
    }
    Ok(1.0 - inter as f64 / union as f64)
}

/// A query: its dependencies plus, for embedding kinds, its vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub deps: BTreeSet<LibraryName>,
    pub vector: Option<Vec<f64>>,
    /// Snapshot left out of the neighbor search.
    pub exclude: Option<SnapshotKey>,
    /// Query libraries the model does not know.
    pub ignored: Vec<LibraryName>,
    /// True when a DRE vector was computed by fold-in rather than looked up.
    pub folded_in: bool,
}

impl Query {
    /// Vectorizes `deps` for `kind`. For DRE a stored vector of `snapshot` is
    /// used when the model has one.
    pub fn new(
        deps: BTreeSet<LibraryName>,
        kind: ModelKind,
        model: Option<&EmbeddingModel>,
        snapshot: Option<SnapshotKey>,
    ) -> Result<Self, RecommendError> {
        if deps.is_empty() {
            return Err(EmbedError::EmptyDeps.into());
        }
        let mut query = Query {
            deps,
            vector: None,
            exclude: snapshot,
            ignored: Vec::new(),
            folded_in: false,
        };
        let model = match (kind.needs_model(), model) {
            (false, _) => return Ok(query),
            (true, None) => return Err(RecommendError::MissingModel(kind)),
            (true, Some(m)) => m,
        };
        let stored = query.exclude.as_ref().and_then(|k| model.repo_vector(k));
        let v = match (kind, stored) {
            (ModelKind::Dre, Some(v)) => {
                let ignored = query.deps.iter().filter(|d| model.library_index(d.as_str()).is_none()).cloned().collect();
                crate::embed::Vectorized { vector: v.to_vec(), ignored }
            }
            (ModelKind::Dre, None) => {
                query.folded_in = true;
                dre_vector(&query.deps, model)?
            }
            _ => rle_vector(&query.deps, model)?,
        };
        if dot(&v.vector, &v.vector) == 0.0 {
            return Err(EmbedError::ZeroVector.into());
        }
        query.vector = Some(v.vector);
        query.ignored = v.ignored;
        Ok(query)
    }
}

struct Item<'a> {
    snapshot: &'a ProjectSnapshot,
    vector: Vec<f64>,
    sq_norm: f64,
}

/// The repositories of one slice, prepared for repeated neighbor searches.
pub struct SliceIndex<'a> {
    kind: ModelKind,
    items: Vec<Item<'a>>,
    df: HashMap<&'a str, (usize, &'a LibraryName)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<'a> {
    pub snapshot: &'a ProjectSnapshot,
    pub distance: f64,
}

fn snapshot_vector(s: &ProjectSnapshot, kind: ModelKind, model: &EmbeddingModel) -> Vec<f64> {
    let vectorized = match kind {
        ModelKind::Dre => match model.repo_vector(&s.key()) {
            Some(v) => return v.to_vec(),
            None => dre_vector(&s.deps, model),
        },
        _ => rle_vector(&s.deps, model),
    };
    // Snapshots with no known library sit at distance 1 from every query.
    vectorized.map_or_else(|_| vec![0.0; model.dim()], |v| v.vector)
}

impl<'a> SliceIndex<'a> {
    pub fn new(
        snapshots: Vec<&'a ProjectSnapshot>,
        kind: ModelKind,
        model: Option<&EmbeddingModel>,
    ) -> Result<Self, RecommendError> {
        if snapshots.is_empty() {
            return Err(RecommendError::EmptySlice);
        }
        let model = match (kind.needs_model(), model) {
            (true, None) => return Err(RecommendError::MissingModel(kind)),
            (true, m) => m,
            (false, _) => None,
        };
        let mut df: HashMap<&str, (usize, &LibraryName)> = HashMap::new();
        let items = snapshots
            .into_iter()
            .map(|snapshot| {
                for d in &snapshot.deps {
                    df.entry(d.as_str()).or_insert((0, d)).0 += 1;
                }
                let vector = model.map_or_else(Vec::new, |m| snapshot_vector(snapshot, kind, m));
                let sq_norm = dot(&vector, &vector);
                Item { snapshot, vector, sq_norm }
            })
            .collect();
        Ok(Self { kind, items, df })
    }

    /// Index over one year of `corpus`, or all of it when `year` is `None`.
    pub fn for_slice(
        corpus: &'a Corpus,
        year: Option<i32>,
        kind: ModelKind,
        model: Option<&EmbeddingModel>,
    ) -> Result<Self, RecommendError> {
        let snapshots = match year {
            Some(y) => corpus.slice(y),
            None => corpus.snapshots().iter().collect(),
        };
        Self::new(snapshots, kind, model)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Number of slice repositories using `lib`.
    pub fn df(&self, lib: &str) -> usize {
        self.df.get(lib).map_or(0, |e| e.0)
    }

    fn distance(&self, item: &Item<'_>, query: &Query, query_sq: f64) -> Result<f64, RecommendError> {
        match self.kind {
            ModelKind::Jaccard => jaccard_distance(&query.deps, &item.snapshot.deps),
            ModelKind::Baseline => Ok(1.0),
            _ => {
                let q = query.vector.as_deref().ok_or(EmbedError::ZeroVector)?;
                if item.sq_norm == 0.0 {
                    return Ok(1.0);
                }
                Ok((1.0 - dot(q, &item.vector) / (query_sq * item.sq_norm).sqrt()).clamp(0.0, 2.0))
            }
        }
    }

    /// The `k` closest repositories, nearest first; ties by repository id.
    pub fn nearest(&self, query: &Query, k: Neighbors) -> Result<Vec<Neighbor<'a>>, RecommendError> {
        let query_sq = query.vector.as_deref().map_or(0.0, |v| dot(v, v));
        if self.kind.needs_model() && query_sq == 0.0 {
            return Err(EmbedError::ZeroVector.into());
        }
        let mut out = Vec::with_capacity(self.items.len());
        for item in &self.items {
            if query.exclude.as_ref().is_some_and(|e| e.repo == item.snapshot.repo && e.year == item.snapshot.year) {
                continue;
            }
            out.push(Neighbor {
                snapshot: item.snapshot,
                distance: self.distance(item, query, query_sq)?,
            });
        }
        if out.is_empty() {
            return Err(RecommendError::EmptySlice);
        }
        out.sort_by(|a, b| {
            a.distance
                .total_cmp(&b.distance)
                .then_with(|| a.snapshot.repo.cmp(&b.snapshot.repo))
                .then_with(|| a.snapshot.year.cmp(&b.snapshot.year))
        });
        out.truncate(k.limit(out.len()));
        Ok(out)
    }

    /// Slice libraries missing from `deps`, most popular first.
    pub fn popularity(&self, deps: &BTreeSet<LibraryName>, top_n: usize) -> Result<Vec<Recommendation>, RecommendError> {
        let mut recs: Vec<Recommendation> = self
            .df
            .values()
            .filter(|(_, lib)| !deps.contains(*lib))
            .map(|&(df, lib)| Recommendation {
                library: lib.clone(),
                score: df as f64,
                supporting_neighbors: df,
            })
            .collect();
        if recs.is_empty() {
            return Err(RecommendError::NoCandidates);
        }
        recs.sort_by(|a, b| b.supporting_neighbors.cmp(&a.supporting_neighbors).then_with(|| a.library.cmp(&b.library)));
        recs.truncate(top_n);
        Ok(recs)
    }
}

/// Scores every library of `neighbors` that is not in `deps`, best first,
/// keeping `params.top_n`. Ties fall to higher slice popularity, then name.
pub fn score_candidates(
    deps: &BTreeSet<LibraryName>,
    neighbors: &[Neighbor<'_>],
    params: &ScoringParams,
    idf: &IdfTable,
    index: &SliceIndex<'_>,
) -> Result<Vec<Recommendation>, RecommendError> {
    let mut sums: HashMap<&LibraryName, (f64, usize)> = HashMap::new();
    for n in neighbors {
        let weight = (1.0 - n.distance).clamp(0.0, 1.0).powf(params.beta);
        for lib in &n.snapshot.deps {
            if deps.contains(lib) {
                continue;
            }
            let e = sums.entry(lib).or_default();
            e.0 += weight;
            e.1 += 1;
        }
    }
    if sums.is_empty() {
        return Err(RecommendError::NoCandidates);
    }
    let mut recs: Vec<(Recommendation, usize)> = sums
        .into_iter()
        .map(|(lib, (sum, count))| {
            let rec = Recommendation {
                library: lib.clone(),
                score: idf.idf(lib.as_str()).powf(params.alpha) * sum,
                supporting_neighbors: count,
            };
            (rec, index.df(lib.as_str()))
        })
        .collect();
    recs.sort_by(|(a, da), (b, db)| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| db.cmp(da))
            .then_with(|| a.library.cmp(&b.library))
    });
    recs.truncate(params.top_n);
    Ok(recs.into_iter().map(|(r, _)| r).collect())
}

/// Ranks libraries for a prepared query against a prepared slice.
pub fn rank(
    query: &Query,
    index: &SliceIndex<'_>,
    idf: &IdfTable,
    params: &ScoringParams,
) -> Result<Vec<Recommendation>, RecommendError> {
    if index.kind() == ModelKind::Baseline {
        return index.popularity(&query.deps, params.top_n);
    }
    let neighbors = index.nearest(query, params.k_neighbors)?;
    score_candidates(&query.deps, &neighbors, params, idf, index)
}

/// What to recommend for.
#[derive(Debug, Clone, PartialEq)]
pub enum QuerySource {
    /// A dependency set, such as a parsed requirements file.
    Deps(BTreeSet<LibraryName>),
    /// A snapshot already in the corpus.
    Snapshot(SnapshotKey),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecommendOutput {
    pub recommendations: Vec<Recommendation>,
    pub ignored: Vec<LibraryName>,
    pub folded_in: bool,
}

/// End-to-end recommendation.
///
/// The slice is `year` when given, else the snapshot's own year for a
/// snapshot query, else the whole corpus. IDF is computed over the same
/// slice. A snapshot query never counts itself as a neighbor.
pub fn recommend(
    source: &QuerySource,
    model: Option<&EmbeddingModel>,
    corpus: &Corpus,
    params: &ScoringParams,
    year: Option<i32>,
) -> Result<RecommendOutput, RecommendError> {
    params.validate()?;
    let (deps, key) = match source {
        QuerySource::Deps(d) => (d.clone(), None),
        QuerySource::Snapshot(k) => {
            let s = corpus.get(&k.repo, k.year).ok_or_else(|| RecommendError::UnknownSnapshot(k.clone()))?;
            (s.deps.clone(), Some(k.clone()))
        }
    };
    let year = year.or(key.as_ref().map(|k| k.year));
    let query = Query::new(deps, params.model_kind, model, key)?;
    let index = SliceIndex::for_slice(corpus, year, params.model_kind, model)?;
    let scope = year.map_or(IdfScope::Corpus, IdfScope::Year);
    let idf = idf_table(corpus, scope)?;
    Ok(RecommendOutput {
        recommendations: rank(&query, &index, &idf, params)?,
        ignored: query.ignored,
        folded_in: query.folded_in,
    })
}
