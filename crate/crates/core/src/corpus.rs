//! The multi-year dependency corpus: snapshots, the co-occurrence matrix,
//! document frequencies and distribution statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::BinaryCsr;
use crate::reqparse::{parse_requirements, LibraryName};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus root {0} does not exist or is not a directory")]
    MissingRoot(PathBuf),
    #[error("{path}:{line}: malformed record: {reason}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("duplicate snapshot {0}")]
    DuplicateSnapshot(SnapshotKey),
    #[error("snapshot {0} has no dependencies")]
    EmptySnapshot(SnapshotKey),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no snapshots in scope {0}")]
    EmptyScope(IdfScope),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Identifies one repository at one temporal slice.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SnapshotKey {
    pub repo: String,
    pub year: i32,
}

impl SnapshotKey {
    pub fn new(repo: impl Into<String>, year: i32) -> Self {
        Self {
            repo: repo.into(),
            year,
        }
    }
}

impl fmt::Display for SnapshotKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.repo, self.year)
    }
}

impl std::str::FromStr for SnapshotKey {
    type Err = String;

    /// Parses `owner/name@2016`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (repo, year) = s
            .rsplit_once('@')
            .ok_or_else(|| format!("snapshot key {s:?} lacks '@year'"))?;
        let year = year
            .parse()
            .map_err(|_| format!("snapshot key {s:?} has a non-integer year"))?;
        if repo.is_empty() {
            return Err(format!("snapshot key {s:?} has an empty repository"));
        }
        Ok(Self::new(repo, year))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectSnapshot {
    pub repo: String,
    pub year: i32,
    pub deps: BTreeSet<LibraryName>,
}

impl ProjectSnapshot {
    pub fn new(
        repo: impl Into<String>,
        year: i32,
        deps: impl IntoIterator<Item = LibraryName>,
    ) -> Result<Self, CorpusError> {
        let snapshot = Self {
            repo: repo.into(),
            year,
            deps: deps.into_iter().collect(),
        };
        if snapshot.deps.is_empty() {
            return Err(CorpusError::EmptySnapshot(snapshot.key()));
        }
        Ok(snapshot)
    }

    pub fn key(&self) -> SnapshotKey {
        SnapshotKey::new(self.repo.clone(), self.year)
    }
}

/// Snapshots sorted by `(repo, year)` with a per-year index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    snapshots: Vec<ProjectSnapshot>,
    year_index: BTreeMap<i32, Vec<usize>>,
}

impl Corpus {
    pub fn new(mut snapshots: Vec<ProjectSnapshot>) -> Result<Self, CorpusError> {
        snapshots.sort_by(|a, b| (&a.repo, a.year).cmp(&(&b.repo, b.year)));
        for pair in snapshots.windows(2) {
            if pair[0].repo == pair[1].repo && pair[0].year == pair[1].year {
                return Err(CorpusError::DuplicateSnapshot(pair[0].key()));
            }
        }
        if let Some(s) = snapshots.iter().find(|s| s.deps.is_empty()) {
            return Err(CorpusError::EmptySnapshot(s.key()));
        }
        let mut year_index: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
        for (i, s) in snapshots.iter().enumerate() {
            year_index.entry(s.year).or_default().push(i);
        }
        Ok(Self {
            snapshots,
            year_index,
        })
    }

    pub fn snapshots(&self) -> &[ProjectSnapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.year_index.keys().copied()
    }

    pub fn get(&self, repo: &str, year: i32) -> Option<&ProjectSnapshot> {
        self.snapshots
            .binary_search_by(|s| (s.repo.as_str(), s.year).cmp(&(repo, year)))
            .ok()
            .map(|i| &self.snapshots[i])
    }

    /// All snapshots of one year, in `(repo, year)` order.
    pub fn slice(&self, year: i32) -> Vec<&ProjectSnapshot> {
        self.year_index
            .get(&year)
            .map(|ids| ids.iter().map(|&i| &self.snapshots[i]).collect())
            .unwrap_or_default()
    }

    /// Snapshots in scope: one year, or everything.
    pub fn scope(&self, scope: IdfScope) -> Vec<&ProjectSnapshot> {
        match scope {
            IdfScope::Corpus => self.snapshots.iter().collect(),
            IdfScope::Year(year) => self.slice(year),
        }
    }

    /// Sorted global vocabulary.
    pub fn vocabulary(&self) -> Vec<LibraryName> {
        let set: BTreeSet<&LibraryName> = self.snapshots.iter().flat_map(|s| &s.deps).collect();
        set.into_iter().cloned().collect()
    }
}

#[derive(Debug, Clone)]
pub struct IngestIssue {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: Corpus,
    /// Files or directories that do not follow `owner__name/requirements-<year>.txt`.
    pub malformed: Vec<IngestIssue>,
    /// Files that parsed to an empty dependency set.
    pub empty: Vec<PathBuf>,
    /// Per-line parser warnings, prefixed with their file.
    pub warnings: Vec<IngestIssue>,
}

fn year_from_filename(name: &str) -> Option<i32> {
    let year = name.strip_prefix("requirements-")?.strip_suffix(".txt")?;
    if year.len() != 4 || !year.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    year.parse().ok()
}

/// Walks `root/owner__name/requirements-<year>.txt` and parses each file.
///
/// Layout violations are reported and skipped rather than aborting the walk.
pub fn ingest_tree(root: &Path) -> Result<Ingested, CorpusError> {
    if !root.is_dir() {
        return Err(CorpusError::MissingRoot(root.to_path_buf()));
    }
    let mut malformed = Vec::new();
    let mut empty = Vec::new();
    let mut warnings = Vec::new();
    let mut snapshots = Vec::new();

    let mut repo_dirs: Vec<_> = fs::read_dir(root)?.collect::<Result<_, _>>()?;
    repo_dirs.sort_by_key(|e| e.file_name());
    for entry in repo_dirs {
        let path = entry.path();
        let dir_name = entry.file_name().to_string_lossy().into_owned();
        let repo = match (path.is_dir(), dir_name.split_once("__")) {
            (true, Some((owner, name))) if !owner.is_empty() && !name.is_empty() => {
                format!("{owner}/{name}")
            }
            _ => {
                malformed.push(IngestIssue {
                    path,
                    reason: "expected a directory named owner__name".into(),
                });
                continue;
            }
        };
        let mut files: Vec<_> = fs::read_dir(&path)?.collect::<Result<_, _>>()?;
        files.sort_by_key(|e| e.file_name());
        for file in files {
            let file_path = file.path();
            let file_name = file.file_name().to_string_lossy().into_owned();
            let year = match year_from_filename(&file_name) {
                Some(year) if file_path.is_file() => year,
                _ => {
                    malformed.push(IngestIssue {
                        path: file_path,
                        reason: "expected a file named requirements-<year>.txt".into(),
                    });
                    continue;
                }
            };
            let bytes = fs::read(&file_path)?;
            let text = String::from_utf8_lossy(&bytes);
            let report = parse_requirements(&text);
            warnings.extend(report.warnings.iter().map(|w| IngestIssue {
                path: file_path.clone(),
                reason: format!("line {}: {}", w.line, w.reason),
            }));
            if report.is_skippable() {
                empty.push(file_path);
                continue;
            }
            snapshots.push(ProjectSnapshot {
                repo: repo.clone(),
                year,
                deps: report.names,
            });
        }
    }
    Ok(Ingested {
        corpus: Corpus::new(snapshots)?,
        malformed,
        empty,
        warnings,
    })
}

#[derive(Serialize, Deserialize)]
struct Record {
    repo: String,
    year: i32,
    deps: Vec<LibraryName>,
}

/// Writes one JSON object per snapshot, sorted by `(repo, year)`.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> io::Result<()> {
    for s in corpus.snapshots() {
        let record = Record {
            repo: s.repo.clone(),
            year: s.year,
            deps: s.deps.iter().cloned().collect(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let file = fs::File::create(path)?;
    write_corpus(corpus, BufWriter::new(file))?;
    Ok(())
}

pub fn read_corpus<R: BufRead>(input: R, path: &Path) -> Result<Corpus, CorpusError> {
    let malformed = |line: usize, reason: String| CorpusError::MalformedRecord {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut snapshots = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(&line).map_err(|e| malformed(line_no, e.to_string()))?;
        if record.repo.is_empty() {
            return Err(malformed(line_no, "empty repo".into()));
        }
        if record.deps.is_empty() {
            return Err(malformed(line_no, "empty deps".into()));
        }
        let key = SnapshotKey::new(record.repo.clone(), record.year);
        if !seen.insert(key.clone()) {
            return Err(CorpusError::DuplicateSnapshot(key));
        }
        snapshots.push(ProjectSnapshot {
            repo: record.repo,
            year: record.year,
            deps: record.deps.into_iter().collect(),
        });
    }
    Corpus::new(snapshots)
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let file = fs::File::open(path)?;
    read_corpus(io::BufReader::new(file), path)
}

/// Binary snapshot × library incidence matrix with its row and column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceMatrix {
    pub rows: Vec<SnapshotKey>,
    pub cols: Vec<LibraryName>,
    pub incidence: BinaryCsr,
}

impl CooccurrenceMatrix {
    pub fn column_index(&self) -> HashMap<&LibraryName, usize> {
        self.cols.iter().enumerate().map(|(i, l)| (l, i)).collect()
    }
}

pub fn build_matrix(corpus: &Corpus) -> Result<CooccurrenceMatrix, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let cols = corpus.vocabulary();
    let index: HashMap<&LibraryName, usize> =
        cols.iter().enumerate().map(|(i, l)| (l, i)).collect();
    // deps are sorted and so is the vocabulary, so each row's columns come out sorted.
    let rows_cols: Vec<Vec<usize>> = corpus
        .snapshots()
        .iter()
        .map(|s| s.deps.iter().map(|d| index[d]).collect())
        .collect();
    let incidence = BinaryCsr::from_rows(cols.len(), rows_cols);
    Ok(CooccurrenceMatrix {
        rows: corpus.snapshots().iter().map(ProjectSnapshot::key).collect(),
        cols,
        incidence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IdfScope {
    Corpus,
    Year(i32),
}

impl fmt::Display for IdfScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdfScope::Corpus => f.write_str("whole corpus"),
            IdfScope::Year(y) => write!(f, "year {y}"),
        }
    }
}

/// Smoothed inverse document frequency, `ln((1 + n) / (1 + df)) + 1`.
///
/// Always at least 1 for `df <= n`, so it can be raised to negative powers.
pub fn smoothed_idf(n: usize, df: usize) -> f64 {
    ((1.0 + n as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Document frequencies and IDF weights over one scope.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    pub scope: IdfScope,
    pub n: usize,
    pub df: HashMap<LibraryName, usize>,
}

impl IdfTable {
    pub fn df(&self, lib: &str) -> usize {
        self.df.get(lib).copied().unwrap_or(0)
    }

    /// IDF weight; libraries unseen in the scope get the weight of `df = 0`.
    pub fn idf(&self, lib: &str) -> f64 {
        smoothed_idf(self.n, self.df(lib))
    }
}

pub fn document_frequencies<'a>(
    snapshots: impl IntoIterator<Item = &'a ProjectSnapshot>,
) -> HashMap<LibraryName, usize> {
    let mut df: HashMap<LibraryName, usize> = HashMap::new();
    for s in snapshots {
        for d in &s.deps {
            *df.entry(d.clone()).or_default() += 1;
        }
    }
    df
}

pub fn idf_table(corpus: &Corpus, scope: IdfScope) -> Result<IdfTable, CorpusError> {
    let snapshots = corpus.scope(scope);
    if snapshots.is_empty() {
        return Err(CorpusError::EmptyScope(scope));
    }
    Ok(IdfTable {
        scope,
        n: snapshots.len(),
        df: document_frequencies(snapshots),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryCount {
    pub library: LibraryName,
    pub df: usize,
    /// Share of projects in scope, in percent.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionReport {
    pub scope: IdfScope,
    pub n_projects: usize,
    /// Sorted by descending df, then name.
    pub libraries: Vec<LibraryCount>,
    pub frac_df_le_10: f64,
    pub frac_df_eq_1: f64,
}

impl DistributionReport {
    pub fn top(&self, n: usize) -> &[LibraryCount] {
        &self.libraries[..n.min(self.libraries.len())]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["library", "df", "percent"])?;
        for row in &self.libraries {
            writer.write_record([
                row.library.as_str(),
                &row.df.to_string(),
                &format!("{:.4}", row.percent),
            ])?;
        }
        let mut out = writer.into_inner().map_err(|e| e.into_error())?;
        writeln!(out, "# scope: {}", self.scope)?;
        writeln!(out, "# projects: {}", self.n_projects)?;
        writeln!(out, "# libraries: {}", self.libraries.len())?;
        writeln!(out, "# fraction_df_le_10: {:.6}", self.frac_df_le_10)?;
        writeln!(out, "# fraction_df_eq_1: {:.6}", self.frac_df_eq_1)?;
        out.flush()
    }
}

/// Library popularity within a year (or the whole corpus).
pub fn stats(corpus: &Corpus, scope: IdfScope) -> Result<DistributionReport, CorpusError> {
    let table = idf_table(corpus, scope)?;
    let n = table.n;
    let mut libraries: Vec<LibraryCount> = table
        .df
        .into_iter()
        .map(|(library, df)| LibraryCount {
            library,
            df,
            percent: 100.0 * df as f64 / n as f64,
        })
        .collect();
    libraries.sort_by(|a, b| b.df.cmp(&a.df).then_with(|| a.library.cmp(&b.library)));
    let total = libraries.len() as f64;
    let le_10 = libraries.iter().filter(|l| l.df <= 10).count() as f64;
    let eq_1 = libraries.iter().filter(|l| l.df == 1).count() as f64;
    Ok(DistributionReport {
        scope,
        n_projects: n,
        libraries,
        frac_df_le_10: le_10 / total,
        frac_df_eq_1: eq_1 / total,
    })
}
