use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{svd::truncated_svd, EmbedError, MODEL_FORMAT_VERSION};
use crate::corpus::{build_matrix, Corpus, SnapshotKey};
use crate::reqparse::LibraryName;

/// Whether vectors are multiplied by the singular values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    #[default]
    Sigma,
    None,
}

impl fmt::Display for Scaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scaling::Sigma => "sigma",
            Scaling::None => "none",
        })
    }
}

impl FromStr for Scaling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sigma" => Ok(Scaling::Sigma),
            "none" => Ok(Scaling::None),
            other => Err(format!("unknown scaling {other:?} (expected sigma or none)")),
        }
    }
}

/// Components whose singular value is this small relative to the largest
/// carry no signal and are zeroed in fold-ins.
const NULL_SPACE_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    dim: usize,
    scaling: Scaling,
    seed: u64,
    singular_values: Vec<f64>,
    vocab: Vec<LibraryName>,
    index: HashMap<LibraryName, usize>,
    library_vectors: Vec<Vec<f64>>,
    repo_vectors: BTreeMap<SnapshotKey, Vec<f64>>,
}

impl EmbeddingModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Sorted library vocabulary.
    pub fn vocab(&self) -> &[LibraryName] {
        &self.vocab
    }

    pub fn library_index(&self, lib: &str) -> Option<usize> {
        self.index.get(lib).copied()
    }

    pub fn library_vector(&self, lib: &str) -> Option<&[f64]> {
        self.library_index(lib).map(|i| self.library_vector_at(i))
    }

    pub fn library_vector_at(&self, i: usize) -> &[f64] {
        &self.library_vectors[i]
    }

    pub fn library_vectors(&self) -> impl Iterator<Item = (&LibraryName, &[f64])> {
        self.vocab.iter().zip(self.library_vectors.iter().map(Vec::as_slice))
    }

    pub fn repo_vector(&self, key: &SnapshotKey) -> Option<&[f64]> {
        self.repo_vectors.get(key).map(Vec::as_slice)
    }

    pub fn repo_vectors(&self) -> &BTreeMap<SnapshotKey, Vec<f64>> {
        &self.repo_vectors
    }

    /// `Σ_i V_i` over the given library rows, expressed in this model's
    /// scaling: `U·Σ` coordinates for `sigma`, `U` coordinates for `none`.
    /// Both reduce to dividing the summed library vectors by `σ`.
    pub(crate) fn fold_in(&self, libraries: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &i in libraries {
            for (acc, x) in out.iter_mut().zip(&self.library_vectors[i]) {
                *acc += x;
            }
        }
        let cutoff = self.singular_values.first().copied().unwrap_or(0.0) * NULL_SPACE_CUTOFF;
        for (x, &s) in out.iter_mut().zip(&self.singular_values) {
            *x = if s > cutoff { *x / s } else { 0.0 };
        }
        out
    }
}

/// Decomposes the corpus co-occurrence matrix and keeps `dim` components.
///
/// Library vectors are rows of `V` (times `σ` under [`Scaling::Sigma`]).
/// Snapshot vectors are the fold-ins of their own dependency sets, which is
/// `U·Σ` (or `U`) for the training rows.
pub fn build_model(corpus: &Corpus, dim: usize, scaling: Scaling, seed: u64) -> Result<EmbeddingModel, EmbedError> {
    let matrix = build_matrix(corpus)?;
    let factors = truncated_svd(&matrix.incidence, dim, seed)?;
    let library_vectors: Vec<Vec<f64>> = (0..matrix.cols.len())
        .map(|j| {
            (0..dim)
                .map(|c| match scaling {
                    Scaling::Sigma => factors.v[(j, c)] * factors.sigma[c],
                    Scaling::None => factors.v[(j, c)],
                })
                .collect()
        })
        .collect();
    let index = matrix.column_index().into_iter().map(|(l, i)| (l.clone(), i)).collect();
    let mut model = EmbeddingModel {
        dim,
        scaling,
        seed,
        singular_values: factors.sigma.clone(),
        vocab: matrix.cols.clone(),
        index,
        library_vectors,
        repo_vectors: BTreeMap::new(),
    };
    let repo_vectors = matrix
        .rows
        .iter()
        .enumerate()
        .map(|(i, key)| (key.clone(), model.fold_in(matrix.incidence.row(i))))
        .collect();
    model.repo_vectors = repo_vectors;
    Ok(model)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u64,
    dim: usize,
    scaling: Scaling,
    seed: u64,
    singular_values: Vec<f64>,
    vocab: Vec<LibraryName>,
    libraries: BTreeMap<LibraryName, Vec<f64>>,
    repos: BTreeMap<String, Vec<f64>>,
}

pub fn write_model<W: Write>(model: &EmbeddingModel, mut out: W) -> Result<(), EmbedError> {
    let file = ModelFile {
        version: MODEL_FORMAT_VERSION,
        dim: model.dim,
        scaling: model.scaling,
        seed: model.seed,
        singular_values: model.singular_values.clone(),
        vocab: model.vocab.clone(),
        libraries: model
            .vocab
            .iter()
            .cloned()
            .zip(model.library_vectors.iter().cloned())
            .collect(),
        repos: model
            .repo_vectors
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect(),
    };
    serde_json::to_writer(&mut out, &file).map_err(io::Error::from)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn save_model(model: &EmbeddingModel, path: &Path) -> Result<(), EmbedError> {
    write_model(model, BufWriter::new(fs::File::create(path)?))
}

pub fn read_model<R: Read>(input: R) -> Result<EmbeddingModel, EmbedError> {
    let value: serde_json::Value =
        serde_json::from_reader(input).map_err(|e| EmbedError::MalformedModel(e.to_string()))?;
    match value.get("version").and_then(serde_json::Value::as_u64) {
        Some(MODEL_FORMAT_VERSION) => {}
        Some(found) => return Err(EmbedError::VersionMismatch { found }),
        None => return Err(EmbedError::MalformedModel("missing version".into())),
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| EmbedError::MalformedModel(e.to_string()))?;
    let bad = |msg: String| Err(EmbedError::MalformedModel(msg));

    let dim = file.dim;
    if dim == 0 || file.singular_values.len() != dim {
        return bad(format!("expected {dim} singular values, found {}", file.singular_values.len()));
    }
    if !file.vocab.windows(2).all(|w| w[0] < w[1]) {
        return bad("vocabulary is not sorted and unique".into());
    }
    if file.libraries.len() != file.vocab.len() {
        return bad("library vectors do not match the vocabulary".into());
    }
    let mut library_vectors = Vec::with_capacity(file.vocab.len());
    let mut libraries = file.libraries;
    for lib in &file.vocab {
        match libraries.remove(lib) {
            Some(v) if v.len() == dim => library_vectors.push(v),
            Some(_) => return bad(format!("vector of {lib} has the wrong length")),
            None => return bad(format!("no vector for library {lib}")),
        }
    }
    let mut repo_vectors = BTreeMap::new();
    for (key, v) in file.repos {
        let parsed: SnapshotKey = key.parse().map_err(EmbedError::MalformedModel)?;
        if v.len() != dim {
            return bad(format!("vector of {key} has the wrong length"));
        }
        repo_vectors.insert(parsed, v);
    }
    let index = file.vocab.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
    Ok(EmbeddingModel {
        dim,
        scaling: file.scaling,
        seed: file.seed,
        singular_values: file.singular_values,
        vocab: file.vocab,
        index,
        library_vectors,
        repo_vectors,
    })
}

pub fn load_model(path: &Path) -> Result<EmbeddingModel, EmbedError> {
    read_model(io::BufReader::new(fs::File::open(path)?))
}
