//! Library and repository embeddings from the co-occurrence matrix.
//!
//! A truncated SVD `M ≈ U·Σ·Vᵀ` of the snapshot × library matrix gives
//! every library a row of `V` and every training snapshot a row of `U`.
//! With [`Scaling::Sigma`] both are multiplied by the singular values.
//!
//! New repositories are placed in the same space in two ways:
//!
//! * [`rle_vector`]: the mean of the repository's library vectors;
//! * [`dre_vector`]: the fold-in `x·V` of the repository's 0/1 indicator
//!   row, which reproduces the stored vector of any training snapshot.

mod model;
mod svd;

use std::collections::BTreeSet;
use std::io;

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::reqparse::LibraryName;

pub use model::{build_model, load_model, read_model, save_model, write_model, EmbeddingModel, Scaling};
pub use svd::{truncated_svd, truncated_svd_with, SvdConfig, SvdFactors};

pub const DEFAULT_DIM: usize = 32;
pub const MODEL_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot decompose an empty matrix")]
    EmptyMatrix,
    #[error("rank {d} is outside 1..={max}")]
    RankTooLarge { d: usize, max: usize },
    #[error("none of the libraries are known to the model: {}", join(.0))]
    UnknownLibraries(Vec<LibraryName>),
    #[error("empty dependency set")]
    EmptyDeps,
    #[error("cosine distance is undefined for a zero vector")]
    ZeroVector,
    #[error("model format version {found} is not supported (expected {MODEL_FORMAT_VERSION})")]
    VersionMismatch { found: u64 },
    #[error("malformed model: {0}")]
    MalformedModel(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn join(names: &[LibraryName]) -> String {
    names.iter().map(LibraryName::as_str).collect::<Vec<_>>().join(", ")
}

/// A repository vector plus the query libraries the model has never seen.
#[derive(Debug, Clone, PartialEq)]
pub struct Vectorized {
    pub vector: Vec<f64>,
    pub ignored: Vec<LibraryName>,
}

fn split_known(
    deps: &BTreeSet<LibraryName>,
    model: &EmbeddingModel,
) -> Result<(Vec<usize>, Vec<LibraryName>), EmbedError> {
    if deps.is_empty() {
        return Err(EmbedError::EmptyDeps);
    }
    let mut known = Vec::with_capacity(deps.len());
    let mut ignored = Vec::new();
    for d in deps {
        match model.library_index(d.as_str()) {
            Some(i) => known.push(i),
            None => ignored.push(d.clone()),
        }
    }
    if known.is_empty() {
        return Err(EmbedError::UnknownLibraries(ignored));
    }
    Ok((known, ignored))
}

/// Mean of the library vectors of `deps`; unknown libraries are skipped.
pub fn rle_vector(deps: &BTreeSet<LibraryName>, model: &EmbeddingModel) -> Result<Vectorized, EmbedError> {
    let (known, ignored) = split_known(deps, model)?;
    let mut vector = vec![0.0; model.dim()];
    for &i in &known {
        for (acc, x) in vector.iter_mut().zip(model.library_vector_at(i)) {
            *acc += x;
        }
    }
    let n = known.len() as f64;
    vector.iter_mut().for_each(|x| *x /= n);
    Ok(Vectorized { vector, ignored })
}

/// Fold-in of the 0/1 indicator of `deps` through the right singular vectors.
///
/// Equals `U_i·Σ` (scaling `sigma`) or `U_i` (scaling `none`) for a
/// training snapshot `i`.
pub fn dre_vector(deps: &BTreeSet<LibraryName>, model: &EmbeddingModel) -> Result<Vectorized, EmbedError> {
    let (known, ignored) = split_known(deps, model)?;
    Ok(Vectorized {
        vector: model.fold_in(&known),
        ignored,
    })
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `1 − cos(x, y)`, clamped to `[0, 2]` against rounding.
pub fn cosine_distance(x: &[f64], y: &[f64]) -> Result<f64, EmbedError> {
    let (xx, yy) = (dot(x, x), dot(y, y));
    if xx == 0.0 || yy == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    // sqrt(fl(s·s)) == s, so identical vectors give exactly 0.
    Ok((1.0 - dot(x, y) / (xx * yy).sqrt()).clamp(0.0, 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 1.0);
        assert_eq!(cosine_distance(&[1.0, -2.0], &[-1.0, 2.0]).unwrap(), 2.0);
        assert!(matches!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]), Err(EmbedError::ZeroVector)));
    }
}
