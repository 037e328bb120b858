//! Clustering of the library space.
//!
//! Library vectors are L2-normalized and grouped with k-means. The number of
//! clusters is read off a gap curve: for each k, the fitted intra-cluster
//! distance is compared with random relabelings of the same points that keep
//! the cluster sizes. The cluster centroids are then merged bottom-up into a
//! dendrogram under cosine distance and average linkage.

mod dendrogram;
mod gap;
mod kmeans;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use thiserror::Error;

use crate::embed::{norm, EmbeddingModel};
use crate::reqparse::LibraryName;

pub use dendrogram::{agglomerate, Dendrogram, Merge};
pub use gap::{gap_curve, select_k, GapCurve, GapEntry, KSelection};
pub use kmeans::{kmeans, kmeans_trace, within_distance, ClusterPartition, KMeansConfig};

pub const DEFAULT_EPSILON: f64 = 0.02;
pub const DEFAULT_WINDOW: usize = 3;
pub const DEFAULT_REFS: usize = 10;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("cannot form {k} clusters from {n} points")]
    TooFewPoints { k: usize, n: usize },
    #[error("the number of reference clusterings must be at least 1")]
    InvalidRefs,
    #[error("invalid cluster range {lo}..={hi}")]
    InvalidRange { lo: usize, hi: usize },
    #[error("a dendrogram needs at least 2 items, got {0}")]
    TooFewItems(usize),
    #[error("item {0} is a zero vector")]
    ZeroVector(usize),
    #[error("malformed partition: {0}")]
    MalformedPartition(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Unit-length copies of the model's library vectors, in vocabulary order.
/// Zero vectors stay zero.
pub fn normalized_vectors(model: &EmbeddingModel) -> Vec<Vec<f64>> {
    model
        .library_vectors()
        .map(|(_, v)| {
            let n = norm(v);
            if n > 0.0 {
                v.iter().map(|x| x / n).collect()
            } else {
                v.to_vec()
            }
        })
        .collect()
}

/// A k-means partition of a model's vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct LibraryPartition {
    pub libraries: Vec<LibraryName>,
    pub partition: ClusterPartition,
}

impl LibraryPartition {
    pub fn assignments(&self) -> BTreeMap<&LibraryName, usize> {
        self.libraries.iter().zip(&self.partition.assignments).map(|(l, &c)| (l, c)).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ClusterError> {
        write_partition(self.assignments(), out)
    }
}

pub fn cluster_libraries(
    model: &EmbeddingModel,
    k: usize,
    seed: u64,
    config: &KMeansConfig,
) -> Result<LibraryPartition, ClusterError> {
    let points = normalized_vectors(model);
    Ok(LibraryPartition {
        libraries: model.vocab().to_vec(),
        partition: kmeans(&points, k, seed, config)?,
    })
}

pub fn write_partition<'a, W: Write>(
    assignments: impl IntoIterator<Item = (&'a LibraryName, usize)>,
    out: W,
) -> Result<(), ClusterError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["library", "cluster_id"])?;
    for (lib, c) in assignments {
        w.write_record([lib.as_str(), &c.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads a `library,cluster_id` CSV. Cluster ids must cover `0..k`.
pub fn read_partition<R: Read>(input: R) -> Result<BTreeMap<LibraryName, usize>, ClusterError> {
    #[derive(serde::Deserialize)]
    struct Row {
        library: String,
        cluster_id: usize,
    }
    let mut map = BTreeMap::new();
    for row in csv::Reader::from_reader(input).deserialize() {
        let row: Row = row?;
        let lib: LibraryName = row
            .library
            .parse()
            .map_err(|e| ClusterError::MalformedPartition(format!("{}: {e}", row.library)))?;
        if map.insert(lib, row.cluster_id).is_some() {
            return Err(ClusterError::MalformedPartition(format!("{} listed twice", row.library)));
        }
    }
    let k = map.values().max().map_or(0, |m| m + 1);
    let mut seen = vec![false; k];
    map.values().for_each(|&c| seen[c] = true);
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(ClusterError::MalformedPartition(format!("cluster {missing} has no members")));
    }
    Ok(map)
}

/// Means of the normalized library vectors per cluster, indexed by cluster id.
/// Libraries the model does not know are an error.
pub fn partition_centroids(
    model: &EmbeddingModel,
    assignments: &BTreeMap<LibraryName, usize>,
) -> Result<Vec<Vec<f64>>, ClusterError> {
    let points = normalized_vectors(model);
    let k = assignments.values().max().map_or(0, |m| m + 1);
    let mut selected = Vec::with_capacity(assignments.len());
    let mut labels = Vec::with_capacity(assignments.len());
    for (lib, &c) in assignments {
        let i = model
            .library_index(lib.as_str())
            .ok_or_else(|| ClusterError::MalformedPartition(format!("{lib} is not in the model")))?;
        selected.push(points[i].clone());
        labels.push(c);
    }
    Ok(kmeans::group_means(&selected, &labels, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_csv_round_trip() {
        let a: LibraryName = "numpy".parse().unwrap();
        let b: LibraryName = "flask".parse().unwrap();
        let mut buf = Vec::new();
        write_partition([(&b, 1), (&a, 0)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "library,cluster_id\nflask,1\nnumpy,0\n");
        let back = read_partition(buf.as_slice()).unwrap();
        assert_eq!(back[&a], 0);
        assert_eq!(back[&b], 1);
    }

    #[test]
    fn partition_with_gap_in_ids() {
        let err = read_partition("library,cluster_id\nnumpy,0\nflask,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, ClusterError::MalformedPartition(_)));
    }
}
