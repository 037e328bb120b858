//! Dense embeddings of software libraries learned from which projects depend
//! on them together, and a library recommender built on top.
//!
//! The pipeline, module by module:
//!
//! 1. [`reqparse`] turns requirement files into canonical package-name sets.
//! 2. [`corpus`] holds one dependency set per repository and year, and
//!    builds the binary snapshot × library matrix and IDF tables.
//! 3. [`embed`] factors that matrix with a truncated SVD.
//! 4. [`cluster`] groups library vectors with k-means, picks the cluster
//!    count from a gap curve, and builds a dendrogram of the clusters.
//! 5. [`recommend`] ranks libraries for a project from its nearest
//!    neighbors.
//! 6. [`bench`] replays historical dependency additions to score
//!    recommenders.

pub mod bench;
pub mod cluster;
pub mod corpus;
pub mod embed;
pub mod linalg;
pub mod recommend;
pub mod reqparse;

pub use corpus::{Corpus, IdfScope, IdfTable, ProjectSnapshot, SnapshotKey};
pub use embed::{EmbeddingModel, Scaling};
pub use reqparse::{normalize_name, parse_requirements, LibraryName};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/requirements.md")]
    mod requirements {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/embeddings.md")]
    mod embeddings {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/recommending.md")]
    mod recommending {}
    #[doc = include_str!("../../../book/src/benchmark.md")]
    mod benchmark {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
