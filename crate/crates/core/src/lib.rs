//! Straggler-resilient approximate k-nearest-neighbor search.
//!
//! The [`mrpt`] index prunes the search space with random projection tree
//! voting; the [`cluster`] simulator then answers queries on one node, with
//! data parallelism, or with model parallelism where the candidate dot
//! products `X(S)ᵀq` are computed across workers either uncoded or through
//! the [`matdot`] codes, so that the master only waits for the fastest
//! `2m − 1` workers.
//!
//! Numeric types are generic over [`Real`] (`f32` or `f64`); the `*64` /
//! `*32` aliases below name the concrete instantiations.

pub mod cluster;
pub mod error;
pub mod linalg;
pub mod matdot;
pub mod mrpt;
pub mod rng;
pub mod rptree;
pub mod scalar;

pub use error::{Error, Result};
pub use linalg::{
    euclidean_dist_via_dot, row_subset_matvec, split_columns, top_k_by_distance, ColumnSplit, Dataset,
    DenseMatrix,
};
pub use mrpt::{exact_knn, recall, CandidateSet, IndexParams, MrptIndex, Neighbors, Preset};
pub use rng::RngSeed;
pub use rptree::{RpTree, SparseProjection};
pub use scalar::Real;

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type DenseMatrix64 = DenseMatrix<f64>;
pub type DenseMatrix32 = DenseMatrix<f32>;
pub type MrptIndex64 = MrptIndex<f64>;
pub type MrptIndex32 = MrptIndex<f32>;
pub type Neighbors64 = Neighbors<f64>;
pub type Neighbors32 = Neighbors<f32>;
pub type CodeConfig64 = matdot::CodeConfig<f64>;
pub type CodeConfig32 = matdot::CodeConfig<f32>;
pub type Cluster64 = cluster::Cluster<f64>;
pub type Cluster32 = cluster::Cluster<f32>;
