//! Locality-aware reordering of sparse near-neighbor interaction matrices.
//!
//! The crate builds kNN interaction matrices over high-dimensional point
//! sets, reorders them so that nonzeros gather into few dense blocks, stores
//! the result in a multi-level blocked format aligned to spatial partition
//! trees, and runs iterative interaction kernels (SpMV, the t-SNE attractive
//! force, mean shift) on it. Locality is quantified with a Gaussian
//! patch-density score and, for tiny instances, an exact covering measure.

pub mod bench;
pub mod error;
pub mod hier;
pub mod io;
pub mod kernels;
pub mod knn;
pub mod measure;
pub mod model;
pub mod ordering;
pub mod pca;
pub mod synth;

pub use error::{Error, Result};
pub use model::{PointSet, Permutation, SparseMatrix, SparsePattern};
