//! Shared data types: sparse patterns and matrices, permutations, point sets.

mod matrix;
pub mod mmio;
mod pattern;
mod permutation;
mod points;

pub use matrix::SparseMatrix;
pub use pattern::SparsePattern;
pub use permutation::Permutation;
pub use points::{squared_distance, PointSet};
