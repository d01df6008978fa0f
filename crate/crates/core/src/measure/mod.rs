//! Sparsity-profile quality measures.

mod beta;
mod gamma;

pub use beta::{
    beta_bruteforce, best_ordering_bruteforce, Patch, PatchCovering, MAX_BETA_CELLS,
    MAX_ORDERING_SIDE,
};
pub use gamma::{gamma_exact, gamma_grid, GammaParams, DEFAULT_CUTOFF_RHO};

use crate::model::SparsePattern;

/// Largest `|i - j|` over all entries; 0 for an empty pattern.
pub fn bandwidth(p: &SparsePattern) -> usize {
    p.entries().map(|(i, j)| i.abs_diff(j)).max().unwrap_or(0)
}

/// Default score scale for kNN matrices: half the neighbor count.
pub fn default_sigma(k: usize) -> f64 {
    k as f64 / 2.0
}
