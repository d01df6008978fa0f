//! Row/column orderings: scattered, reverse Cuthill-McKee, lexical on
//! embedding coordinates, and hierarchical tree order.

mod lexical;
mod rcm;
mod tree;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Permutation, PointSet, SparsePattern};

pub use lexical::order_lexical;
pub use rcm::order_rcm;
pub use tree::{build_tree, PartitionTree, TreeNode, DEFAULT_LEAF_CAPACITY, DEFAULT_MAX_DEPTH};

pub const DEFAULT_LEX_BINS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Scattered,
    Rcm,
    Lex1,
    Lex2,
    Lex3,
    Tree2,
    Tree3,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::Scattered,
        Scheme::Rcm,
        Scheme::Lex1,
        Scheme::Lex2,
        Scheme::Lex3,
        Scheme::Tree2,
        Scheme::Tree3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Scattered => "scattered",
            Scheme::Rcm => "rcm",
            Scheme::Lex1 => "lex1",
            Scheme::Lex2 => "lex2",
            Scheme::Lex3 => "lex3",
            Scheme::Tree2 => "tree2",
            Scheme::Tree3 => "tree3",
        }
    }

    /// Embedding dimension the scheme reads, if any.
    pub fn embedding_dim(self) -> Option<usize> {
        match self {
            Scheme::Scattered | Scheme::Rcm => None,
            Scheme::Lex1 => Some(1),
            Scheme::Lex2 | Scheme::Tree2 => Some(2),
            Scheme::Lex3 | Scheme::Tree3 => Some(3),
        }
    }

    pub fn is_tree(self) -> bool {
        matches!(self, Scheme::Tree2 | Scheme::Tree3)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scheme `{s}`")))
    }
}

/// Row and column permutations produced by one scheme, with the partition
/// trees when the scheme builds them.
#[derive(Clone, Debug)]
pub struct OrderingResult {
    pub scheme: Scheme,
    pub row_perm: Permutation,
    pub col_perm: Permutation,
    pub row_tree: Option<PartitionTree>,
    pub col_tree: Option<PartitionTree>,
}

impl OrderingResult {
    /// Same permutation for rows and columns, no trees.
    pub fn symmetric(scheme: Scheme, perm: Permutation) -> Self {
        Self {
            scheme,
            row_perm: perm.clone(),
            col_perm: perm,
            row_tree: None,
            col_tree: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingParams {
    pub seed: u64,
    pub lex_bins: usize,
    pub leaf_capacity: usize,
    pub max_depth: usize,
}

impl Default for OrderingParams {
    fn default() -> Self {
        Self {
            seed: 0,
            lex_bins: DEFAULT_LEX_BINS,
            leaf_capacity: DEFAULT_LEAF_CAPACITY,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

/// Uniformly random permutation from a seeded generator.
pub fn order_scattered(n: usize, seed: u64) -> Permutation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    Permutation::from_order(order).expect("shuffle yields a permutation")
}

/// Tree ordering over one point set, used for both rows and columns.
///
/// For distinct target and source sets, call [`build_tree`] on each and
/// combine the two trees (dual tree).
pub fn order_tree(points: &PointSet, leaf_capacity: usize, max_depth: usize) -> Result<OrderingResult> {
    let tree = build_tree(points, leaf_capacity, max_depth)?;
    let scheme = if points.dim() == 2 {
        Scheme::Tree2
    } else {
        Scheme::Tree3
    };
    Ok(OrderingResult {
        scheme,
        row_perm: tree.leaf_order().clone(),
        col_perm: tree.leaf_order().clone(),
        row_tree: Some(tree.clone()),
        col_tree: Some(tree),
    })
}

/// Dual-tree ordering for distinct target (row) and source (column) sets.
pub fn order_dual_tree(
    targets: &PointSet,
    sources: &PointSet,
    leaf_capacity: usize,
    max_depth: usize,
) -> Result<OrderingResult> {
    let row_tree = build_tree(targets, leaf_capacity, max_depth)?;
    let col_tree = build_tree(sources, leaf_capacity, max_depth)?;
    let scheme = if targets.dim() == 2 {
        Scheme::Tree2
    } else {
        Scheme::Tree3
    };
    Ok(OrderingResult {
        scheme,
        row_perm: row_tree.leaf_order().clone(),
        col_perm: col_tree.leaf_order().clone(),
        row_tree: Some(row_tree),
        col_tree: Some(col_tree),
    })
}

/// Computes a symmetric ordering of a self-interaction matrix.
///
/// `embedded` must carry at least as many coordinates as the scheme reads;
/// the leading ones are used. `pattern` is only consulted by rCM.
pub fn compute_ordering(
    scheme: Scheme,
    pattern: &SparsePattern,
    embedded: &PointSet,
    params: &OrderingParams,
) -> Result<OrderingResult> {
    let n = pattern.n_rows();
    if embedded.n_points() != n && scheme.embedding_dim().is_some() {
        return Err(Error::SizeMismatch(format!(
            "{} embedded points for a {n}-row pattern",
            embedded.n_points()
        )));
    }
    let lead = |d: usize| embedded.leading_dims(d.min(embedded.dim()));
    Ok(match scheme {
        Scheme::Scattered => OrderingResult::symmetric(scheme, order_scattered(n, params.seed)),
        Scheme::Rcm => OrderingResult::symmetric(scheme, order_rcm(pattern)?),
        Scheme::Lex1 | Scheme::Lex2 | Scheme::Lex3 => {
            let d = scheme.embedding_dim().unwrap();
            OrderingResult::symmetric(scheme, order_lexical(&lead(d)?, params.lex_bins)?)
        }
        Scheme::Tree2 | Scheme::Tree3 => {
            let d = scheme.embedding_dim().unwrap();
            let mut r = order_tree(&lead(d)?, params.leaf_capacity, params.max_depth)?;
            r.scheme = scheme;
            r
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scattered_basics() {
        assert!(order_scattered(1, 7).is_identity());
        assert_eq!(order_scattered(50, 3), order_scattered(50, 3));
        assert_ne!(order_scattered(50, 3), order_scattered(50, 4));
    }

    #[test]
    fn scheme_names_roundtrip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("tree4".parse::<Scheme>().is_err());
    }

    #[test]
    fn single_cluster_tree_is_original_order() {
        let p = PointSet::new(5, 3, (0..15).map(|x| (x * 7 % 5) as f64).collect()).unwrap();
        let r = order_tree(&p, 128, 12).unwrap();
        assert!(r.row_perm.is_identity());
    }
}
