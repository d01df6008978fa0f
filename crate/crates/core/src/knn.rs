//! Exact k-nearest-neighbor graphs and the interaction patterns built from them.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{squared_distance, PointSet, SparseMatrix, SparsePattern};

/// For each target, its `k` nearest sources by squared Euclidean distance.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnGraph {
    k: usize,
    n_sources: usize,
    neighbor_ids: Vec<u32>,
    neighbor_dists: Vec<f64>,
}

impl KnnGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_targets(&self) -> usize {
        self.neighbor_ids.len() / self.k
    }

    pub fn n_sources(&self) -> usize {
        self.n_sources
    }

    /// Neighbor indices of target `i`, nearest first.
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbor_ids[i * self.k..(i + 1) * self.k]
    }

    /// Squared distances matching [`neighbors`](Self::neighbors).
    pub fn distances(&self, i: usize) -> &[f64] {
        &self.neighbor_dists[i * self.k..(i + 1) * self.k]
    }
}

/// Brute-force kNN. Self-matches are excluded only when `targets` and
/// `sources` are the same object.
pub fn build_knn(targets: &PointSet, sources: &PointSet, k: usize) -> Result<KnnGraph> {
    let self_set = std::ptr::eq(targets, sources);
    knn_impl(targets, sources, k, self_set)
}

/// kNN of a point set against itself, excluding each point's self-match.
pub fn build_knn_self(points: &PointSet, k: usize) -> Result<KnnGraph> {
    knn_impl(points, points, k, true)
}

fn knn_impl(targets: &PointSet, sources: &PointSet, k: usize, self_set: bool) -> Result<KnnGraph> {
    if targets.dim() != sources.dim() {
        return Err(Error::DimMismatch {
            expected: sources.dim(),
            got: targets.dim(),
        });
    }
    let n = sources.n_points();
    let available = if self_set { n.saturating_sub(1) } else { n };
    if k == 0 || k > available {
        return Err(Error::KTooLarge { k, available });
    }
    if n > u32::MAX as usize {
        return Err(Error::SizeMismatch("too many sources for 32-bit ids".into()));
    }
    let m = targets.n_points();
    let mut ids = vec![0u32; m * k];
    let mut dists = vec![0f64; m * k];
    ids.par_chunks_mut(k)
        .zip(dists.par_chunks_mut(k))
        .enumerate()
        .for_each_init(
            || Vec::with_capacity(n),
            |cand: &mut Vec<(f64, u32)>, (i, (id_row, dist_row))| {
                let t = targets.point(i);
                cand.clear();
                for (j, s) in sources.iter().enumerate() {
                    if self_set && j == i {
                        continue;
                    }
                    cand.push((squared_distance(t, s), j as u32));
                }
                // (distance, index) is a total order, so ties go to the smaller index
                let cmp = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if cand.len() > k {
                    cand.select_nth_unstable_by(k - 1, cmp);
                    cand.truncate(k);
                }
                cand.sort_unstable_by(cmp);
                for (slot, &(d, j)) in cand.iter().enumerate() {
                    id_row[slot] = j;
                    dist_row[slot] = d;
                }
            },
        );
    Ok(KnnGraph {
        k,
        n_sources: n,
        neighbor_ids: ids,
        neighbor_dists: dists,
    })
}

/// Pattern with entry `(i, j)` for every neighbor `j` of target `i`.
pub fn pattern_from_knn(g: &KnnGraph) -> SparsePattern {
    let m = g.n_targets();
    let row_ptr = (0..=m).map(|i| i * g.k).collect();
    let mut col_idx = Vec::with_capacity(m * g.k);
    for i in 0..m {
        let start = col_idx.len();
        col_idx.extend_from_slice(g.neighbors(i));
        col_idx[start..].sort_unstable();
    }
    SparsePattern::from_csr_parts(m, g.n_sources, row_ptr, col_idx)
}

/// Structural union of a square pattern with its transpose.
pub fn symmetrize(p: &SparsePattern) -> Result<SparsePattern> {
    if !p.is_square() {
        return Err(Error::NotSquare {
            n_rows: p.n_rows(),
            n_cols: p.n_cols(),
        });
    }
    let t = p.transpose();
    let n = p.n_rows();
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::with_capacity(2 * p.nnz());
    for i in 0..n {
        merge_union(p.row(i), t.row(i), &mut col_idx);
        row_ptr.push(col_idx.len());
    }
    Ok(SparsePattern::from_csr_parts(n, n, row_ptr, col_idx))
}

fn merge_union(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

/// Gaussian kernel `exp(-|t_i - s_j|^2 / (2 h^2))` evaluated on `p`.
pub fn gaussian_values(
    p: &SparsePattern,
    targets: &PointSet,
    sources: &PointSet,
    bandwidth: f64,
) -> Result<SparseMatrix> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::NonPositiveBandwidth(bandwidth));
    }
    if p.n_rows() != targets.n_points() || p.n_cols() != sources.n_points() {
        return Err(Error::SizeMismatch(format!(
            "{}x{} pattern for {} targets and {} sources",
            p.n_rows(),
            p.n_cols(),
            targets.n_points(),
            sources.n_points()
        )));
    }
    if targets.dim() != sources.dim() {
        return Err(Error::DimMismatch {
            expected: sources.dim(),
            got: targets.dim(),
        });
    }
    let scale = 1.0 / (2.0 * bandwidth * bandwidth);
    let values = p
        .entries()
        .map(|(i, j)| (-squared_distance(targets.point(i), sources.point(j)) * scale).exp())
        .collect();
    SparseMatrix::new(p.clone(), values)
}
