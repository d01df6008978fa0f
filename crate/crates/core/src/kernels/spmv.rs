use rayon::prelude::*;
use rayon::ThreadPool;

use super::{ChargeVector, PotentialVector};
use crate::error::{Error, Result};
use crate::hier::HierBlockMatrix;
use crate::model::SparseMatrix;

/// Rayon pool with exactly `workers` threads.
pub fn worker_pool(workers: usize) -> Result<ThreadPool> {
    if workers == 0 {
        return Err(Error::InvalidParameter("worker count must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))
}

/// `y = A x` over the flat row-major storage. Each row is summed in the
/// fixed interleaved order shared by all kernels.
pub fn spmv_flat(m: &SparseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    let mut y = vec![0.0; m.n_rows()];
    spmv_flat_into(m, x, &mut y)?;
    Ok(y)
}

pub fn spmv_flat_into(m: &SparseMatrix, x: &[f64], y: &mut [f64]) -> Result<()> {
    check_flat(m, x, y)?;
    let (ptr, cols, vals) = (m.pattern().row_ptr(), m.pattern().col_idx(), m.values());
    for (i, yi) in y.iter_mut().enumerate() {
        *yi = row_dot(&cols[ptr[i]..ptr[i + 1]], &vals[ptr[i]..ptr[i + 1]], x);
    }
    Ok(())
}

/// Row-parallel flat multiply on the current rayon pool; bit-identical to
/// [`spmv_flat_into`].
pub fn spmv_flat_parallel_into(m: &SparseMatrix, x: &[f64], y: &mut [f64]) -> Result<()> {
    check_flat(m, x, y)?;
    let (ptr, cols, vals) = (m.pattern().row_ptr(), m.pattern().col_idx(), m.values());
    y.par_chunks_mut(256).enumerate().for_each(|(chunk, ys)| {
        let base = chunk * 256;
        for (o, yi) in ys.iter_mut().enumerate() {
            let i = base + o;
            *yi = row_dot(&cols[ptr[i]..ptr[i + 1]], &vals[ptr[i]..ptr[i + 1]], x);
        }
    });
    Ok(())
}

#[inline]
fn row_dot(cols: &[u32], vals: &[f64], x: &[f64]) -> f64 {
    // SAFETY: pattern columns are below n_cols, and check_flat has
    // matched x.len() to n_cols.
    unsafe { crate::hier::dot_gather(cols, vals, x) }
}

fn check_flat(m: &SparseMatrix, x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != m.n_cols() {
        return Err(Error::DimMismatch {
            expected: m.n_cols(),
            got: x.len(),
        });
    }
    if y.len() != m.n_rows() {
        return Err(Error::DimMismatch {
            expected: m.n_rows(),
            got: y.len(),
        });
    }
    Ok(())
}

fn check_hier(h: &HierBlockMatrix, x: &ChargeVector) -> Result<()> {
    if x.layout != h.col_layout() {
        return Err(Error::OrderingMismatch);
    }
    if x.len() != h.n_cols() {
        return Err(Error::DimMismatch {
            expected: h.n_cols(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Sequential multiply by recursive descent over the block hierarchy.
pub fn spmv_hier(h: &HierBlockMatrix, x: &ChargeVector) -> Result<PotentialVector> {
    check_hier(h, x)?;
    let mut y = vec![0.0; h.n_rows()];
    h.multiply_into(&x.values, &mut y);
    Ok(PotentialVector {
        values: y,
        layout: h.row_layout(),
    })
}

/// Parallel multiply on a fresh pool of `workers` threads.
pub fn spmv_hier_parallel(h: &HierBlockMatrix, x: &ChargeVector, workers: usize) -> Result<PotentialVector> {
    let pool = worker_pool(workers)?;
    spmv_hier_in(&pool, h, x)
}

/// Parallel multiply on an existing pool. Bit-identical to [`spmv_hier`]
/// for any pool size.
pub fn spmv_hier_in(pool: &ThreadPool, h: &HierBlockMatrix, x: &ChargeVector) -> Result<PotentialVector> {
    check_hier(h, x)?;
    let mut y = vec![0.0; h.n_rows()];
    pool.install(|| h.multiply_into_par(&x.values, &mut y));
    Ok(PotentialVector {
        values: y,
        layout: h.row_layout(),
    })
}

impl HierBlockMatrix {
    /// `y = A x` with `x` in column-tree order and `y` in row-tree order.
    /// Lengths must match; use [`spmv_hier`] for checked, tagged access.
    pub fn multiply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols());
        assert_eq!(y.len(), self.n_rows());
        y.fill(0.0);
        self.descend(|leaf| self.leaf_multiply_add(leaf, x, y, 0));
    }

    /// Row units run as independent tasks on the current rayon pool. Each
    /// unit owns a disjoint output range and visits its leaf blocks in
    /// traversal order, so every row sees the same additions as in
    /// [`multiply_into`](Self::multiply_into).
    pub fn multiply_into_par(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols());
        assert_eq!(y.len(), self.n_rows());
        let mut parts = Vec::with_capacity(self.units().len());
        let mut rest = y;
        let mut at = 0;
        for u in self.units() {
            let (head, tail) = rest.split_at_mut(u.end - at);
            parts.push(&mut head[u.start - at..]);
            rest = tail;
            at = u.end;
        }
        self.units().par_iter().zip(parts).for_each(|(u, ys)| {
            ys.fill(0.0);
            for &leaf in &u.blocks {
                self.leaf_multiply_add(leaf, x, ys, u.start);
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hier::{build_hier, CutLevel};
    use crate::ordering::PartitionTree;

    #[test]
    fn two_by_two() {
        let m = SparseMatrix::from_coo(&[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)], 2, 2).unwrap();
        assert_eq!(spmv_flat(&m, &[1.0, 1.0]).unwrap(), vec![3.0, 3.0]);
        assert!(matches!(spmv_flat(&m, &[1.0]), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn flat_case_bitwise() {
        let m = SparseMatrix::from_coo(&[(0, 0, 0.1), (0, 2, 0.7), (2, 1, -0.3), (2, 2, 1e-3)], 3, 3).unwrap();
        let x = vec![0.3, 1.0 / 3.0, 2.0f64.sqrt()];
        let t = PartitionTree::trivial(3);
        let h = build_hier(&m, &t, &t, CutLevel::Fixed(1)).unwrap();
        let flat = spmv_flat(&m, &x).unwrap();
        let y = spmv_hier(&h, &ChargeVector::for_columns(&h, x.clone())).unwrap();
        assert_eq!(y.values, flat);
        let yp = spmv_hier_parallel(&h, &ChargeVector::for_columns(&h, x), 3).unwrap();
        assert_eq!(yp.values, flat);
    }

    #[test]
    fn layout_mismatch_rejected() {
        let m = SparseMatrix::from_coo(&[(0, 0, 1.0)], 2, 2).unwrap();
        let t = PartitionTree::trivial(2);
        let h = build_hier(&m, &t, &t, CutLevel::Auto).unwrap();
        let x = ChargeVector::new(vec![1.0, 1.0], h.col_layout() ^ 1);
        assert!(matches!(spmv_hier(&h, &x), Err(Error::OrderingMismatch)));
    }
}
