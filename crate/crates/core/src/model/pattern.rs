use crate::error::{Error, Result};
use crate::model::Permutation;

/// Structure of a sparse matrix in canonical row-major (CSR) form.
///
/// Column indices are stored as `u32`; rows are sorted ascending and free of
/// duplicates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparsePattern {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
}

impl SparsePattern {
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
        }
    }

    /// Canonicalizes `entries`; duplicates are rejected.
    pub fn from_entries<I>(n_rows: usize, n_cols: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut e: Vec<(usize, usize)> = entries.into_iter().collect();
        check_bounds(&e, n_rows, n_cols)?;
        e.sort_unstable();
        if let Some(w) = e.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEntry {
                row: w[0].0,
                col: w[0].1,
            });
        }
        Ok(Self::from_sorted(n_rows, n_cols, &e))
    }

    /// Canonicalizes `entries`, merging duplicates into a single entry.
    pub fn from_entries_union<I>(n_rows: usize, n_cols: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut e: Vec<(usize, usize)> = entries.into_iter().collect();
        check_bounds(&e, n_rows, n_cols)?;
        e.sort_unstable();
        e.dedup();
        Ok(Self::from_sorted(n_rows, n_cols, &e))
    }

    fn from_sorted(n_rows: usize, n_cols: usize, e: &[(usize, usize)]) -> Self {
        let mut row_ptr = vec![0usize; n_rows + 1];
        for &(r, _) in e {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = e.iter().map(|&(_, c)| c as u32).collect();
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
        }
    }

    /// Assembles a pattern from CSR arrays that are already canonical.
    pub(crate) fn from_csr_parts(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
    ) -> Self {
        debug_assert_eq!(row_ptr.len(), n_rows + 1);
        debug_assert_eq!(*row_ptr.last().unwrap(), col_idx.len());
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_degree(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.n_rows && self.row(i).binary_search(&(j as u32)).is_ok()
    }

    /// Entries in canonical row-major order (the COO view).
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).iter().map(move |&j| (i, j as usize)))
    }

    /// Returns the transposed pattern together with, for each transposed
    /// entry, the position of its source entry in `self`.
    pub(crate) fn transpose_with_map(&self) -> (Self, Vec<usize>) {
        let mut row_ptr = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            row_ptr[c as usize + 1] += 1;
        }
        for i in 0..self.n_cols {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut next = row_ptr.clone();
        let mut col_idx = vec![0u32; self.nnz()];
        let mut src = vec![0usize; self.nnz()];
        // rows visited in ascending order, so each transposed row fills sorted
        for i in 0..self.n_rows {
            for pos in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col_idx[pos] as usize;
                col_idx[next[c]] = i as u32;
                src[next[c]] = pos;
                next[c] += 1;
            }
        }
        (
            Self::from_csr_parts(self.n_cols, self.n_rows, row_ptr, col_idx),
            src,
        )
    }

    pub fn transpose(&self) -> Self {
        self.transpose_with_map().0
    }

    /// Returns the permuted pattern and, for each output entry, the position
    /// of the corresponding input entry.
    pub(crate) fn permute_with_map(
        &self,
        p_rows: &Permutation,
        p_cols: &Permutation,
    ) -> Result<(Self, Vec<usize>)> {
        if p_rows.len() != self.n_rows || p_cols.len() != self.n_cols {
            return Err(Error::SizeMismatch(format!(
                "permutations ({}, {}) do not match {}x{} matrix",
                p_rows.len(),
                p_cols.len(),
                self.n_rows,
                self.n_cols
            )));
        }
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        for i in 0..self.n_rows {
            row_ptr[p_rows.forward()[i] + 1] = self.row_degree(i);
        }
        for i in 0..self.n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut col_idx = vec![0u32; self.nnz()];
        let mut src = vec![0usize; self.nnz()];
        let mut scratch: Vec<(u32, usize)> = Vec::new();
        for new_row in 0..self.n_rows {
            let old_row = p_rows.inverse()[new_row];
            scratch.clear();
            for pos in self.row_ptr[old_row]..self.row_ptr[old_row + 1] {
                let c = p_cols.forward()[self.col_idx[pos] as usize] as u32;
                scratch.push((c, pos));
            }
            scratch.sort_unstable_by_key(|&(c, _)| c);
            let base = row_ptr[new_row];
            for (off, &(c, pos)) in scratch.iter().enumerate() {
                col_idx[base + off] = c;
                src[base + off] = pos;
            }
        }
        Ok((
            Self::from_csr_parts(self.n_rows, self.n_cols, row_ptr, col_idx),
            src,
        ))
    }

    pub fn permute(&self, p_rows: &Permutation, p_cols: &Permutation) -> Result<Self> {
        Ok(self.permute_with_map(p_rows, p_cols)?.0)
    }
}

fn check_bounds(e: &[(usize, usize)], n_rows: usize, n_cols: usize) -> Result<()> {
    if let Some(&(row, col)) = e.iter().find(|&&(r, c)| r >= n_rows || c >= n_cols) {
        return Err(Error::OutOfBounds {
            row,
            col,
            n_rows,
            n_cols,
        });
    }
    if n_cols > u32::MAX as usize {
        return Err(Error::SizeMismatch(format!(
            "{n_cols} columns exceed 32-bit column indices"
        )));
    }
    Ok(())
}
