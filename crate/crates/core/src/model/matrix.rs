use crate::error::{Error, Result};
use crate::model::{Permutation, SparsePattern};

/// A valued sparse matrix: a canonical pattern plus one finite value per entry.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pattern: SparsePattern,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(pattern: SparsePattern, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(Error::SizeMismatch(format!(
                "{} values for {} pattern entries",
                values.len(),
                pattern.nnz()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = pattern.entries().nth(pos).unwrap();
            return Err(Error::NonFiniteValue { row, col });
        }
        Ok(Self { pattern, values })
    }

    /// Builds a canonical matrix from coordinate triplets.
    pub fn from_coo(entries: &[(usize, usize, f64)], n_rows: usize, n_cols: usize) -> Result<Self> {
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_unstable_by_key(|&t| (entries[t].0, entries[t].1));
        let pattern =
            SparsePattern::from_entries(n_rows, n_cols, entries.iter().map(|&(r, c, _)| (r, c)))?;
        let values = order.iter().map(|&t| entries[t].2).collect();
        Self::new(pattern, values)
    }

    /// Every entry of `pattern` set to `value`.
    pub fn filled(pattern: SparsePattern, value: f64) -> Result<Self> {
        let n = pattern.nnz();
        Self::new(pattern, vec![value; n])
    }

    pub fn pattern(&self) -> &SparsePattern {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.pattern.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.pattern.n_cols()
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = &self.pattern.row_ptr()[i..i + 2];
        (self.pattern.row(i), &self.values[r[0]..r[1]])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.pattern
            .entries()
            .zip(self.values.iter())
            .map(|((r, c), &v)| (r, c, v))
    }

    pub fn into_parts(self) -> (SparsePattern, Vec<f64>) {
        (self.pattern, self.values)
    }

    /// Entry `(i, j, v)` moves to `(p_rows[i], p_cols[j], v)`.
    pub fn permute(&self, p_rows: &Permutation, p_cols: &Permutation) -> Result<Self> {
        let (pattern, src) = self.pattern.permute_with_map(p_rows, p_cols)?;
        let values = src.iter().map(|&s| self.values[s]).collect();
        Ok(Self { pattern, values })
    }

    pub fn transpose(&self) -> Self {
        let (pattern, src) = self.pattern.transpose_with_map();
        let values = src.iter().map(|&s| self.values[s]).collect();
        Self { pattern, values }
    }

    /// Dense row-major copy; intended for small test instances.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_rows() * self.n_cols()];
        for (r, c, v) in self.triplets() {
            d[r * self.n_cols() + c] = v;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coo_singleton() {
        let m = SparseMatrix::from_coo(&[(0, 0, 1.0)], 1, 1).unwrap();
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn coo_values_follow_sort() {
        let m = SparseMatrix::from_coo(&[(1, 0, 2.0), (0, 1, 3.0)], 2, 2).unwrap();
        assert_eq!(
            m.triplets().collect::<Vec<_>>(),
            vec![(0, 1, 3.0), (1, 0, 2.0)]
        );
    }

    #[test]
    fn coo_duplicate() {
        let r = SparseMatrix::from_coo(&[(0, 0, 1.0), (0, 0, 2.0)], 1, 1);
        assert!(matches!(r, Err(Error::DuplicateEntry { .. })));
    }

    #[test]
    fn rejects_non_finite() {
        let r = SparseMatrix::from_coo(&[(0, 0, f64::NAN)], 1, 1);
        assert!(matches!(r, Err(Error::NonFiniteValue { row: 0, col: 0 })));
    }

    #[test]
    fn identity_permutation_is_noop() {
        let m = SparseMatrix::from_coo(&[(0, 1, 1.5), (2, 0, -1.0), (1, 1, 4.0)], 3, 2).unwrap();
        let p = m
            .permute(&Permutation::identity(3), &Permutation::identity(2))
            .unwrap();
        assert_eq!(p, m);
    }

    #[test]
    fn diagonal_transpose_is_itself() {
        let m = SparseMatrix::from_coo(&[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)], 3, 3).unwrap();
        assert_eq!(m.transpose(), m);
    }
}
