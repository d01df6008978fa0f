use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hier::HierBlockMatrix;
use crate::model::{squared_distance, PointSet};

/// Sparse affinities `p_ij` held alongside the working matrix whose values
/// are overwritten each step with `a_ij = p_ij / (1 + |y_i - y_j|^2)`.
#[derive(Clone, Debug)]
pub struct TsneAttraction {
    matrix: HierBlockMatrix,
    affinities: Vec<f64>,
}

impl TsneAttraction {
    /// `h` holds the affinities as values. Rows and columns must share
    /// one layout, since `Y` is indexed by both.
    pub fn new(h: HierBlockMatrix) -> Result<Self> {
        if h.n_rows() != h.n_cols() {
            return Err(Error::NotSquare {
                n_rows: h.n_rows(),
                n_cols: h.n_cols(),
            });
        }
        if h.row_layout() != h.col_layout() {
            return Err(Error::OrderingMismatch);
        }
        let affinities = h.values().to_vec();
        Ok(Self { matrix: h, affinities })
    }

    /// The matrix with the values of the last step (affinities before any step).
    pub fn matrix(&self) -> &HierBlockMatrix {
        &self.matrix
    }

    pub fn affinities(&self) -> &[f64] {
        &self.affinities
    }

    /// Attractive forces `F_i = sum_j a_ij (y_i - y_j)`, computed as
    /// `r * Y - A Y` with `r = A 1`.
    pub fn step(&mut self, y: &PointSet) -> Result<PointSet> {
        let n = self.matrix.n_rows();
        if y.n_points() != n {
            return Err(Error::DimMismatch {
                expected: n,
                got: y.n_points(),
            });
        }
        self.matrix
            .update_values_from(&self.affinities, |i, j, p| p / (1.0 + squared_distance(y.point(i), y.point(j))))?;

        let d = y.dim();
        let mut row_sums = vec![0.0; n];
        self.matrix.multiply_into_par(&vec![1.0; n], &mut row_sums);
        let mut forces = PointSet::zeros(n, d);
        let mut column = vec![0.0; n];
        let mut product = vec![0.0; n];
        for c in 0..d {
            for (i, v) in column.iter_mut().enumerate() {
                *v = y.point(i)[c];
            }
            self.matrix.multiply_into_par(&column, &mut product);
            forces
                .coords_mut()
                .par_chunks_mut(d)
                .enumerate()
                .for_each(|(i, f)| f[c] = row_sums[i] * column[i] - product[i]);
        }
        Ok(forces)
    }
}

/// One attractive-force evaluation; see [`TsneAttraction::step`].
pub fn tsne_attractive_step(state: &mut TsneAttraction, y: &PointSet) -> Result<PointSet> {
    state.step(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hier::{build_hier, CutLevel};
    use crate::ordering::PartitionTree;
    use crate::SparseMatrix;

    fn pair_state() -> TsneAttraction {
        let m = SparseMatrix::from_coo(&[(0, 1, 0.5), (1, 0, 0.5)], 2, 2).unwrap();
        let t = PartitionTree::trivial(2);
        TsneAttraction::new(build_hier(&m, &t, &t, CutLevel::Auto).unwrap()).unwrap()
    }

    #[test]
    fn two_points() {
        let mut s = pair_state();
        let y = PointSet::new(2, 2, vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let f = s.step(&y).unwrap();
        assert_eq!(f.coords(), &[-0.25, 0.0, 0.25, 0.0]);
        assert_eq!(s.matrix().values(), &[0.25, 0.25]);
        // affinities survive the overwrite
        let f2 = s.step(&y).unwrap();
        assert_eq!(f2, f);
    }

    #[test]
    fn coincident_points() {
        let mut s = pair_state();
        let y = PointSet::new(2, 3, vec![1.5; 6]).unwrap();
        let f = s.step(&y).unwrap();
        assert!(f.coords().iter().all(|&v| v == 0.0));
        assert_eq!(s.matrix().values(), &[0.5, 0.5]);
    }

    #[test]
    fn wrong_length() {
        let mut s = pair_state();
        let y = PointSet::zeros(3, 2);
        assert!(matches!(s.step(&y), Err(Error::DimMismatch { .. })));
    }
}
