use crate::error::{Error, Result};
use crate::model::Permutation;

/// `n_points` points of dimension `dim`, stored point-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    n_points: usize,
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(n_points: usize, dim: usize, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != n_points * dim {
            return Err(Error::SizeMismatch(format!(
                "{} coordinates for {n_points} points of dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        Ok(Self {
            n_points,
            dim,
            coords,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimMismatch {
                expected: dim,
                got: r.len(),
            });
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn zeros(n_points: usize, dim: usize) -> Self {
        Self {
            n_points,
            dim,
            coords: vec![0.0; n_points * dim],
        }
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        self.coords.chunks_exact(self.dim.max(1)).take(self.n_points)
    }

    /// Column `axis` as a vector.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        self.iter().map(|p| p[axis]).collect()
    }

    /// The first `d` coordinates of every point.
    pub fn leading_dims(&self, d: usize) -> Result<Self> {
        if d > self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: d,
            });
        }
        let coords = self.iter().flat_map(|p| p[..d].iter().copied()).collect();
        Ok(Self {
            n_points: self.n_points,
            dim: d,
            coords,
        })
    }

    /// Point `i` moves to position `perm.forward()[i]`.
    pub fn permuted(&self, perm: &Permutation) -> Self {
        assert_eq!(perm.len(), self.n_points, "permutation length mismatch");
        let mut coords = Vec::with_capacity(self.coords.len());
        for &orig in perm.inverse() {
            coords.extend_from_slice(self.point(orig));
        }
        Self {
            n_points: self.n_points,
            dim: self.dim,
            coords,
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        Self {
            n_points: indices.len(),
            dim: self.dim,
            coords,
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.iter() {
            for (a, &x) in m.iter_mut().zip(p) {
                *a += x;
            }
        }
        let n = self.n_points.max(1) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}

/// Squared Euclidean distance, accumulated in four interleaved lanes.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += (x - y) * (x - y);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checked() {
        assert!(PointSet::new(2, 3, vec![0.0; 5]).is_err());
        assert!(PointSet::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn permuted_moves_points() {
        let p = PointSet::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let perm = Permutation::from_forward(vec![2, 0, 1]).unwrap();
        assert_eq!(p.permuted(&perm).coords(), &[1.0, 2.0, 0.0]);
    }
}
