//! Deterministic synthetic patterns and point clouds.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PointSet, SparsePattern};

/// Generator selection with its size parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenSpec {
    Arrowhead {
        n: usize,
        block: usize,
    },
    Banded {
        n: usize,
        per_row: usize,
    },
    Scattered {
        n: usize,
        per_row: usize,
        seed: u64,
    },
    GaussianMixture {
        n_points: usize,
        dim: usize,
        n_clusters: usize,
        center_spread: f64,
        cluster_sigma: f64,
        seed: u64,
    },
}

/// Full `block x block` blocks on the diagonal plus a full first block row
/// and first block column.
pub fn gen_arrowhead(n: usize, block: usize) -> Result<SparsePattern> {
    if block == 0 || n == 0 || n % block != 0 {
        return Err(Error::NotDivisible { n, block });
    }
    let mut rows: Vec<Vec<u32>> = Vec::with_capacity(n);
    for i in 0..n {
        let bi = i / block;
        let mut cols: Vec<u32> = Vec::new();
        if bi == 0 {
            cols.extend(0..n as u32);
        } else {
            cols.extend(0..block as u32);
            cols.extend((bi * block) as u32..((bi + 1) * block) as u32);
        }
        rows.push(cols);
    }
    Ok(from_rows(n, n, rows))
}

/// Row `i` holds columns `i - floor(w/2) ..= i + ceil(w/2) - 1`, clipped.
pub fn gen_banded(n: usize, per_row: usize) -> Result<SparsePattern> {
    if per_row > n {
        return Err(Error::TooWide { per_row, n });
    }
    let (left, right) = (per_row / 2, per_row.div_ceil(2));
    let rows = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(left);
            let hi = (i + right).min(n);
            (lo as u32..hi as u32).collect()
        })
        .collect();
    Ok(from_rows(n, n, rows))
}

/// `per_row` distinct uniformly random columns in every row.
pub fn gen_scattered(n: usize, per_row: usize, seed: u64) -> Result<SparsePattern> {
    if per_row > n {
        return Err(Error::TooWide { per_row, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let mut cols: Vec<u32> = sample(&mut rng, n, per_row).into_iter().map(|c| c as u32).collect();
            cols.sort_unstable();
            cols
        })
        .collect();
    Ok(from_rows(n, n, rows))
}

fn from_rows(n_rows: usize, n_cols: usize, rows: Vec<Vec<u32>>) -> SparsePattern {
    let mut row_ptr = Vec::with_capacity(n_rows + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::with_capacity(rows.iter().map(Vec::len).sum());
    for r in rows {
        col_idx.extend(r);
        row_ptr.push(col_idx.len());
    }
    SparsePattern::from_csr_parts(n_rows, n_cols, row_ptr, col_idx)
}

/// Mixture sample with the ground truth behind it.
#[derive(Clone, Debug)]
pub struct Mixture {
    pub points: PointSet,
    pub centers: PointSet,
    /// Cluster of each point.
    pub labels: Vec<usize>,
}

/// Cluster centers uniform in `[0, center_spread)^dim`; each point picks a
/// cluster uniformly and adds isotropic Gaussian noise of `cluster_sigma`.
pub fn gen_gaussian_mixture(
    n_points: usize,
    dim: usize,
    n_clusters: usize,
    center_spread: f64,
    cluster_sigma: f64,
    seed: u64,
) -> Result<PointSet> {
    Ok(gen_gaussian_mixture_labeled(n_points, dim, n_clusters, center_spread, cluster_sigma, seed)?.points)
}

pub fn gen_gaussian_mixture_labeled(
    n_points: usize,
    dim: usize,
    n_clusters: usize,
    center_spread: f64,
    cluster_sigma: f64,
    seed: u64,
) -> Result<Mixture> {
    if n_points == 0 || dim == 0 || n_clusters == 0 {
        return Err(Error::InvalidParameter("mixture sizes must be positive".into()));
    }
    if !(center_spread >= 0.0 && center_spread.is_finite() && cluster_sigma >= 0.0 && cluster_sigma.is_finite()) {
        return Err(Error::InvalidParameter("mixture scales must be finite and non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<f64> = (0..n_clusters * dim)
        .map(|_| rng.random::<f64>() * center_spread)
        .collect();
    let mut labels = Vec::with_capacity(n_points);
    let mut coords = Vec::with_capacity(n_points * dim);
    for _ in 0..n_points {
        let c = rng.random_range(0..n_clusters);
        labels.push(c);
        for a in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            coords.push(centers[c * dim + a] + cluster_sigma * z);
        }
    }
    Ok(Mixture {
        points: PointSet::new(n_points, dim, coords)?,
        centers: PointSet::new(n_clusters, dim, centers)?,
        labels,
    })
}

pub enum Generated {
    Pattern(SparsePattern),
    Points(PointSet),
}

pub fn generate(spec: &GenSpec) -> Result<Generated> {
    Ok(match *spec {
        GenSpec::Arrowhead { n, block } => Generated::Pattern(gen_arrowhead(n, block)?),
        GenSpec::Banded { n, per_row } => Generated::Pattern(gen_banded(n, per_row)?),
        GenSpec::Scattered { n, per_row, seed } => Generated::Pattern(gen_scattered(n, per_row, seed)?),
        GenSpec::GaussianMixture {
            n_points,
            dim,
            n_clusters,
            center_spread,
            cluster_sigma,
            seed,
        } => Generated::Points(gen_gaussian_mixture(
            n_points,
            dim,
            n_clusters,
            center_spread,
            cluster_sigma,
            seed,
        )?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arrowhead_counts() {
        assert_eq!(gen_arrowhead(500, 20).unwrap().nnz(), 29200);
        assert_eq!(gen_arrowhead(20, 20).unwrap().nnz(), 400);
        assert_eq!(gen_arrowhead(40, 20).unwrap().nnz(), 1600);
        assert!(matches!(gen_arrowhead(50, 20), Err(Error::NotDivisible { .. })));
    }

    #[test]
    fn banded_counts() {
        assert_eq!(gen_banded(5, 3).unwrap().nnz(), 13);
        let d = gen_banded(4, 1).unwrap();
        assert!(d.entries().all(|(i, j)| i == j));
        assert!(matches!(gen_banded(3, 4), Err(Error::TooWide { .. })));
    }

    #[test]
    fn scattered_counts() {
        let p = gen_scattered(100, 7, 1).unwrap();
        assert_eq!(p.nnz(), 700);
        assert_eq!(p, gen_scattered(100, 7, 1).unwrap());
        assert!(gen_scattered(3, 4, 0).is_err());
    }

    #[test]
    fn degenerate_mixture() {
        let p = gen_gaussian_mixture(10, 3, 1, 5.0, 0.0, 2).unwrap();
        assert!(p.iter().all(|x| x == p.point(0)));
    }
}
