#![allow(dead_code)]

use nnorder::model::squared_distance;
use nnorder::{PointSet, SparseMatrix, SparsePattern};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(n: usize, dim: usize, seed: u64) -> PointSet {
    let mut r = rng(seed);
    let coords = (0..n * dim).map(|_| r.random::<f64>() * 10.0 - 5.0).collect();
    PointSet::new(n, dim, coords).unwrap()
}

/// Random square pattern with roughly `density * n * n` entries and
/// values in [-1, 1).
pub fn random_matrix(n_rows: usize, n_cols: usize, density: f64, seed: u64) -> SparseMatrix {
    let mut r = rng(seed);
    let mut entries = Vec::new();
    for i in 0..n_rows {
        for j in 0..n_cols {
            if r.random::<f64>() < density {
                entries.push((i, j, r.random::<f64>() * 2.0 - 1.0));
            }
        }
    }
    SparseMatrix::from_coo(&entries, n_rows, n_cols).unwrap()
}

/// k nearest by full sort of every candidate, ties to the smaller index.
pub fn dense_knn(targets: &PointSet, sources: &PointSet, k: usize, skip_self: bool) -> Vec<Vec<(f64, usize)>> {
    (0..targets.n_points())
        .map(|i| {
            let mut c: Vec<(f64, usize)> = (0..sources.n_points())
                .filter(|&j| !(skip_self && i == j))
                .map(|j| (squared_distance(targets.point(i), sources.point(j)), j))
                .collect();
            c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            c.truncate(k);
            c
        })
        .collect()
}

pub fn dense_matvec(m: &SparseMatrix, x: &[f64]) -> Vec<f64> {
    let d = m.to_dense();
    (0..m.n_rows())
        .map(|i| (0..m.n_cols()).map(|j| d[i * m.n_cols() + j] * x[j]).sum())
        .collect()
}

pub fn gamma_oracle(p: &SparsePattern, sigma: f64) -> f64 {
    let e: Vec<(f64, f64)> = p.entries().map(|(r, c)| (r as f64, c as f64)).collect();
    let mut s = 0.0;
    for a in &e {
        for b in &e {
            let d2 = (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2);
            s += (-d2 / (sigma * sigma)).exp();
        }
    }
    s / (sigma * e.len() as f64)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Max relative error, scaled by the largest reference magnitude so that
/// near-zero entries do not dominate.
pub fn max_rel_err(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    got.iter().zip(want).map(|(g, w)| (g - w).abs() / scale).fold(0.0, f64::max)
}
