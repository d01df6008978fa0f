//! Principal axes by blocked subspace iteration, and projection onto them.
//!
//! The covariance is never formed: each sweep applies `Xᵀ(X Q)` to a block
//! of `d + oversample` vectors, extracts Ritz pairs with a small Jacobi
//! eigensolve, and re-orthonormalizes. Iteration stops once the largest
//! principal angle between successive leading-`d` subspaces drops below `tol`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::PointSet;

const OVERSAMPLE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcaOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PcaOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 500,
            seed: 0,
        }
    }
}

/// Leading principal axes of a centered point set.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    dim_in: usize,
    dim_out: usize,
    mean: Vec<f64>,
    /// `dim_out` rows of length `dim_in`.
    axes: Vec<f64>,
    singular_values: Vec<f64>,
    total_sq_norm: f64,
    iterations: usize,
    converged: bool,
}

impl Embedding {
    /// Wraps externally computed axes (e.g. ones a caller already has).
    pub fn from_parts(
        mean: Vec<f64>,
        axes: Vec<Vec<f64>>,
        singular_values: Vec<f64>,
        total_sq_norm: f64,
    ) -> Result<Self> {
        let dim_in = mean.len();
        if axes.iter().any(|a| a.len() != dim_in) || singular_values.len() != axes.len() {
            return Err(Error::SizeMismatch("axes, mean and singular values disagree".into()));
        }
        Ok(Self {
            dim_in,
            dim_out: axes.len(),
            mean,
            axes: axes.concat(),
            singular_values,
            total_sq_norm,
            iterations: 0,
            converged: true,
        })
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a * self.dim_in..(a + 1) * self.dim_in]
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn total_sq_norm(&self) -> f64 {
        self.total_sq_norm
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Keeps only the first `d` axes.
    pub fn truncated(&self, d: usize) -> Self {
        let d = d.min(self.dim_out);
        Self {
            dim_out: d,
            axes: self.axes[..d * self.dim_in].to_vec(),
            singular_values: self.singular_values[..d].to_vec(),
            mean: self.mean.clone(),
            ..*self
        }
    }
}

pub fn fit_pca(points: &PointSet, d: usize, opts: PcaOptions) -> Result<Embedding> {
    let (n, dim) = (points.n_points(), points.dim());
    if d == 0 || d > dim || d > n {
        return Err(Error::InvalidParameter(format!(
            "embedding dimension {d} must lie in 1..=min({dim}, {n})"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let mean = points.mean();
    let mut centered = points.coords().to_vec();
    for row in centered.chunks_exact_mut(dim) {
        for (x, m) in row.iter_mut().zip(&mean) {
            *x -= m;
        }
    }
    let total_sq_norm: f64 = centered.iter().map(|x| x * x).sum();
    if total_sq_norm == 0.0 {
        return Err(Error::DegenerateData("all points are identical".into()));
    }

    let b = (d + OVERSAMPLE).min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q = Block::random(dim, b, &mut rng);
    q.orthonormalize(&mut rng);

    let mut prev: Option<Block> = None;
    let mut converged = false;
    let mut iterations = 0;
    let (mut ritz_vals, mut ritz_vecs);
    loop {
        iterations += 1;
        let z = covariance_apply(&centered, n, dim, &q);
        let h = q.gram_with(&z);
        let (vals, v) = jacobi_eigen(h, b);
        ritz_vals = vals;
        ritz_vecs = q.times_small(&v, b);
        let lead = ritz_vecs.leading(d);
        if let Some(p) = &prev {
            if max_sin_angle(p, &lead) < opts.tol {
                converged = true;
            }
        }
        if converged || iterations >= opts.max_iter {
            break;
        }
        prev = Some(lead);
        q = z.times_small(&v, b);
        q.orthonormalize(&mut rng);
    }

    let mut axes = Vec::with_capacity(d * dim);
    for a in 0..d {
        let mut axis = ritz_vecs.column(a);
        orient(&mut axis);
        axes.extend(axis);
    }
    let singular_values = ritz_vals[..d].iter().map(|&l| l.max(0.0).sqrt()).collect();
    Ok(Embedding {
        dim_in: dim,
        dim_out: d,
        mean,
        axes,
        singular_values,
        total_sq_norm,
        iterations,
        converged,
    })
}

/// Coordinates of each point along the embedding axes, after centering.
pub fn project(points: &PointSet, e: &Embedding) -> Result<PointSet> {
    if points.dim() != e.dim_in {
        return Err(Error::DimMismatch {
            expected: e.dim_in,
            got: points.dim(),
        });
    }
    let mut out = Vec::with_capacity(points.n_points() * e.dim_out);
    let mut shifted = vec![0.0; e.dim_in];
    for p in points.iter() {
        for ((s, x), m) in shifted.iter_mut().zip(p).zip(&e.mean) {
            *s = x - m;
        }
        for a in 0..e.dim_out {
            out.push(dot(&shifted, e.axis(a)));
        }
    }
    PointSet::new(points.n_points(), e.dim_out, out)
}

/// Share of the centered squared Frobenius norm captured by the axes.
pub fn variance_ratio(e: &Embedding) -> Result<f64> {
    if !(e.total_sq_norm > 0.0) {
        return Err(Error::DegenerateData("zero total variance".into()));
    }
    let captured: f64 = e.singular_values.iter().map(|s| s * s).sum();
    Ok((captured / e.total_sq_norm).min(1.0))
}

/// Smallest `d <= d_max` whose variance ratio reaches `ratio_tol`, else `d_max`.
pub fn choose_dim(points: &PointSet, ratio_tol: f64, d_max: usize, opts: PcaOptions) -> Result<usize> {
    if !(0.0..=1.0).contains(&ratio_tol) || d_max == 0 {
        return Err(Error::InvalidParameter(format!(
            "ratio_tol {ratio_tol} must lie in [0, 1] and d_max must be positive"
        )));
    }
    let d_max = d_max.min(points.dim()).min(points.n_points());
    let e = fit_pca(points, d_max, opts)?;
    let mut captured = 0.0;
    for (i, s) in e.singular_values.iter().enumerate() {
        captured += s * s;
        if captured / e.total_sq_norm >= ratio_tol {
            return Ok(i + 1);
        }
    }
    Ok(d_max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Flips `v` so that its largest-magnitude component is positive.
fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Dense `rows x cols` block stored column-major.
#[derive(Clone, Debug)]
struct Block {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Block {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
        Self { rows, cols, data }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn column(&self, j: usize) -> Vec<f64> {
        self.col(j).to_vec()
    }

    fn leading(&self, d: usize) -> Self {
        Self {
            rows: self.rows,
            cols: d,
            data: self.data[..d * self.rows].to_vec(),
        }
    }

    /// `selfᵀ other`, a `cols x other.cols` matrix in row-major order.
    fn gram_with(&self, other: &Block) -> Vec<f64> {
        let mut g = vec![0.0; self.cols * other.cols];
        for i in 0..self.cols {
            for j in 0..other.cols {
                g[i * other.cols + j] = dot(self.col(i), other.col(j));
            }
        }
        g
    }

    /// `self * v` for a small row-major `cols x k` matrix `v`.
    fn times_small(&self, v: &[f64], k: usize) -> Block {
        let mut out = Block::zeros(self.rows, k);
        for j in 0..k {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for i in 0..self.cols {
                let c = v[i * k + j];
                if c != 0.0 {
                    for (o, x) in dst.iter_mut().zip(self.col(i)) {
                        *o += c * x;
                    }
                }
            }
        }
        out
    }

    /// Modified Gram-Schmidt with one re-orthogonalization pass; columns that
    /// collapse (rank deficiency) are replaced by fresh random directions.
    fn orthonormalize(&mut self, rng: &mut ChaCha8Rng) {
        let rows = self.rows;
        let scale = (0..self.cols)
            .map(|j| dot(self.col(j), self.col(j)).sqrt())
            .fold(0.0, f64::max);
        for j in 0..self.cols {
            let mut attempts = 0;
            loop {
                let before = dot(self.col(j), self.col(j)).sqrt();
                for _pass in 0..2 {
                    for i in 0..j {
                        let (head, tail) = self.data.split_at_mut(j * rows);
                        let qi = &head[i * rows..(i + 1) * rows];
                        let cj = &mut tail[..rows];
                        let r = dot(qi, cj);
                        for (c, q) in cj.iter_mut().zip(qi) {
                            *c -= r * q;
                        }
                    }
                }
                let norm = dot(self.col(j), self.col(j)).sqrt();
                let collapsed = norm <= 1e-10 * before.max(scale) || norm == 0.0;
                if !collapsed || attempts > 8 {
                    let inv = 1.0 / norm;
                    self.data[j * rows..(j + 1) * rows]
                        .iter_mut()
                        .for_each(|x| *x *= inv);
                    break;
                }
                attempts += 1;
                for x in &mut self.data[j * rows..(j + 1) * rows] {
                    *x = StandardNormal.sample(rng);
                }
            }
        }
    }
}

/// `Xᵀ (X Q)` for row-major centered data `x` (`n x dim`).
fn covariance_apply(x: &[f64], n: usize, dim: usize, q: &Block) -> Block {
    let b = q.cols;
    let mut out = Block::zeros(dim, b);
    let mut proj = vec![0.0; b];
    for i in 0..n {
        let row = &x[i * dim..(i + 1) * dim];
        for (j, p) in proj.iter_mut().enumerate() {
            *p = dot(row, q.col(j));
        }
        for (j, &p) in proj.iter().enumerate() {
            let dst = &mut out.data[j * dim..(j + 1) * dim];
            for (o, r) in dst.iter_mut().zip(row) {
                *o += p * r;
            }
        }
    }
    out
}

/// Largest sine of the principal angles between the spans of two
/// orthonormal blocks of equal width.
fn max_sin_angle(old: &Block, new: &Block) -> f64 {
    let c = new.gram_with(old); // new.cols x old.cols
    let residual = {
        let mut r = old.clone();
        for j in 0..old.cols {
            for i in 0..new.cols {
                let coef = c[i * old.cols + j];
                let dst = &mut r.data[j * r.rows..(j + 1) * r.rows];
                for (o, q) in dst.iter_mut().zip(new.col(i)) {
                    *o -= coef * q;
                }
            }
        }
        r
    };
    let g = residual.gram_with(&residual);
    let (vals, _) = jacobi_eigen(g, old.cols);
    vals[0].max(0.0).sqrt()
}

/// Cyclic Jacobi eigensolver for a small symmetric row-major matrix.
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// the columns of a row-major matrix.
pub(crate) fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = s;
            a[j * n + i] = s;
        }
    }
    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * norm || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let vals = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + new_col] = v[k * n + old_col];
        }
    }
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes() {
        let a = vec![4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0];
        let (vals, vecs) = jacobi_eigen(a.clone(), 3);
        for c in 0..3 {
            for r in 0..3 {
                let av: f64 = (0..3).map(|k| a[r * 3 + k] * vecs[k * 3 + c]).sum();
                assert!((av - vals[c] * vecs[r * 3 + c]).abs() < 1e-12);
            }
        }
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
    }

    #[test]
    fn x_axis_data() {
        let pts = PointSet::from_rows(&[
            vec![-2.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.5, 0.0, 0.0],
            vec![3.0, 0.0, 0.0],
        ])
        .unwrap();
        let e = fit_pca(&pts, 1, PcaOptions::default()).unwrap();
        assert!((e.axis(0)[0] - 1.0).abs() < 1e-12);
        assert!((variance_ratio(&e).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate() {
        let pts = PointSet::new(3, 2, vec![1.0; 6]).unwrap();
        assert!(matches!(
            fit_pca(&pts, 1, PcaOptions::default()),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn bad_dimension() {
        let pts = PointSet::new(3, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 6.0]).unwrap();
        assert!(fit_pca(&pts, 0, PcaOptions::default()).is_err());
        assert!(fit_pca(&pts, 3, PcaOptions::default()).is_err());
    }

    #[test]
    fn mean_projects_to_origin() {
        let pts = PointSet::from_rows(&[vec![0.0, 1.0], vec![2.0, 5.0], vec![4.0, 0.0]]).unwrap();
        let e = fit_pca(&pts, 2, PcaOptions::default()).unwrap();
        let m = PointSet::new(1, 2, e.mean().to_vec()).unwrap();
        let p = project(&m, &e).unwrap();
        assert!(p.coords().iter().all(|c| c.abs() < 1e-14));
    }
}
