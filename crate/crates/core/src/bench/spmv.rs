use std::time::Instant;

use super::report::{machine_descriptor, BenchReport};
use crate::error::{Error, Result};
use crate::hier::{build_hier, CutLevel, HierBlockMatrix};
use crate::kernels::{spmv_flat, spmv_flat_into, spmv_flat_parallel_into, worker_pool};
use crate::model::{PointSet, SparseMatrix};
use crate::ordering::{compute_ordering, OrderingParams, OrderingResult, PartitionTree, Scheme};

/// Relative tolerance for cross-scheme checksum agreement. Reordering
/// changes the summation order inside each row, so checksums agree to
/// rounding, not bitwise.
pub const CHECKSUM_RTOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct SpmvBenchConfig {
    pub reps: usize,
    pub workers: Vec<usize>,
    /// Neighbor count, recorded in reports only.
    pub k: usize,
    pub cut: CutLevel,
    pub ordering: OrderingParams,
    /// Also time the flat CSR kernel on every reordered matrix.
    pub include_flat: bool,
}

impl Default for SpmvBenchConfig {
    fn default() -> Self {
        Self {
            reps: 10,
            workers: vec![1],
            k: 0,
            cut: CutLevel::Auto,
            ordering: OrderingParams::default(),
            include_flat: true,
        }
    }
}

/// A matrix reordered under one scheme, in both storage forms.
#[derive(Clone, Debug)]
pub struct SchemeLayout {
    pub ordering: OrderingResult,
    pub matrix: SparseMatrix,
    pub hier: HierBlockMatrix,
    pub order_ns: u64,
    pub build_ns: u64,
}

/// Orders `m` under `scheme`, permutes it and builds blocked storage.
/// Non-tree schemes get single-cluster trees, i.e. one flat block.
pub fn prepare_layout(
    m: &SparseMatrix,
    embedded: &PointSet,
    scheme: Scheme,
    params: &OrderingParams,
    cut: CutLevel,
) -> Result<SchemeLayout> {
    let t0 = Instant::now();
    let ordering = compute_ordering(scheme, m.pattern(), embedded, params)?;
    let order_ns = elapsed_ns(t0);
    let t1 = Instant::now();
    let matrix = m.permute(&ordering.row_perm, &ordering.col_perm)?;
    let (row_tree, col_tree, cut) = match (&ordering.row_tree, &ordering.col_tree) {
        (Some(r), Some(c)) => (r.clone(), c.clone(), cut),
        _ => (
            PartitionTree::single_cluster(ordering.row_perm.clone()),
            PartitionTree::single_cluster(ordering.col_perm.clone()),
            CutLevel::Fixed(0),
        ),
    };
    let hier = build_hier(&matrix, &row_tree, &col_tree, cut)?;
    let build_ns = elapsed_ns(t1);
    Ok(SchemeLayout {
        ordering,
        matrix,
        hier,
        order_ns,
        build_ns,
    })
}

/// Deterministic charge vector in original source order.
pub fn bench_charges(n: usize) -> Vec<f64> {
    (0..n).map(|i| 1.0 + ((i * 7919) % 1009) as f64 / 1009.0).collect()
}

/// Position-weighted sum, so that a wrongly un-permuted output is caught
/// even when its plain sum is unchanged.
pub fn checksum(y: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, &v)| v * (1.0 + (i % 97) as f64 / 97.0))
        .sum()
}

fn elapsed_ns(t: Instant) -> u64 {
    (t.elapsed().as_nanos() as u64).max(1)
}

/// Median of `reps` timed calls after one warm-up call.
pub fn time_median<F: FnMut()>(reps: usize, mut f: F) -> u64 {
    f();
    let mut times: Vec<u64> = (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            elapsed_ns(t)
        })
        .collect();
    times.sort_unstable();
    times[times.len() / 2]
}

/// Times SpMV for every scheme and worker count on the same square matrix
/// `m` (original order). `embedded` supplies coordinates for the
/// embedding-based schemes. Every output is un-permuted and its checksum
/// compared against the unreordered flat product.
pub fn bench_spmv(
    m: &SparseMatrix,
    embedded: &PointSet,
    schemes: &[Scheme],
    config: &SpmvBenchConfig,
) -> Result<Vec<BenchReport>> {
    if config.reps < 3 {
        return Err(Error::InvalidParameter(format!(
            "at least 3 repetitions required, got {}",
            config.reps
        )));
    }
    let x = bench_charges(m.n_cols());
    let reference = checksum(&spmv_flat(m, &x)?);
    let machine = machine_descriptor();
    let pools = config
        .workers
        .iter()
        .map(|&w| worker_pool(w).map(|p| (w, p)))
        .collect::<Result<Vec<_>>>()?;

    let mut reports = Vec::new();
    for &scheme in schemes {
        let layout = prepare_layout(m, embedded, scheme, &config.ordering, config.cut)?;
        let xp = layout.ordering.col_perm.apply(&x);
        let mut y = vec![0.0; m.n_rows()];
        let mut kernels = vec!["hier"];
        if config.include_flat {
            kernels.push("flat");
        }
        for &(workers, ref pool) in &pools {
            for &kernel in &kernels {
                let ns = match (kernel, workers) {
                    ("hier", 1) => time_median(config.reps, || layout.hier.multiply_into(&xp, &mut y)),
                    ("hier", _) => time_median(config.reps, || {
                        pool.install(|| layout.hier.multiply_into_par(&xp, &mut y))
                    }),
                    (_, 1) => time_median(config.reps, || {
                        spmv_flat_into(&layout.matrix, &xp, &mut y).expect("dimensions checked")
                    }),
                    _ => time_median(config.reps, || {
                        pool.install(|| spmv_flat_parallel_into(&layout.matrix, &xp, &mut y))
                            .expect("dimensions checked")
                    }),
                };
                let sum = checksum(&layout.ordering.row_perm.unapply(&y));
                if (sum - reference).abs() > CHECKSUM_RTOL * reference.abs().max(1.0) {
                    return Err(Error::ChecksumMismatch {
                        scheme: format!("{scheme}/{kernel}/{workers}"),
                        expected: reference,
                        got: sum,
                    });
                }
                reports.push(BenchReport {
                    machine: machine.clone(),
                    scheme: scheme.name().into(),
                    kernel: kernel.into(),
                    n: m.n_rows(),
                    nnz: m.nnz(),
                    k: config.k,
                    order_ns: layout.order_ns,
                    build_ns: layout.build_ns,
                    multiply_ns: ns,
                    reps: config.reps,
                    workers,
                    throughput: m.nnz() as f64 / (ns as f64 * 1e-9),
                    checksum: sum,
                });
            }
        }
    }
    Ok(reports)
}

/// Flat-kernel throughput (nonzeros per second) of a fixed matrix.
pub fn flat_throughput(m: &SparseMatrix, reps: usize) -> Result<(f64, f64)> {
    let x = bench_charges(m.n_cols());
    let mut y = vec![0.0; m.n_rows()];
    spmv_flat_into(m, &x, &mut y)?;
    let ns = time_median(reps, || spmv_flat_into(m, &x, &mut y).expect("dimensions checked"));
    Ok((m.nnz() as f64 / (ns as f64 * 1e-9), checksum(&y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SparsePattern;

    #[test]
    fn identity_checksum_is_input_checksum() {
        let n = 50;
        let m = SparseMatrix::filled(SparsePattern::from_entries(n, n, (0..n).map(|i| (i, i))).unwrap(), 1.0)
            .unwrap();
        let pts = PointSet::new(n, 3, (0..3 * n).map(|v| (v % 11) as f64).collect()).unwrap();
        let cfg = SpmvBenchConfig {
            reps: 3,
            ..Default::default()
        };
        let reports = bench_spmv(&m, &pts, &Scheme::ALL, &cfg).unwrap();
        let want = checksum(&bench_charges(n));
        assert_eq!(reports.len(), 2 * Scheme::ALL.len());
        for r in reports {
            assert!((r.checksum - want).abs() <= 1e-12 * want);
            assert!(r.multiply_ns > 0 && r.throughput > 0.0);
        }
    }

    #[test]
    fn too_few_reps() {
        let m = SparseMatrix::filled(SparsePattern::empty(2, 2), 1.0).unwrap();
        let pts = PointSet::zeros(2, 1);
        let cfg = SpmvBenchConfig {
            reps: 2,
            ..Default::default()
        };
        assert!(bench_spmv(&m, &pts, &[Scheme::Scattered], &cfg).is_err());
    }
}
