use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::report::{machine_descriptor, BenchReport};
use super::spmv::{bench_spmv, prepare_layout, SpmvBenchConfig};
use crate::error::{Error, Result};
use crate::hier::{CutLevel, HierBlockMatrix};
use crate::io::{read_fvecs, read_fvecs_prefix, spy_image};
use crate::knn::{build_knn_self, gaussian_values, pattern_from_knn, symmetrize};
use crate::measure::{bandwidth, default_sigma, gamma_grid, GammaParams};
use crate::model::{PointSet, SparseMatrix};
use crate::ordering::{OrderingParams, OrderingResult, Scheme};
use crate::pca::{fit_pca, project, variance_ratio, PcaOptions};
use crate::synth::gen_gaussian_mixture;

/// Stage a pipeline failure happened in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Load,
    Knn,
    Embed,
    Order,
    Build,
    Measure,
    Spy,
    Bench,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Phase::Load => "load",
            Phase::Knn => "knn",
            Phase::Embed => "embed",
            Phase::Order => "order",
            Phase::Build => "build",
            Phase::Measure => "measure",
            Phase::Spy => "spy",
            Phase::Bench => "bench",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{phase}: {source}")]
pub struct PipelineError {
    pub phase: Phase,
    #[source]
    pub source: Error,
}

trait AtPhase<T> {
    fn at(self, phase: Phase) -> std::result::Result<T, PipelineError>;
}

impl<T> AtPhase<T> for Result<T> {
    fn at(self, phase: Phase) -> std::result::Result<T, PipelineError> {
        self.map_err(|source| PipelineError { phase, source })
    }
}

#[derive(Clone, Debug)]
pub enum PointSource {
    Mixture {
        n_points: usize,
        dim: usize,
        n_clusters: usize,
        center_spread: f64,
        cluster_sigma: f64,
        seed: u64,
    },
    Fvecs {
        path: PathBuf,
        limit: Option<usize>,
    },
    Given(PointSet),
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub source: PointSource,
    pub k: usize,
    pub symmetrize: bool,
    /// Scale of the patch-density score; `k / 2` when absent.
    pub sigma: Option<f64>,
    /// Gaussian kernel width for matrix values; the root mean square
    /// distance to the k-th neighbor when absent.
    pub kernel_bandwidth: Option<f64>,
    pub embed_dim: usize,
    pub scheme: Scheme,
    pub ordering: OrderingParams,
    pub pca: PcaOptions,
    pub cut: CutLevel,
    pub spy: Option<(usize, PathBuf)>,
    /// Schemes to benchmark with the given settings.
    pub bench: Option<(Vec<Scheme>, SpmvBenchConfig)>,
}

impl PipelineConfig {
    pub fn new(source: PointSource, k: usize, scheme: Scheme) -> Self {
        Self {
            source,
            k,
            symmetrize: true,
            sigma: None,
            kernel_bandwidth: None,
            embed_dim: 3,
            scheme,
            ordering: OrderingParams::default(),
            pca: PcaOptions::default(),
            cut: CutLevel::Auto,
            spy: None,
            bench: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub load_ns: u64,
    pub knn_ns: u64,
    pub embed_ns: u64,
    pub order_ns: u64,
    pub build_ns: u64,
    pub measure_ns: u64,
}

/// JSON metadata for one pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub machine: String,
    pub scheme: Scheme,
    pub n: usize,
    pub dim: usize,
    pub k: usize,
    pub nnz: usize,
    pub symmetrized: bool,
    pub sigma: f64,
    pub gamma: f64,
    pub bandwidth: usize,
    pub kernel_bandwidth: f64,
    pub embed_dim: usize,
    /// Share of variance captured by the embedding (1 when PCA was skipped).
    pub embed_variance_ratio: f64,
    pub tree_depth: Option<usize>,
    pub cut_level: usize,
    pub leaf_blocks: usize,
    pub row_layout: u64,
    pub col_layout: u64,
    pub seed: u64,
    pub timings: PhaseTimings,
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub points: PointSet,
    pub embedded: PointSet,
    /// Interaction matrix in original order.
    pub matrix: SparseMatrix,
    /// Same matrix after reordering.
    pub reordered: SparseMatrix,
    pub ordering: OrderingResult,
    pub hier: HierBlockMatrix,
    pub report: PipelineReport,
    pub bench: Vec<BenchReport>,
}

fn ns_since(t: Instant) -> u64 {
    (t.elapsed().as_nanos() as u64).max(1)
}

pub fn load_points(source: &PointSource) -> Result<PointSet> {
    match source {
        PointSource::Mixture {
            n_points,
            dim,
            n_clusters,
            center_spread,
            cluster_sigma,
            seed,
        } => gen_gaussian_mixture(*n_points, *dim, *n_clusters, *center_spread, *cluster_sigma, *seed),
        PointSource::Fvecs { path, limit: None } => read_fvecs(path),
        PointSource::Fvecs { path, limit: Some(l) } => read_fvecs_prefix(path, *l),
        PointSource::Given(p) => Ok(p.clone()),
    }
}

/// kNN interaction matrix of `points` with Gaussian values. Returns the
/// matrix and the kernel width used.
pub fn interaction_matrix(
    points: &PointSet,
    k: usize,
    symmetrized: bool,
    kernel_bandwidth: Option<f64>,
) -> Result<(SparseMatrix, f64)> {
    let g = build_knn_self(points, k)?;
    let mut pattern = pattern_from_knn(&g);
    if symmetrized {
        pattern = symmetrize(&pattern)?;
    }
    let h = match kernel_bandwidth {
        Some(h) => h,
        None => {
            let mean_sq = (0..g.n_targets()).map(|i| g.distances(i)[k - 1]).sum::<f64>() / g.n_targets() as f64;
            if mean_sq > 0.0 {
                mean_sq.sqrt()
            } else {
                1.0
            }
        }
    };
    Ok((gaussian_values(&pattern, points, points, h)?, h))
}

/// Centered coordinates projected onto the leading `d` principal axes;
/// with `dim <= d` the points are only centered. Returns the embedding
/// and the captured variance share.
pub fn embed_points(points: &PointSet, d: usize, opts: PcaOptions) -> Result<(PointSet, f64)> {
    if points.dim() <= d {
        let mean = points.mean();
        let coords = points
            .iter()
            .flat_map(|p| p.iter().zip(&mean).map(|(x, m)| x - m).collect::<Vec<_>>())
            .collect();
        return Ok((PointSet::new(points.n_points(), points.dim(), coords)?, 1.0));
    }
    let e = fit_pca(points, d, opts)?;
    let ratio = variance_ratio(&e).unwrap_or(0.0);
    Ok((project(points, &e)?, ratio))
}

/// Load, kNN, embed, order, permute, build, measure, and optionally render
/// and benchmark.
pub fn run_pipeline(config: &PipelineConfig) -> std::result::Result<PipelineResult, PipelineError> {
    let mut timings = PhaseTimings::default();
    let t = Instant::now();
    let points = load_points(&config.source).at(Phase::Load)?;
    timings.load_ns = ns_since(t);

    let t = Instant::now();
    let (matrix, kernel_bandwidth) =
        interaction_matrix(&points, config.k, config.symmetrize, config.kernel_bandwidth).at(Phase::Knn)?;
    timings.knn_ns = ns_since(t);

    let t = Instant::now();
    let benched = config.bench.iter().flat_map(|(s, _)| s.iter());
    let needs_embedding = std::iter::once(&config.scheme)
        .chain(benched)
        .any(|s| s.embedding_dim().is_some());
    let (embedded, ratio) = if needs_embedding {
        embed_points(&points, config.embed_dim, config.pca).at(Phase::Embed)?
    } else {
        (points.clone(), 1.0)
    };
    timings.embed_ns = ns_since(t);

    let layout = prepare_layout(&matrix, &embedded, config.scheme, &config.ordering, config.cut).at(Phase::Order)?;
    timings.order_ns = layout.order_ns;
    timings.build_ns = layout.build_ns;

    let t = Instant::now();
    let sigma = config.sigma.unwrap_or_else(|| default_sigma(config.k));
    let params = GammaParams::new(sigma).at(Phase::Measure)?;
    let gamma = gamma_grid(layout.matrix.pattern(), &params).at(Phase::Measure)?;
    let band = bandwidth(layout.matrix.pattern());
    timings.measure_ns = ns_since(t);

    if let Some((side, path)) = &config.spy {
        spy_image(layout.matrix.pattern(), *side, None, path).at(Phase::Spy)?;
    }

    let bench = match &config.bench {
        Some((schemes, cfg)) => bench_spmv(&matrix, &embedded, schemes, cfg).at(Phase::Bench)?,
        None => Vec::new(),
    };

    let report = PipelineReport {
        machine: machine_descriptor(),
        scheme: config.scheme,
        n: points.n_points(),
        dim: points.dim(),
        k: config.k,
        nnz: matrix.nnz(),
        symmetrized: config.symmetrize,
        sigma,
        gamma,
        bandwidth: band,
        kernel_bandwidth,
        embed_dim: embedded.dim(),
        embed_variance_ratio: ratio,
        tree_depth: layout.ordering.row_tree.as_ref().map(|t| t.depth()),
        cut_level: layout.hier.cut_level(),
        leaf_blocks: layout.hier.leaf_blocks().len(),
        row_layout: layout.hier.row_layout(),
        col_layout: layout.hier.col_layout(),
        seed: config.ordering.seed,
        timings,
    };
    Ok(PipelineResult {
        points,
        embedded,
        matrix,
        reordered: layout.matrix,
        ordering: layout.ordering,
        hier: layout.hier,
        report,
        bench,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scheme: Scheme) -> PipelineConfig {
        let source = PointSource::Mixture {
            n_points: 300,
            dim: 8,
            n_clusters: 4,
            center_spread: 10.0,
            cluster_sigma: 1.0,
            seed: 3,
        };
        PipelineConfig::new(source, 6, scheme)
    }

    #[test]
    fn smoke_and_determinism() {
        let a = run_pipeline(&small(Scheme::Scattered)).unwrap();
        assert!(a.report.gamma > 0.0);
        let t1 = run_pipeline(&small(Scheme::Tree3)).unwrap();
        let t2 = run_pipeline(&small(Scheme::Tree3)).unwrap();
        assert_eq!(t1.ordering.row_perm, t2.ordering.row_perm);
        assert_eq!(t1.report.gamma, t2.report.gamma);
        assert!(t1.report.gamma > a.report.gamma);
    }

    #[test]
    fn errors_carry_phase() {
        let mut c = small(Scheme::Rcm);
        c.k = 10_000;
        let e = run_pipeline(&c).unwrap_err();
        assert_eq!(e.phase, Phase::Knn);
        assert!(e.to_string().starts_with("knn:"));
    }
}
