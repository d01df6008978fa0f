use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nnorder::bench::{
    append_csv, bench_spmv, checksum, embed_points, interaction_matrix, load_points, machine_descriptor,
    prepare_layout, run_pipeline, PipelineConfig, PointSource, SpmvBenchConfig,
};
use nnorder::hier::{write_hbm, CutLevel};
use nnorder::io::{spy_image, write_fvecs, Roi};
use nnorder::kernels::{meanshift_step, worker_pool, MeanShiftState, TsneAttraction, DEFAULT_REFRESH_PERIOD};
use nnorder::measure::{bandwidth, default_sigma, gamma_exact, gamma_grid, GammaParams};
use nnorder::model::mmio::{read_matrix_market, write_matrix_market, write_pattern_market};
use nnorder::ordering::{compute_ordering, OrderingParams, Scheme, DEFAULT_LEAF_CAPACITY, DEFAULT_MAX_DEPTH};
use nnorder::pca::{fit_pca, project, variance_ratio, PcaOptions};
use nnorder::synth::{gen_arrowhead, gen_banded, gen_gaussian_mixture, gen_scattered};
use nnorder::{PointSet, SparseMatrix};
use serde_json::json;

/// Locality-aware reordering of near-neighbor interaction matrices.
#[derive(Parser, Debug)]
#[command(name = "nnorder", version)]
struct Cli {
    /// Seed for every random choice (data generation, scattered order, PCA start).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads; `bench` accepts a comma-separated list.
    #[arg(long, global = true, value_delimiter = ',', default_value = "1")]
    workers: Vec<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic pattern (Matrix Market) or point set (.fvecs).
    Gen(GenArgs),
    /// Build the kNN interaction matrix of a point set.
    Knn(KnnArgs),
    /// Project points onto their leading principal axes.
    Embed(EmbedArgs),
    /// Compute an ordering and write the permutation.
    Order(OrderArgs),
    /// Patch-density score and bandwidth under one or more schemes.
    Measure(MeasureArgs),
    /// Render a sparsity profile as a PGM image.
    Spy(SpyArgs),
    /// Time SpMV under several schemes.
    Bench(BenchArgs),
    /// Time t-SNE attractive-force steps.
    TsneAttr(TsneArgs),
    /// Run mean-shift iterations.
    Meanshift(MeanShiftArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum GenKind {
    Arrowhead,
    Banded,
    Scattered,
    Mixture,
}

#[derive(Args, Debug)]
struct GenArgs {
    kind: GenKind,
    #[arg(long)]
    n: usize,
    /// Block size (arrowhead).
    #[arg(long, default_value_t = 20)]
    block: usize,
    /// Entries per row (banded, scattered).
    #[arg(long, default_value_t = 30)]
    per_row: usize,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    clusters: usize,
    #[arg(long, default_value_t = 10.0)]
    spread: f64,
    #[arg(long, default_value_t = 1.0)]
    cluster_sigma: f64,
    #[arg(long)]
    out: PathBuf,
}

/// Where points come from: a `.fvecs` file or a generated mixture.
#[derive(Args, Debug, Clone)]
struct PointArgs {
    /// `.fvecs` input; a Gaussian mixture is generated when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Read only the first records of the input.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value_t = 4096)]
    n: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 32)]
    clusters: usize,
    #[arg(long, default_value_t = 10.0)]
    spread: f64,
    #[arg(long, default_value_t = 1.0)]
    cluster_sigma: f64,
}

impl PointArgs {
    fn source(&self, seed: u64) -> PointSource {
        match &self.input {
            Some(path) => PointSource::Fvecs {
                path: path.clone(),
                limit: self.limit,
            },
            None => PointSource::Mixture {
                n_points: self.n,
                dim: self.dim,
                n_clusters: self.clusters,
                center_spread: self.spread,
                cluster_sigma: self.cluster_sigma,
                seed,
            },
        }
    }
}

#[derive(Args, Debug, Clone)]
struct MatrixArgs {
    #[command(flatten)]
    points: PointArgs,
    #[arg(long, default_value_t = 30)]
    k: usize,
    /// Keep the directed kNN pattern instead of its union with the transpose.
    #[arg(long)]
    no_symmetrize: bool,
    /// Gaussian kernel width of matrix values.
    #[arg(long)]
    kernel_bandwidth: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct SchemeArgs {
    #[arg(long, default_value = "tree3")]
    scheme: Scheme,
    #[arg(long, default_value_t = DEFAULT_LEAF_CAPACITY)]
    leaf_capacity: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
    max_depth: usize,
    #[arg(long, default_value_t = nnorder::ordering::DEFAULT_LEX_BINS)]
    lex_bins: usize,
    /// Embedding dimension for PCA.
    #[arg(long, default_value_t = 3)]
    embed_dim: usize,
    /// Leaf-block level of the hierarchy; automatic when absent.
    #[arg(long)]
    cut_level: Option<usize>,
}

impl SchemeArgs {
    fn params(&self, seed: u64) -> OrderingParams {
        OrderingParams {
            seed,
            lex_bins: self.lex_bins,
            leaf_capacity: self.leaf_capacity,
            max_depth: self.max_depth,
        }
    }

    fn cut(&self) -> CutLevel {
        self.cut_level.map_or(CutLevel::Auto, CutLevel::Fixed)
    }
}

#[derive(Args, Debug)]
struct KnnArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    /// Matrix Market output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[command(flatten)]
    points: PointArgs,
    #[arg(long, default_value_t = 3)]
    embed_dim: usize,
    /// `.fvecs` output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct OrderArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    #[command(flatten)]
    scheme: SchemeArgs,
    /// Row permutation as text, one new position per line.
    #[arg(long)]
    out: PathBuf,
    /// Also write the reordered matrix (Matrix Market).
    #[arg(long)]
    matrix_out: Option<PathBuf>,
    /// Also write the blocked matrix (HBM1 binary).
    #[arg(long)]
    hbm_out: Option<PathBuf>,
    /// JSON run metadata.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    /// Matrix Market input; measured as given when set.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[command(flatten)]
    source: MatrixArgs,
    /// Schemes to compare on generated or loaded points.
    #[arg(long, value_delimiter = ',', default_value = "scattered,rcm,lex1,lex2,lex3,tree2,tree3")]
    schemes: Vec<Scheme>,
    #[command(flatten)]
    scheme: SchemeArgs,
    /// Score scale; k/2 when absent.
    #[arg(long)]
    sigma: Option<f64>,
    /// Direct quadratic summation instead of the truncated grid.
    #[arg(long)]
    exact: bool,
    /// Write the table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpyArgs {
    /// Matrix Market input; otherwise built from points and reordered by --scheme.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[command(flatten)]
    source: MatrixArgs,
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long, default_value_t = 512)]
    side: usize,
    /// Region row_lo,row_hi,col_lo,col_hi (half-open).
    #[arg(long, value_delimiter = ',', num_args = 4)]
    roi: Option<Vec<usize>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    source: MatrixArgs,
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long, value_delimiter = ',', default_value = "scattered,rcm,lex1,lex2,lex3,tree2,tree3")]
    schemes: Vec<Scheme>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Skip the flat CSR kernel.
    #[arg(long)]
    hier_only: bool,
    /// CSV rows are appended here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON run metadata.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TsneArgs {
    #[command(flatten)]
    source: MatrixArgs,
    #[command(flatten)]
    scheme: SchemeArgs,
    /// Low-dimensional map dimension.
    #[arg(long, default_value_t = 2)]
    map_dim: usize,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MeanShiftArgs {
    #[command(flatten)]
    points: PointArgs,
    #[arg(long, default_value_t = 30)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    bandwidth: f64,
    #[arg(long, default_value_t = 50)]
    iters: usize,
    #[arg(long, default_value_t = DEFAULT_REFRESH_PERIOD)]
    refresh: usize,
    /// Reorder targets by a 3D tree at each refresh.
    #[arg(long)]
    reorder: bool,
    /// Final means (`.fvecs`), in input order.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.workers.is_empty() || cli.workers.contains(&0) {
        bail!("setup: worker counts must be positive");
    }
    let pool = worker_pool(*cli.workers.iter().max().unwrap()).context("setup")?;
    let seed = cli.seed;
    let workers = cli.workers.clone();
    pool.install(move || match cli.command {
        Command::Gen(a) => gen(a, seed),
        Command::Knn(a) => knn(a, seed),
        Command::Embed(a) => embed(a, seed),
        Command::Order(a) => order(a, seed),
        Command::Measure(a) => measure(a, seed),
        Command::Spy(a) => spy(a, seed),
        Command::Bench(a) => bench(a, seed, workers),
        Command::TsneAttr(a) => tsne(a, seed),
        Command::Meanshift(a) => meanshift(a, seed),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn gen(a: GenArgs, seed: u64) -> Result<()> {
    let pattern = match a.kind {
        GenKind::Arrowhead => gen_arrowhead(a.n, a.block),
        GenKind::Banded => gen_banded(a.n, a.per_row),
        GenKind::Scattered => gen_scattered(a.n, a.per_row, seed),
        GenKind::Mixture => {
            let pts = gen_gaussian_mixture(a.n, a.dim, a.clusters, a.spread, a.cluster_sigma, seed).context("gen")?;
            write_fvecs(&a.out, &pts).context("write")?;
            println!("{} points of dimension {} -> {}", pts.n_points(), pts.dim(), a.out.display());
            return Ok(());
        }
    }
    .context("gen")?;
    let mut w = create(&a.out).context("write")?;
    write_pattern_market(&mut w, &pattern).context("write")?;
    w.flush().context("write")?;
    println!("{}x{} pattern, {} nonzeros -> {}", pattern.n_rows(), pattern.n_cols(), pattern.nnz(), a.out.display());
    Ok(())
}

fn load(a: &PointArgs, seed: u64) -> Result<PointSet> {
    load_points(&a.source(seed)).context("load")
}

fn build_matrix(a: &MatrixArgs, seed: u64) -> Result<(PointSet, SparseMatrix, f64)> {
    let pts = load(&a.points, seed)?;
    let (m, h) = interaction_matrix(&pts, a.k, !a.no_symmetrize, a.kernel_bandwidth).context("knn")?;
    Ok((pts, m, h))
}

fn embedded_for(pts: &PointSet, schemes: &[Scheme], s: &SchemeArgs, seed: u64) -> Result<PointSet> {
    if schemes.iter().all(|sc| sc.embedding_dim().is_none()) {
        return Ok(pts.clone());
    }
    let opts = PcaOptions {
        seed,
        ..PcaOptions::default()
    };
    Ok(embed_points(pts, s.embed_dim, opts).context("embed")?.0)
}

fn knn(a: KnnArgs, seed: u64) -> Result<()> {
    let (_, m, h) = build_matrix(&a.matrix, seed)?;
    let mut w = create(&a.out).context("write")?;
    write_matrix_market(&mut w, &m).context("write")?;
    w.flush().context("write")?;
    println!("{}x{} matrix, {} nonzeros, kernel width {h:.6} -> {}", m.n_rows(), m.n_cols(), m.nnz(), a.out.display());
    Ok(())
}

fn embed(a: EmbedArgs, seed: u64) -> Result<()> {
    let pts = load(&a.points, seed)?;
    let opts = PcaOptions {
        seed,
        ..PcaOptions::default()
    };
    let e = fit_pca(&pts, a.embed_dim, opts).context("embed")?;
    let y = project(&pts, &e).context("embed")?;
    write_fvecs(&a.out, &y).context("write")?;
    println!(
        "{} -> {} dimensions, variance ratio {:.4}, {} iterations{} -> {}",
        pts.dim(),
        a.embed_dim,
        variance_ratio(&e).context("embed")?,
        e.iterations(),
        if e.converged() { "" } else { " (not converged)" },
        a.out.display()
    );
    Ok(())
}

fn order(a: OrderArgs, seed: u64) -> Result<()> {
    let mut cfg = PipelineConfig::new(a.matrix.points.source(seed), a.matrix.k, a.scheme.scheme);
    cfg.symmetrize = !a.matrix.no_symmetrize;
    cfg.kernel_bandwidth = a.matrix.kernel_bandwidth;
    cfg.embed_dim = a.scheme.embed_dim;
    cfg.ordering = a.scheme.params(seed);
    cfg.pca.seed = seed;
    cfg.cut = a.scheme.cut();
    let r = run_pipeline(&cfg)?;
    let mut w = create(&a.out).context("write")?;
    r.ordering.row_perm.write_text(&mut w).context("write")?;
    w.flush().context("write")?;
    if let Some(p) = &a.matrix_out {
        let mut w = create(p).context("write")?;
        write_matrix_market(&mut w, &r.reordered).context("write")?;
        w.flush().context("write")?;
    }
    if let Some(p) = &a.hbm_out {
        let mut w = create(p).context("write")?;
        write_hbm(&mut w, &r.hier).context("write")?;
        w.flush().context("write")?;
    }
    if let Some(p) = &a.report {
        write_json(p, &serde_json::to_value(&r.report)?).context("write")?;
    }
    println!(
        "{}: n {} nnz {} gamma {:.4} bandwidth {} leaf blocks {} -> {}",
        r.report.scheme,
        r.report.n,
        r.report.nnz,
        r.report.gamma,
        r.report.bandwidth,
        r.report.leaf_blocks,
        a.out.display()
    );
    Ok(())
}

fn read_matrix(path: &Path) -> Result<SparseMatrix> {
    let f = File::open(path).with_context(|| format!("load: cannot open {}", path.display()))?;
    Ok(read_matrix_market(BufReader::new(f)).context("load")?.0)
}

fn measure(a: MeasureArgs, seed: u64) -> Result<()> {
    let sigma = a.sigma.unwrap_or_else(|| default_sigma(a.source.k));
    let params = GammaParams::new(sigma).context("measure")?;
    let score = |p: &nnorder::SparsePattern| {
        if a.exact {
            gamma_exact(p, &params)
        } else {
            gamma_grid(p, &params)
        }
    };
    let mut rows: Vec<(String, usize, f64, usize)> = Vec::new();
    if let Some(path) = &a.matrix {
        let m = read_matrix(path)?;
        rows.push(("given".into(), m.nnz(), score(m.pattern()).context("measure")?, bandwidth(m.pattern())));
    } else {
        let (pts, m, _) = build_matrix(&a.source, seed)?;
        let embedded = embedded_for(&pts, &a.schemes, &a.scheme, seed)?;
        for &s in &a.schemes {
            let o = compute_ordering(s, m.pattern(), &embedded, &a.scheme.params(seed)).context("order")?;
            let p = m.pattern().permute(&o.row_perm, &o.col_perm).context("order")?;
            rows.push((s.name().into(), p.nnz(), score(&p).context("measure")?, bandwidth(&p)));
        }
    }
    println!("scheme,nnz,sigma,gamma,bandwidth");
    let mut csv = String::from("scheme,nnz,sigma,gamma,bandwidth\n");
    for (name, nnz, g, b) in &rows {
        let line = format!("{name},{nnz},{sigma},{g},{b}");
        println!("{line}");
        csv += &line;
        csv.push('\n');
    }
    if let Some(p) = &a.out {
        std::fs::write(p, csv).with_context(|| format!("write: cannot write {}", p.display()))?;
    }
    Ok(())
}

fn spy(a: SpyArgs, seed: u64) -> Result<()> {
    let pattern = match &a.matrix {
        Some(path) => read_matrix(path)?.pattern().clone(),
        None => {
            let (pts, m, _) = build_matrix(&a.source, seed)?;
            let embedded = embedded_for(&pts, &[a.scheme.scheme], &a.scheme, seed)?;
            let o = compute_ordering(a.scheme.scheme, m.pattern(), &embedded, &a.scheme.params(seed)).context("order")?;
            m.pattern().permute(&o.row_perm, &o.col_perm).context("order")?
        }
    };
    let roi = a.roi.as_ref().map(|v| Roi {
        row_lo: v[0],
        row_hi: v[1],
        col_lo: v[2],
        col_hi: v[3],
    });
    spy_image(&pattern, a.side, roi, &a.out).context("spy")?;
    println!("{}x{} image -> {}", a.side, a.side, a.out.display());
    Ok(())
}

fn bench(a: BenchArgs, seed: u64, workers: Vec<usize>) -> Result<()> {
    let (pts, m, _) = build_matrix(&a.source, seed)?;
    let embedded = embedded_for(&pts, &a.schemes, &a.scheme, seed)?;
    let cfg = SpmvBenchConfig {
        reps: a.reps,
        workers,
        k: a.source.k,
        cut: a.scheme.cut(),
        ordering: a.scheme.params(seed),
        include_flat: !a.hier_only,
    };
    let reports = bench_spmv(&m, &embedded, &a.schemes, &cfg).context("bench")?;
    let base = reports
        .iter()
        .find(|r| r.scheme == "scattered" && r.kernel == "flat" && r.workers == 1)
        .map(|r| r.throughput);
    println!("scheme,kernel,workers,multiply_ns,throughput,speedup,checksum");
    for r in &reports {
        let speedup = base.map_or(String::from("-"), |b| format!("{:.3}", r.throughput / b));
        println!(
            "{},{},{},{},{:.4e},{speedup},{:.12e}",
            r.scheme, r.kernel, r.workers, r.multiply_ns, r.throughput, r.checksum
        );
    }
    if let Some(p) = &a.out {
        append_csv(p, &reports).context("write")?;
    }
    if let Some(p) = &a.report {
        let meta = json!({
            "machine": machine_descriptor(),
            "n": m.n_rows(),
            "nnz": m.nnz(),
            "k": a.source.k,
            "seed": seed,
            "reps": a.reps,
            "reports": reports,
        });
        write_json(p, &meta).context("write")?;
    }
    Ok(())
}

fn tsne(a: TsneArgs, seed: u64) -> Result<()> {
    if a.reps == 0 {
        bail!("setup: reps must be positive");
    }
    let (pts, m, _) = build_matrix(&a.source, seed)?;
    let embedded = embedded_for(&pts, &[a.scheme.scheme], &a.scheme, seed)?;
    let layout = prepare_layout(&m, &embedded, a.scheme.scheme, &a.scheme.params(seed), a.scheme.cut()).context("order")?;
    if layout.ordering.row_perm != layout.ordering.col_perm {
        bail!("order: t-SNE needs one ordering for rows and columns");
    }
    let mut state = TsneAttraction::new(layout.hier).context("build")?;
    // map coordinates: a fixed seeded start, placed in matrix order
    let y0 = gen_gaussian_mixture(pts.n_points(), a.map_dim, 1, 0.0, 1e-2, seed).context("setup")?;
    let y = y0.permuted(&layout.ordering.row_perm);
    let mut times = Vec::with_capacity(a.reps);
    let mut forces = state.step(&y).context("run")?;
    for _ in 0..a.reps {
        let t = Instant::now();
        forces = state.step(&y).context("run")?;
        times.push(t.elapsed().as_nanos() as u64);
    }
    times.sort_unstable();
    let med = times[times.len() / 2].max(1);
    let original = forces.permuted(&layout.ordering.row_perm.inverted());
    let sum = checksum(original.coords());
    let line = format!(
        "{},{},{},{},{med},{:.4e},{sum:.12e}",
        a.scheme.scheme,
        m.n_rows(),
        m.nnz(),
        a.map_dim,
        m.nnz() as f64 * (a.map_dim + 1) as f64 / (med as f64 * 1e-9)
    );
    println!("scheme,n,nnz,map_dim,step_ns,throughput,checksum\n{line}");
    if let Some(p) = &a.out {
        std::fs::write(p, format!("scheme,n,nnz,map_dim,step_ns,throughput,checksum\n{line}\n"))
            .with_context(|| format!("write: cannot write {}", p.display()))?;
    }
    Ok(())
}

fn meanshift(a: MeanShiftArgs, seed: u64) -> Result<()> {
    let pts = load(&a.points, seed)?;
    let mut state = MeanShiftState::new(pts.clone(), pts, a.bandwidth, a.k, a.refresh).context("knn")?;
    if a.reorder {
        state = state.with_reorder(seed).context("embed")?;
    }
    let t = Instant::now();
    for _ in 0..a.iters {
        state = meanshift_step(state).context("run")?;
    }
    let ns = t.elapsed().as_nanos();
    let means = state.targets_in_original_order();
    println!(
        "{} iterations in {:.3} s, checksum {:.12e}",
        a.iters,
        ns as f64 * 1e-9,
        checksum(means.coords())
    );
    if let Some(p) = &a.out {
        write_fvecs(p, &means).context("write")?;
    }
    Ok(())
}
