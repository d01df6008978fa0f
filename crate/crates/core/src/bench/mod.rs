//! Pipeline orchestration and SpMV benchmarking with structured reports.

mod pipeline;
mod report;
mod spmv;

pub use pipeline::{
    embed_points, interaction_matrix, load_points, run_pipeline, Phase, PhaseTimings, PipelineConfig,
    PipelineError, PipelineReport, PipelineResult, PointSource,
};
pub use report::{append_csv, machine_descriptor, read_csv, BenchReport};
pub use spmv::{
    bench_charges, bench_spmv, checksum, flat_throughput, prepare_layout, time_median, SchemeLayout,
    SpmvBenchConfig, CHECKSUM_RTOL,
};
