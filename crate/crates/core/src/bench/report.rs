use std::fs::OpenOptions;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One timed configuration: a scheme, a kernel and a worker count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub machine: String,
    pub scheme: String,
    /// `hier` (blocked storage) or `flat` (row-major CSR).
    pub kernel: String,
    pub n: usize,
    pub nnz: usize,
    pub k: usize,
    pub order_ns: u64,
    pub build_ns: u64,
    /// Median time of one multiply.
    pub multiply_ns: u64,
    pub reps: usize,
    pub workers: usize,
    /// Nonzeros processed per second at the median time.
    pub throughput: f64,
    /// Position-weighted sum of the output in original target order.
    pub checksum: f64,
}

impl BenchReport {
    pub const CSV_HEADER: [&'static str; 13] = [
        "machine",
        "scheme",
        "kernel",
        "n",
        "nnz",
        "k",
        "order_ns",
        "build_ns",
        "multiply_ns",
        "reps",
        "workers",
        "throughput",
        "checksum",
    ];
}

/// Free-text description of the host.
pub fn machine_descriptor() -> String {
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    format!(
        "{}-{} {} hardware threads",
        std::env::consts::ARCH,
        std::env::consts::OS,
        workers
    )
}

/// Appends rows to a CSV file, writing the header first if the file is new or empty.
pub fn append_csv(path: impl AsRef<Path>, reports: &[BenchReport]) -> Result<()> {
    let file = OpenOptions::new().create(true).append(true).open(path.as_ref())?;
    let fresh = file.metadata()?.len() == 0;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for r in reports {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<BenchReport>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Parse {
            line: 0,
            reason: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_appends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let r = BenchReport {
            machine: "box, 4 cores".into(),
            scheme: "tree3".into(),
            kernel: "hier".into(),
            n: 10,
            nnz: 30,
            k: 3,
            order_ns: 1,
            build_ns: 2,
            multiply_ns: 3,
            reps: 5,
            workers: 1,
            throughput: 1e10,
            checksum: -0.125,
        };
        append_csv(&path, &[r.clone()]).unwrap();
        append_csv(&path, &[r.clone()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), BenchReport::CSV_HEADER.join(","));
        assert_eq!(read_csv(&path).unwrap(), vec![r.clone(), r]);
    }
}
