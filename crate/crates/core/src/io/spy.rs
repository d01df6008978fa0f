//! Sparsity-profile images as binary PGM (P5).
//!
//! Each pixel covers a rectangle of matrix cells; its gray level is
//! `255 - round(255 * density / peak density)`, so darker means denser and
//! an empty pattern renders all white.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::SparsePattern;

/// Half-open sub-rectangle of the matrix to render.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Roi {
    pub row_lo: usize,
    pub row_hi: usize,
    pub col_lo: usize,
    pub col_hi: usize,
}

impl Roi {
    pub fn full(p: &SparsePattern) -> Self {
        Self {
            row_lo: 0,
            row_hi: p.n_rows(),
            col_lo: 0,
            col_hi: p.n_cols(),
        }
    }
}

/// Gray levels of a `side x side` rendering, row-major.
pub fn spy_pixels(p: &SparsePattern, side: usize, roi: Option<Roi>) -> Result<Vec<u8>> {
    if side == 0 {
        return Err(Error::InvalidParameter("image side must be at least 1".into()));
    }
    let roi = roi.unwrap_or_else(|| Roi::full(p));
    if roi.row_lo > roi.row_hi || roi.col_lo > roi.col_hi || roi.row_hi > p.n_rows() || roi.col_hi > p.n_cols() {
        return Err(Error::InvalidParameter(format!("region {roi:?} outside the matrix")));
    }
    let (h, w) = (roi.row_hi - roi.row_lo, roi.col_hi - roi.col_lo);
    // pixel k covers [k * len / side, (k + 1) * len / side)
    let edge = |k: usize, len: usize| k * len / side;
    let pixel_of = |off: usize, len: usize| {
        // largest k with edge(k) <= off
        let mut k = (off * side) / len.max(1);
        while k + 1 < side && edge(k + 1, len) <= off {
            k += 1;
        }
        while k > 0 && edge(k, len) > off {
            k -= 1;
        }
        k
    };

    let mut counts = vec![0u64; side * side];
    for r in roi.row_lo..roi.row_hi {
        let pr = pixel_of(r - roi.row_lo, h);
        let row = p.row(r);
        let from = row.partition_point(|&c| (c as usize) < roi.col_lo);
        for &c in &row[from..] {
            let c = c as usize;
            if c >= roi.col_hi {
                break;
            }
            counts[pr * side + pixel_of(c - roi.col_lo, w)] += 1;
        }
    }
    let density: Vec<f64> = counts
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let (pr, pc) = (i / side, i % side);
            let area = (edge(pr + 1, h) - edge(pr, h)) * (edge(pc + 1, w) - edge(pc, w));
            if area == 0 {
                0.0
            } else {
                n as f64 / area as f64
            }
        })
        .collect();
    let peak = density.iter().copied().fold(0.0, f64::max);
    Ok(density
        .iter()
        .map(|&d| {
            if peak == 0.0 {
                255
            } else {
                255 - (255.0 * d / peak).round().min(255.0) as u8
            }
        })
        .collect())
}

pub fn write_pgm<W: Write>(mut w: W, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::SizeMismatch(format!(
            "{} pixels for a {width}x{height} image",
            pixels.len()
        )));
    }
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(pixels)?;
    w.flush()?;
    Ok(())
}

/// Renders `p` (or a region of it) to a PGM file.
pub fn spy_image(p: &SparsePattern, side: usize, roi: Option<Roi>, out: impl AsRef<Path>) -> Result<()> {
    let pixels = spy_pixels(p, side, roi)?;
    write_pgm(std::io::BufWriter::new(fs::File::create(out)?), side, side, &pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_is_dark_diagonal() {
        let p = SparsePattern::from_entries(4, 4, (0..4).map(|i| (i, i))).unwrap();
        let px = spy_pixels(&p, 4, None).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(px[r * 4 + c], if r == c { 0 } else { 255 });
            }
        }
        let half = spy_pixels(&p, 2, None).unwrap();
        assert_eq!(half, vec![0, 255, 255, 0]);
    }

    #[test]
    fn empty_is_white() {
        let px = spy_pixels(&SparsePattern::empty(10, 10), 3, None).unwrap();
        assert!(px.iter().all(|&v| v == 255));
    }

    #[test]
    fn roi_and_header() {
        let p = SparsePattern::from_entries(4, 4, [(3, 3)]).unwrap();
        let roi = Roi {
            row_lo: 2,
            row_hi: 4,
            col_lo: 2,
            col_hi: 4,
        };
        assert_eq!(spy_pixels(&p, 2, Some(roi)).unwrap(), vec![255, 255, 255, 0]);
        let mut buf = Vec::new();
        write_pgm(&mut buf, 2, 1, &[0, 255]).unwrap();
        assert_eq!(buf, b"P5\n2 1\n255\n\x00\xff");
    }
}
