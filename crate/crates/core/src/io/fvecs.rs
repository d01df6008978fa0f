//! `.fvecs`: repeated records of a little-endian `i32` dimension followed by
//! that many little-endian `f32` values.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian as LE, WriteBytesExt};

use crate::error::{Error, Result};
use crate::model::PointSet;

pub fn read_fvecs(path: impl AsRef<Path>) -> Result<PointSet> {
    parse_fvecs(&fs::read(path)?, None)
}

/// Reads at most `limit` records from the front of the file.
pub fn read_fvecs_prefix(path: impl AsRef<Path>, limit: usize) -> Result<PointSet> {
    parse_fvecs(&fs::read(path)?, Some(limit))
}

pub fn parse_fvecs(bytes: &[u8], limit: Option<usize>) -> Result<PointSet> {
    if bytes.is_empty() {
        return Err(Error::EmptyFile);
    }
    let mut dim = None;
    let mut coords = Vec::new();
    let mut offset = 0usize;
    let mut record = 0usize;
    while offset < bytes.len() && limit.is_none_or(|l| record < l) {
        if bytes.len() - offset < 4 {
            return Err(Error::MalformedRecord {
                offset: offset as u64,
                reason: "truncated dimension field".into(),
            });
        }
        let d = LE::read_i32(&bytes[offset..]);
        if d <= 0 {
            return Err(Error::MalformedRecord {
                offset: offset as u64,
                reason: format!("non-positive dimension {d}"),
            });
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(e) if e != d => {
                return Err(Error::InconsistentDim {
                    record,
                    expected: e,
                    got: d,
                })
            }
            _ => {}
        }
        let body = offset + 4;
        if bytes.len() - body < 4 * d {
            return Err(Error::MalformedRecord {
                offset: offset as u64,
                reason: format!("record needs {} bytes, {} left", 4 * d, bytes.len() - body),
            });
        }
        coords.extend(bytes[body..body + 4 * d].chunks_exact(4).map(|c| LE::read_f32(c) as f64));
        offset = body + 4 * d;
        record += 1;
    }
    let dim = dim.expect("at least one record");
    PointSet::new(record, dim, coords)
}

/// Writes `points` as single-precision records.
pub fn write_fvecs(path: impl AsRef<Path>, points: &PointSet) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    write_fvecs_to(&mut w, points)?;
    w.flush()?;
    Ok(())
}

pub fn write_fvecs_to<W: Write>(mut w: W, points: &PointSet) -> Result<()> {
    let dim = i32::try_from(points.dim())
        .map_err(|_| Error::InvalidParameter("dimension exceeds i32".into()))?;
    for p in points.iter() {
        w.write_i32::<LE>(dim)?;
        for &x in p {
            w.write_f32::<LE>(x as f32)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(vals: &[f32]) -> Vec<u8> {
        let mut b = (vals.len() as i32).to_le_bytes().to_vec();
        for v in vals {
            b.extend(v.to_le_bytes());
        }
        b
    }

    #[test]
    fn one_record() {
        let p = parse_fvecs(&record(&[1.0, 2.0]), None).unwrap();
        assert_eq!((p.n_points(), p.dim()), (1, 2));
        assert_eq!(p.coords(), &[1.0, 2.0]);
    }

    #[test]
    fn truncated() {
        let mut b = record(&[1.0, 2.0]);
        b.pop();
        assert!(matches!(parse_fvecs(&b, None), Err(Error::MalformedRecord { offset: 0, .. })));
        let mut b = record(&[1.0]);
        b.extend([3, 0]);
        assert!(matches!(parse_fvecs(&b, None), Err(Error::MalformedRecord { offset: 8, .. })));
    }

    #[test]
    fn inconsistent_and_empty() {
        let mut b = record(&[1.0, 2.0]);
        b.extend(record(&[1.0]));
        assert!(matches!(
            parse_fvecs(&b, None),
            Err(Error::InconsistentDim { record: 1, expected: 2, got: 1 })
        ));
        assert!(matches!(parse_fvecs(&[], None), Err(Error::EmptyFile)));
    }

    #[test]
    fn prefix() {
        let mut b = record(&[1.0]);
        b.extend(record(&[2.0]));
        b.extend(record(&[3.0]));
        assert_eq!(parse_fvecs(&b, Some(2)).unwrap().coords(), &[1.0, 2.0]);
    }
}
