//! Matrix Market coordinate files (`real` and `pattern` fields).

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::{SparseMatrix, SparsePattern};

/// Field type declared in a Matrix Market header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmField {
    Real,
    Pattern,
}

/// Reads a coordinate-format file. Pattern files load with every value 1.0.
/// `symmetric` files are expanded to both triangles.
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<(SparseMatrix, MmField)> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        reason: "empty file".into(),
    })?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::Parse {
            line: 1,
            reason: format!("not a Matrix Market header: {header}"),
        });
    }
    if tokens[2] != "coordinate" {
        return Err(Error::Parse {
            line: 1,
            reason: format!("unsupported format {}", tokens[2]),
        });
    }
    let field = match tokens[3].as_str() {
        "real" | "double" | "integer" => MmField::Real,
        "pattern" => MmField::Pattern,
        other => {
            return Err(Error::Parse {
                line: 1,
                reason: format!("unsupported field {other}"),
            })
        }
    };
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => {
            return Err(Error::Parse {
                line: 1,
                reason: format!("unsupported symmetry {other}"),
            })
        }
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        let parse_usize = |s: &str| -> Result<usize> {
            s.parse().map_err(|e| Error::Parse {
                line: lineno,
                reason: format!("{e}"),
            })
        };
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(Error::Parse {
                        line: lineno,
                        reason: "expected `rows cols nnz`".into(),
                    });
                }
                let s = (
                    parse_usize(parts[0])?,
                    parse_usize(parts[1])?,
                    parse_usize(parts[2])?,
                );
                triplets.reserve(s.2);
                size = Some(s);
            }
            Some((rows, cols, _)) => {
                let want = if field == MmField::Pattern { 2 } else { 3 };
                if parts.len() < want {
                    return Err(Error::Parse {
                        line: lineno,
                        reason: format!("expected {want} fields"),
                    });
                }
                let (i, j) = (parse_usize(parts[0])?, parse_usize(parts[1])?);
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(Error::OutOfBounds {
                        row: i.wrapping_sub(1),
                        col: j.wrapping_sub(1),
                        n_rows: rows,
                        n_cols: cols,
                    });
                }
                let v = if field == MmField::Pattern {
                    1.0
                } else {
                    parts[2].parse::<f64>().map_err(|e| Error::Parse {
                        line: lineno,
                        reason: format!("{e}"),
                    })?
                };
                triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (rows, cols, nnz) = size.ok_or(Error::Parse {
        line: 0,
        reason: "missing size line".into(),
    })?;
    let expected = if symmetric {
        triplets.len()
    } else {
        nnz
    };
    if triplets.len() != expected {
        return Err(Error::Parse {
            line: 0,
            reason: format!("expected {nnz} entries, found {}", triplets.len()),
        });
    }
    Ok((SparseMatrix::from_coo(&triplets, rows, cols)?, field))
}

pub fn write_matrix_market<W: Write>(mut w: W, m: &SparseMatrix) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.n_rows(), m.n_cols(), m.nnz())?;
    for (r, c, v) in m.triplets() {
        // `{:e}` of an f64 prints the shortest roundtrip representation
        writeln!(w, "{} {} {:e}", r + 1, c + 1, v)?;
    }
    Ok(())
}

pub fn write_pattern_market<W: Write>(mut w: W, p: &SparsePattern) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate pattern general")?;
    writeln!(w, "{} {} {}", p.n_rows(), p.n_cols(), p.nnz())?;
    for (r, c) in p.entries() {
        writeln!(w, "{} {}", r + 1, c + 1)?;
    }
    Ok(())
}
