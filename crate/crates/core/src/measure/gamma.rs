use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SparsePattern;

/// `exp(-x)` is exactly zero in f64 for `x` above roughly 745.13.
const EXP_UNDERFLOW: f64 = 746.0;

pub const DEFAULT_CUTOFF_RHO: f64 = 3.0;

/// Parameters of the Gaussian patch-density score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub sigma: f64,
    /// Truncation radius of the grid evaluator, in units of `sigma`.
    pub cutoff_rho: f64,
    /// Whether the `p == q` terms (each worth exactly 1) enter the sum.
    pub include_self_pairs: bool,
}

impl GammaParams {
    pub fn new(sigma: f64) -> Result<Self> {
        Self {
            sigma,
            cutoff_rho: DEFAULT_CUTOFF_RHO,
            include_self_pairs: true,
        }
        .validated()
    }

    pub fn with_cutoff(mut self, rho: f64) -> Result<Self> {
        self.cutoff_rho = rho;
        self.validated()
    }

    pub fn without_self_pairs(mut self) -> Self {
        self.include_self_pairs = false;
        self
    }

    fn validated(self) -> Result<Self> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.cutoff_rho >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff radius must be at least 1, got {}",
                self.cutoff_rho
            )));
        }
        Ok(self)
    }
}

/// Patch-density score by direct summation over all ordered pairs of
/// nonzero positions, `(1 / (sigma nnz)) sum exp(-|p - q|^2 / sigma^2)`.
///
/// Quadratic in `nnz`. Pairs whose kernel underflows to exactly zero are
/// skipped, which leaves the result unchanged.
pub fn gamma_exact(p: &SparsePattern, params: &GammaParams) -> Result<f64> {
    let nnz = p.nnz();
    if nnz == 0 {
        return Err(Error::EmptyPattern);
    }
    let inv_s2 = 1.0 / (params.sigma * params.sigma);
    let rows: Vec<f64> = p.entries().map(|(r, _)| r as f64).collect();
    let cols: Vec<f64> = p.col_idx().iter().map(|&c| c as f64).collect();
    let partial: Vec<f64> = (0..nnz)
        .into_par_iter()
        .map(|a| {
            let (ra, ca) = (rows[a], cols[a]);
            let mut s = 0.0;
            for b in a + 1..nnz {
                let dr = rows[b] - ra;
                let dr2 = dr * dr * inv_s2;
                if dr2 > EXP_UNDERFLOW {
                    // rows ascend, so every later entry underflows too
                    break;
                }
                let dc = cols[b] - ca;
                let x = dr2 + dc * dc * inv_s2;
                if x <= EXP_UNDERFLOW {
                    s += (-x).exp();
                }
            }
            s
        })
        .collect();
    let off_diagonal: f64 = partial.iter().sum();
    let self_pairs = if params.include_self_pairs { nnz as f64 } else { 0.0 };
    Ok((self_pairs + 2.0 * off_diagonal) / (params.sigma * nnz as f64))
}

/// Truncated patch-density score.
///
/// Nonzeros are binned into square cells of side `sigma`; only pairs in
/// cells at Chebyshev cell distance at most `ceil(cutoff_rho)` are summed,
/// so every dropped pair weighs less than `exp(-cutoff_rho^2)`.
pub fn gamma_grid(p: &SparsePattern, params: &GammaParams) -> Result<f64> {
    let nnz = p.nnz();
    if nnz == 0 {
        return Err(Error::EmptyPattern);
    }
    let sigma = params.sigma;
    let reach = params.cutoff_rho.ceil() as i64;

    let mut pts: Vec<(i64, i64, u32, u32)> = p
        .entries()
        .map(|(r, c)| {
            let cr = (r as f64 / sigma).floor() as i64;
            let cc = (c as f64 / sigma).floor() as i64;
            (cr, cc, r as u32, c as u32)
        })
        .collect();
    pts.sort_unstable();
    let mut cells: Vec<((i64, i64), usize, usize)> = Vec::new();
    for (i, &(cr, cc, _, _)) in pts.iter().enumerate() {
        match cells.last_mut() {
            Some((key, _, end)) if *key == (cr, cc) => *end = i + 1,
            _ => cells.push(((cr, cc), i, i + 1)),
        }
    }
    let lookup: HashMap<(i64, i64), usize> =
        cells.iter().enumerate().map(|(i, c)| (c.0, i)).collect();

    // separable kernel: exp(-(dr^2 + dc^2)/s^2) = w(dr) w(dc)
    let max_offset = ((reach + 1) as f64 * sigma).ceil() as usize + 2;
    let inv_s2 = 1.0 / (sigma * sigma);
    let table: Vec<f64> = (0..=max_offset)
        .map(|d| (-((d * d) as f64) * inv_s2).exp())
        .collect();
    let weight = |d: u32| -> f64 {
        match table.get(d as usize) {
            Some(&w) => w,
            None => (-(d as f64) * (d as f64) * inv_s2).exp(),
        }
    };

    let per_cell: Vec<f64> = cells
        .par_iter()
        .map(|&(key, start, end)| {
            let own = &pts[start..end];
            let mut s = 0.0;
            // pairs inside the cell, each unordered pair once
            for a in 0..own.len() {
                for b in a + 1..own.len() {
                    s += weight(own[a].2.abs_diff(own[b].2)) * weight(own[a].3.abs_diff(own[b].3));
                }
            }
            for dr in -reach..=reach {
                for dc in -reach..=reach {
                    let nk = (key.0 + dr, key.1 + dc);
                    if nk <= key {
                        continue;
                    }
                    let Some(&ci) = lookup.get(&nk) else { continue };
                    let (_, ns, ne) = cells[ci];
                    for a in own {
                        for b in &pts[ns..ne] {
                            s += weight(a.2.abs_diff(b.2)) * weight(a.3.abs_diff(b.3));
                        }
                    }
                }
            }
            s
        })
        .collect();
    let off_diagonal: f64 = per_cell.iter().sum();
    let self_pairs = if params.include_self_pairs { nnz as f64 } else { 0.0 };
    Ok((self_pairs + 2.0 * off_diagonal) / (sigma * nnz as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_nonzero() {
        let p = SparsePattern::from_entries(3, 3, [(1, 2)]).unwrap();
        let g = GammaParams::new(10.0).unwrap();
        assert!((gamma_exact(&p, &g).unwrap() - 0.1).abs() < 1e-15);
        assert!((gamma_grid(&p, &g).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(gamma_exact(&p, &g.without_self_pairs()).unwrap(), 0.0);
    }

    #[test]
    fn two_nonzeros_closed_form() {
        let p = SparsePattern::from_entries(4, 4, [(0, 0), (0, 1)]).unwrap();
        let g = GammaParams::new(10.0).unwrap();
        let want = (1.0 + (-0.01f64).exp()) / 10.0;
        assert!((gamma_exact(&p, &g).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.1990).abs() < 1e-4);
    }

    #[test]
    fn empty_pattern() {
        let p = SparsePattern::empty(2, 2);
        let g = GammaParams::new(1.0).unwrap();
        assert!(matches!(gamma_exact(&p, &g), Err(Error::EmptyPattern)));
        assert!(matches!(gamma_grid(&p, &g), Err(Error::EmptyPattern)));
    }

    #[test]
    fn params_validated() {
        assert!(GammaParams::new(0.0).is_err());
        assert!(GammaParams::new(1.0).unwrap().with_cutoff(0.5).is_err());
    }
}
