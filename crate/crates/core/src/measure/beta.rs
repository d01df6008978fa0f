//! Exhaustive patch-covering density for tiny matrices.
//!
//! A covering is a set of pairwise disjoint index rectangles containing every
//! nonzero; its score is `(1 / #patches) * nnz / total_area`. Shrinking a
//! patch to the bounding box of the nonzeros it holds never hurts, so the
//! search only considers such tight rectangles. Branch and bound picks a
//! patch for the first uncovered nonzero at each step and prunes with
//! `nnz / ((patches + 1) * (area + uncovered))`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Permutation, SparsePattern};

pub const MAX_BETA_CELLS: usize = 64;
pub const MAX_ORDERING_SIDE: usize = 5;

/// Half-open index rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Patch {
    pub row_lo: usize,
    pub row_hi: usize,
    pub col_lo: usize,
    pub col_hi: usize,
}

impl Patch {
    pub fn area(&self) -> usize {
        (self.row_hi - self.row_lo) * (self.col_hi - self.col_lo)
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        (self.row_lo..self.row_hi).contains(&r) && (self.col_lo..self.col_hi).contains(&c)
    }

    pub fn overlaps(&self, o: &Patch) -> bool {
        self.row_lo < o.row_hi && o.row_lo < self.row_hi && self.col_lo < o.col_hi && o.col_lo < self.col_hi
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PatchCovering {
    pub patches: Vec<Patch>,
}

impl PatchCovering {
    pub fn area(&self) -> usize {
        self.patches.iter().map(Patch::area).sum()
    }

    /// True if patches are pairwise disjoint and cover every nonzero of `p`.
    pub fn is_valid_for(&self, p: &SparsePattern) -> bool {
        let disjoint = self
            .patches
            .iter()
            .enumerate()
            .all(|(i, a)| self.patches[i + 1..].iter().all(|b| !a.overlaps(b)));
        disjoint && p.entries().all(|(r, c)| self.patches.iter().any(|b| b.contains(r, c)))
    }

    /// Covering score for a matrix with `nnz` nonzeros.
    pub fn score(&self, nnz: usize) -> f64 {
        nnz as f64 / (self.patches.len() as f64 * self.area() as f64)
    }
}

struct Rect {
    patch: Patch,
    cells: u64,
    nonzeros: u64,
    area: u32,
}

/// Maximum covering density of `p` and one covering attaining it.
pub fn beta_bruteforce(p: &SparsePattern) -> Result<(f64, PatchCovering)> {
    let (rows, cols) = (p.n_rows(), p.n_cols());
    if rows * cols > MAX_BETA_CELLS {
        return Err(Error::TooLarge(format!(
            "{rows}x{cols} exceeds {MAX_BETA_CELLS} cells"
        )));
    }
    if p.nnz() == 0 {
        return Err(Error::EmptyPattern);
    }
    let mask = pattern_mask(p);
    let (score, patches) = beta_of_mask(mask, rows, cols);
    Ok((score, PatchCovering { patches }))
}

fn pattern_mask(p: &SparsePattern) -> u64 {
    p.entries()
        .fold(0u64, |m, (r, c)| m | 1 << (r * p.n_cols() + c))
}

fn beta_of_mask(nz: u64, rows: usize, cols: usize) -> (f64, Vec<Patch>) {
    let nnz = nz.count_ones() as f64;
    let cell = |r: usize, c: usize| 1u64 << (r * cols + c);

    // tight rectangles, grouped by the nonzero cells they contain
    let mut rects = Vec::new();
    for r0 in 0..rows {
        for r1 in r0 + 1..=rows {
            for c0 in 0..cols {
                for c1 in c0 + 1..=cols {
                    let mut cells = 0u64;
                    for r in r0..r1 {
                        for c in c0..c1 {
                            cells |= cell(r, c);
                        }
                    }
                    let nonzeros = cells & nz;
                    if nonzeros == 0 {
                        continue;
                    }
                    let edge_hit = |rr: Option<usize>, cc: Option<usize>| {
                        let mut m = 0u64;
                        for r in r0..r1 {
                            for c in c0..c1 {
                                if rr.is_none_or(|x| x == r) && cc.is_none_or(|x| x == c) {
                                    m |= cell(r, c);
                                }
                            }
                        }
                        m & nz != 0
                    };
                    let tight = edge_hit(Some(r0), None)
                        && edge_hit(Some(r1 - 1), None)
                        && edge_hit(None, Some(c0))
                        && edge_hit(None, Some(c1 - 1));
                    if tight {
                        rects.push(Rect {
                            patch: Patch {
                                row_lo: r0,
                                row_hi: r1,
                                col_lo: c0,
                                col_hi: c1,
                            },
                            cells,
                            nonzeros,
                            area: ((r1 - r0) * (c1 - c0)) as u32,
                        });
                    }
                }
            }
        }
    }
    // larger rectangles first so good coverings are found early
    rects.sort_by(|a, b| b.area.cmp(&a.area).then(a.patch.row_lo.cmp(&b.patch.row_lo)));
    let mut by_cell: Vec<Vec<usize>> = vec![Vec::new(); rows * cols];
    for (i, r) in rects.iter().enumerate() {
        let mut m = r.nonzeros;
        while m != 0 {
            let bit = m.trailing_zeros() as usize;
            by_cell[bit].push(i);
            m &= m - 1;
        }
    }

    let mut search = Search {
        rects: &rects,
        by_cell: &by_cell,
        nnz,
        best: 0.0,
        best_set: Vec::new(),
        current: Vec::new(),
    };
    search.run(nz, 0, 0);
    let patches = search.best_set.iter().map(|&i| rects[i].patch).collect();
    (search.best, patches)
}

struct Search<'a> {
    rects: &'a [Rect],
    by_cell: &'a [Vec<usize>],
    nnz: f64,
    best: f64,
    best_set: Vec<usize>,
    current: Vec<usize>,
}

impl Search<'_> {
    fn run(&mut self, uncovered: u64, occupied: u64, area: u32) {
        let used = self.current.len() as f64;
        if uncovered == 0 {
            let score = self.nnz / (used * area as f64);
            if score > self.best {
                self.best = score;
                self.best_set = self.current.clone();
            }
            return;
        }
        let bound = self.nnz / ((used + 1.0) * (area + uncovered.count_ones()) as f64);
        if bound <= self.best * (1.0 + 1e-12) {
            return;
        }
        let first = uncovered.trailing_zeros() as usize;
        for &ri in &self.by_cell[first] {
            let r = &self.rects[ri];
            if r.cells & occupied != 0 {
                continue;
            }
            self.current.push(ri);
            self.run(uncovered & !r.nonzeros, occupied | r.cells, area + r.area);
            self.current.pop();
        }
    }
}

/// Exhaustive search over all row and column permutations for the ordering
/// of highest covering density. Returns `(row_perm, col_perm, beta)`.
pub fn best_ordering_bruteforce(p: &SparsePattern) -> Result<(Permutation, Permutation, f64)> {
    let (rows, cols) = (p.n_rows(), p.n_cols());
    if rows > MAX_ORDERING_SIDE || cols > MAX_ORDERING_SIDE {
        return Err(Error::TooLarge(format!(
            "{rows}x{cols} exceeds {MAX_ORDERING_SIDE}x{MAX_ORDERING_SIDE}"
        )));
    }
    if p.nnz() == 0 {
        return Err(Error::EmptyPattern);
    }
    let row_perms = all_permutations(rows);
    let col_perms = all_permutations(cols);
    let entries: Vec<(usize, usize)> = p.entries().collect();
    let mut memo: HashMap<u64, f64> = HashMap::new();
    let mut best: Option<(usize, usize, f64)> = None;
    for (ri, rp) in row_perms.iter().enumerate() {
        for (ci, cp) in col_perms.iter().enumerate() {
            let mask = entries
                .iter()
                .fold(0u64, |m, &(r, c)| m | 1 << (rp[r] * cols + cp[c]));
            let score = *memo
                .entry(mask)
                .or_insert_with(|| beta_of_mask(mask, rows, cols).0);
            if best.is_none_or(|(_, _, b)| score > b * (1.0 + 1e-12)) {
                best = Some((ri, ci, score));
            }
        }
    }
    let (ri, ci, score) = best.expect("at least one ordering");
    Ok((
        Permutation::from_forward(row_perms[ri].clone())?,
        Permutation::from_forward(col_perms[ci].clone())?,
        score,
    ))
}

/// All permutations of `0..n` in lexicographic order.
fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..n).collect();
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_enumerated() {
        assert_eq!(all_permutations(3).len(), 6);
        assert_eq!(all_permutations(1), vec![vec![0]]);
        assert_eq!(all_permutations(3)[1], vec![0, 2, 1]);
    }

    #[test]
    fn full_two_by_two() {
        let p = SparsePattern::from_entries(2, 2, [(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        let (b, cov) = beta_bruteforce(&p).unwrap();
        assert_eq!(b, 1.0);
        assert_eq!(cov.patches.len(), 1);
        assert_eq!(cov.area(), 4);
    }

    #[test]
    fn limits() {
        assert!(matches!(
            beta_bruteforce(&SparsePattern::empty(9, 8)),
            Err(Error::TooLarge(_))
        ));
        assert!(matches!(
            beta_bruteforce(&SparsePattern::empty(2, 2)),
            Err(Error::EmptyPattern)
        ));
        assert!(matches!(
            best_ordering_bruteforce(&SparsePattern::empty(6, 2)),
            Err(Error::TooLarge(_))
        ));
    }
}
