//! Reverse Cuthill-McKee.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::knn::symmetrize;
use crate::model::{Permutation, SparsePattern};

/// Reverse Cuthill-McKee ordering of a square pattern.
///
/// The pattern is symmetrized and its diagonal ignored. Components are laid
/// out one after another in ascending order of their smallest vertex; each
/// starts from a pseudo-peripheral vertex, expands breadth-first visiting
/// neighbors by ascending degree then index, and is reversed.
pub fn order_rcm(p: &SparsePattern) -> Result<Permutation> {
    if !p.is_square() {
        return Err(Error::NotSquare {
            n_rows: p.n_rows(),
            n_cols: p.n_cols(),
        });
    }
    let n = p.n_rows();
    let graph = Adjacency::new(&symmetrize(p)?);
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut scratch = Bfs::new(n);
    for root in 0..n {
        if placed[root] {
            continue;
        }
        let start = pseudo_peripheral(&graph, root, &mut scratch);
        let begin = order.len();
        cuthill_mckee(&graph, start, &mut placed, &mut order);
        order[begin..].reverse();
    }
    Permutation::from_order(order)
}

struct Adjacency {
    ptr: Vec<usize>,
    adj: Vec<u32>,
}

impl Adjacency {
    fn new(sym: &SparsePattern) -> Self {
        let n = sym.n_rows();
        let mut ptr = Vec::with_capacity(n + 1);
        ptr.push(0);
        let mut adj = Vec::with_capacity(sym.nnz());
        for i in 0..n {
            adj.extend(sym.row(i).iter().copied().filter(|&j| j as usize != i));
            ptr.push(adj.len());
        }
        Self { ptr, adj }
    }

    fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[self.ptr[v]..self.ptr[v + 1]]
    }

    fn degree(&self, v: usize) -> usize {
        self.ptr[v + 1] - self.ptr[v]
    }
}

struct Bfs {
    level: Vec<usize>,
    touched: Vec<usize>,
}

impl Bfs {
    fn new(n: usize) -> Self {
        Self {
            level: vec![usize::MAX; n],
            touched: Vec::new(),
        }
    }

    /// Level structure rooted at `root`; returns (eccentricity, last level).
    fn run(&mut self, g: &Adjacency, root: usize) -> (usize, Vec<usize>) {
        for &v in &self.touched {
            self.level[v] = usize::MAX;
        }
        self.touched.clear();
        let mut queue = VecDeque::new();
        self.level[root] = 0;
        self.touched.push(root);
        queue.push_back(root);
        let mut depth = 0;
        while let Some(v) = queue.pop_front() {
            depth = self.level[v];
            for &w in g.neighbors(v) {
                let w = w as usize;
                if self.level[w] == usize::MAX {
                    self.level[w] = self.level[v] + 1;
                    self.touched.push(w);
                    queue.push_back(w);
                }
            }
        }
        let last = self
            .touched
            .iter()
            .copied()
            .filter(|&v| self.level[v] == depth)
            .collect();
        (depth, last)
    }
}

/// George-Liu pseudo-peripheral vertex search starting from `root`.
fn pseudo_peripheral(g: &Adjacency, root: usize, bfs: &mut Bfs) -> usize {
    let mut current = root;
    let (mut ecc, mut last) = bfs.run(g, current);
    loop {
        let candidate = last
            .iter()
            .copied()
            .min_by_key(|&v| (g.degree(v), v))
            .unwrap_or(current);
        if candidate == current {
            return current;
        }
        let (cand_ecc, cand_last) = bfs.run(g, candidate);
        if cand_ecc <= ecc {
            return current;
        }
        current = candidate;
        ecc = cand_ecc;
        last = cand_last;
    }
}

fn cuthill_mckee(g: &Adjacency, start: usize, placed: &mut [bool], order: &mut Vec<usize>) {
    let mut head = order.len();
    placed[start] = true;
    order.push(start);
    let mut fresh: Vec<usize> = Vec::new();
    while head < order.len() {
        let v = order[head];
        head += 1;
        fresh.clear();
        for &w in g.neighbors(v) {
            let w = w as usize;
            if !placed[w] {
                placed[w] = true;
                fresh.push(w);
            }
        }
        fresh.sort_unstable_by_key(|&w| (g.degree(w), w));
        order.extend_from_slice(&fresh);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::bandwidth;

    #[test]
    fn tridiagonal_stays_banded() {
        let n = 6;
        let entries = (0..n).flat_map(|i: usize| {
            [i.checked_sub(1), Some(i), (i + 1 < n).then_some(i + 1)]
                .into_iter()
                .flatten()
                .map(move |j| (i, j))
        });
        let p = SparsePattern::from_entries(n, n, entries).unwrap();
        let perm = order_rcm(&p).unwrap();
        assert!(bandwidth(&p.permute(&perm, &perm).unwrap()) <= 1);
    }

    #[test]
    fn not_square() {
        assert!(order_rcm(&SparsePattern::empty(2, 3)).is_err());
    }

    #[test]
    fn isolated_vertices() {
        let p = SparsePattern::empty(3, 3);
        assert!(order_rcm(&p).unwrap().is_identity());
    }
}
