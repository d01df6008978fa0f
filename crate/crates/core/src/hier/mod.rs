//! Multi-level blocked storage aligned to row and column partition trees.
//!
//! Level 0 holds the root block (row root x column root). A block at level
//! `l` pairs a row cluster with a column cluster of that level; its children
//! are the nonzero pairs of their child clusters at `l + 1` (a leaf cluster
//! stands in for itself). Blocks stop refining at the cut level, or earlier
//! when both clusters are tree leaves, and become leaf blocks. Leaf blocks
//! hold coordinate lists with 16-bit local indices, sorted row-major, in one
//! contiguous arena laid out in traversal order.
//!
//! Children of a block are stored contiguously on the next level, ordered
//! by (row cluster, column cluster) in tree order, so a depth-first walk of
//! the block hierarchy reads the leaf arena front to back.

mod dump;

pub use dump::{read_hbm, write_hbm, HBM_MAGIC};

use crate::error::{Error, Result};
use crate::model::SparseMatrix;
use crate::ordering::PartitionTree;

pub const MAX_LOCAL_SPAN: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutLevel {
    /// Shallowest level at which every cluster fits 16-bit local indices.
    Auto,
    Fixed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    /// Children occupy `first..first + count` on the next level.
    Internal { first: usize, count: usize },
    /// Index into the leaf block table.
    Leaf(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockDesc {
    pub row_node: usize,
    pub col_node: usize,
    pub kind: BlockKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LeafBlock {
    pub row_offset: usize,
    pub col_offset: usize,
    pub row_span: usize,
    pub col_span: usize,
    /// Entry range `[start, end)` in the arena.
    pub start: usize,
    pub end: usize,
}

impl LeafBlock {
    pub fn nnz(&self) -> usize {
        self.end - self.start
    }
}

/// Contiguous row range owned by one parallel task, with the leaf blocks
/// that write into it in traversal order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct RowUnit {
    pub start: usize,
    pub end: usize,
    pub blocks: Vec<usize>,
}

/// Row runs of every leaf block, derived from the local row indices so the
/// multiply kernel reads only column indices and values. Runs of leaf `b`
/// are `ptr[b]..ptr[b + 1]`; each ends at `end` entries past the block start.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct RunIndex {
    ptr: Vec<usize>,
    rows: Vec<u16>,
    ends: Vec<u32>,
}

impl RunIndex {
    fn new(leaves: &[LeafBlock], local_rows: &[u16]) -> Self {
        let mut idx = RunIndex {
            ptr: Vec::with_capacity(leaves.len() + 1),
            ..Default::default()
        };
        idx.ptr.push(0);
        for b in leaves {
            let rows = &local_rows[b.start..b.end];
            for (k, &r) in rows.iter().enumerate() {
                if rows.get(k + 1) != Some(&r) {
                    idx.rows.push(r);
                    idx.ends.push((k + 1) as u32);
                }
            }
            idx.ptr.push(idx.rows.len());
        }
        idx
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierBlockMatrix {
    n_rows: usize,
    n_cols: usize,
    cut_level: usize,
    row_tree: PartitionTree,
    col_tree: PartitionTree,
    levels: Vec<Vec<BlockDesc>>,
    leaves: Vec<LeafBlock>,
    local_rows: Vec<u16>,
    local_cols: Vec<u16>,
    values: Vec<f64>,
    units: Vec<RowUnit>,
    runs: RunIndex,
    row_layout: u64,
    col_layout: u64,
}

/// Builds the hierarchy for `m`, which must already be permuted into the
/// trees' leaf orders.
pub fn build_hier(
    m: &SparseMatrix,
    row_tree: &PartitionTree,
    col_tree: &PartitionTree,
    cut: CutLevel,
) -> Result<HierBlockMatrix> {
    if row_tree.n_points() != m.n_rows() {
        return Err(Error::SpanMismatch {
            tree: row_tree.n_points(),
            matrix: m.n_rows(),
        });
    }
    if col_tree.n_points() != m.n_cols() {
        return Err(Error::SpanMismatch {
            tree: col_tree.n_points(),
            matrix: m.n_cols(),
        });
    }
    let cut_level = match cut {
        CutLevel::Fixed(l) => l,
        CutLevel::Auto => auto_cut(row_tree, col_tree),
    };
    for tree in [row_tree, col_tree] {
        for c in tree.clusters_at_level(cut_level) {
            let span = tree.nodes()[c].len();
            if span > MAX_LOCAL_SPAN {
                return Err(Error::LocalIndexOverflow { span });
            }
        }
    }

    let row_of: Vec<u32> = m.pattern().entries().map(|(r, _)| r as u32).collect();
    let mut b = Builder {
        m,
        row_of: &row_of,
        row_tree,
        col_tree,
        cut_level,
        levels: Vec::new(),
        leaves: Vec::new(),
        local_rows: Vec::with_capacity(m.nnz()),
        local_cols: Vec::with_capacity(m.nnz()),
        values: Vec::with_capacity(m.nnz()),
    };
    if m.nnz() > 0 {
        let all: Vec<usize> = (0..m.nnz()).collect();
        let root = b.make_block(0, 0, 0, all);
        b.levels[0].push(root);
    }
    let Builder {
        levels,
        leaves,
        local_rows,
        local_cols,
        values,
        ..
    } = b;
    let units = row_units(row_tree, cut_level, &leaves);
    let runs = RunIndex::new(&leaves, &local_rows);
    Ok(HierBlockMatrix {
        n_rows: m.n_rows(),
        n_cols: m.n_cols(),
        cut_level,
        row_tree: row_tree.clone(),
        col_tree: col_tree.clone(),
        levels,
        leaves,
        local_rows,
        local_cols,
        values,
        units,
        runs,
        row_layout: row_tree.leaf_order().layout_tag(),
        col_layout: col_tree.leaf_order().layout_tag(),
    })
}

fn auto_cut(row_tree: &PartitionTree, col_tree: &PartitionTree) -> usize {
    let fits = |t: &PartitionTree, l: usize| {
        t.clusters_at_level(l)
            .into_iter()
            .all(|c| t.nodes()[c].len() <= MAX_LOCAL_SPAN)
    };
    let deepest = row_tree.depth().max(col_tree.depth());
    (0..=deepest)
        .find(|&l| fits(row_tree, l) && fits(col_tree, l))
        .unwrap_or(deepest)
}

fn row_units(row_tree: &PartitionTree, cut_level: usize, leaves: &[LeafBlock]) -> Vec<RowUnit> {
    let mut units: Vec<RowUnit> = row_tree
        .clusters_at_level(cut_level)
        .into_iter()
        .map(|c| {
            let n = &row_tree.nodes()[c];
            RowUnit {
                start: n.start,
                end: n.end,
                blocks: Vec::new(),
            }
        })
        .collect();
    for (i, leaf) in leaves.iter().enumerate() {
        let u = units.partition_point(|u| u.end <= leaf.row_offset);
        debug_assert!(units[u].start <= leaf.row_offset && leaf.row_offset + leaf.row_span <= units[u].end);
        units[u].blocks.push(i);
    }
    units
}

struct Builder<'a> {
    m: &'a SparseMatrix,
    row_of: &'a [u32],
    row_tree: &'a PartitionTree,
    col_tree: &'a PartitionTree,
    cut_level: usize,
    levels: Vec<Vec<BlockDesc>>,
    leaves: Vec<LeafBlock>,
    local_rows: Vec<u16>,
    local_cols: Vec<u16>,
    values: Vec<f64>,
}

impl Builder<'_> {
    /// Creates the block for (`rn`, `cn`) at `level` over the given entry
    /// positions (row-major) and returns its descriptor. Children are
    /// appended to `levels[level + 1]` before the caller stores this block.
    fn make_block(&mut self, level: usize, rn: usize, cn: usize, entries: Vec<usize>) -> BlockDesc {
        if self.levels.len() <= level {
            self.levels.resize_with(level + 1, Vec::new);
        }
        let rnode = &self.row_tree.nodes()[rn];
        let cnode = &self.col_tree.nodes()[cn];
        if level >= self.cut_level || (rnode.is_leaf() && cnode.is_leaf()) {
            let leaf = LeafBlock {
                row_offset: rnode.start,
                col_offset: cnode.start,
                row_span: rnode.len(),
                col_span: cnode.len(),
                start: self.values.len(),
                end: self.values.len() + entries.len(),
            };
            let cols = self.m.pattern().col_idx();
            for &e in &entries {
                self.local_rows.push((self.row_of[e] as usize - leaf.row_offset) as u16);
                self.local_cols.push((cols[e] as usize - leaf.col_offset) as u16);
                self.values.push(self.m.values()[e]);
            }
            self.leaves.push(leaf);
            return BlockDesc {
                row_node: rn,
                col_node: cn,
                kind: BlockKind::Leaf(self.leaves.len() - 1),
            };
        }

        let row_kids: Vec<usize> = if rnode.is_leaf() {
            vec![rn]
        } else {
            rnode.children.clone()
        };
        let col_kids: Vec<usize> = if cnode.is_leaf() {
            vec![cn]
        } else {
            cnode.children.clone()
        };
        let row_starts: Vec<usize> = row_kids.iter().map(|&k| self.row_tree.nodes()[k].start).collect();
        let col_starts: Vec<usize> = col_kids.iter().map(|&k| self.col_tree.nodes()[k].start).collect();
        let cols = self.m.pattern().col_idx();
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); row_kids.len() * col_kids.len()];
        for e in entries {
            let r = self.row_of[e] as usize;
            let c = cols[e] as usize;
            let ri = row_starts.partition_point(|&s| s <= r) - 1;
            let ci = col_starts.partition_point(|&s| s <= c) - 1;
            buckets[ri * col_kids.len() + ci].push(e);
        }

        // children are built depth-first, then stored contiguously
        let mut kids = Vec::new();
        for (bi, bucket) in buckets.into_iter().enumerate() {
            if bucket.is_empty() {
                continue;
            }
            let (ri, ci) = (bi / col_kids.len(), bi % col_kids.len());
            kids.push(self.make_block(level + 1, row_kids[ri], col_kids[ci], bucket));
        }
        let first = self.levels[level + 1].len();
        let count = kids.len();
        self.levels[level + 1].extend(kids);
        BlockDesc {
            row_node: rn,
            col_node: cn,
            kind: BlockKind::Internal { first, count },
        }
    }
}

impl HierBlockMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn cut_level(&self) -> usize {
        self.cut_level
    }

    pub fn row_tree(&self) -> &PartitionTree {
        &self.row_tree
    }

    pub fn col_tree(&self) -> &PartitionTree {
        &self.col_tree
    }

    pub fn levels(&self) -> &[Vec<BlockDesc>] {
        &self.levels
    }

    pub fn leaf_blocks(&self) -> &[LeafBlock] {
        &self.leaves
    }

    /// Values in arena order (leaf blocks in traversal order, row-major inside).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn local_rows(&self) -> &[u16] {
        &self.local_rows
    }

    pub fn local_cols(&self) -> &[u16] {
        &self.local_cols
    }

    pub(crate) fn units(&self) -> &[RowUnit] {
        &self.units
    }

    /// Tag of the layout expected for output (potential) vectors.
    pub fn row_layout(&self) -> u64 {
        self.row_layout
    }

    /// Tag of the layout expected for input (charge) vectors.
    pub fn col_layout(&self) -> u64 {
        self.col_layout
    }

    /// Global `(row, col, value)` for every stored entry, in arena order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.leaves.iter().flat_map(move |b| {
            (b.start..b.end).map(move |k| {
                (
                    b.row_offset + self.local_rows[k] as usize,
                    b.col_offset + self.local_cols[k] as usize,
                    self.values[k],
                )
            })
        })
    }

    /// Back to a canonical flat matrix.
    pub fn flatten(&self) -> SparseMatrix {
        let t: Vec<(usize, usize, f64)> = self.triplets().collect();
        SparseMatrix::from_coo(&t, self.n_rows, self.n_cols)
            .expect("stored blocks are disjoint, in bounds and finite")
    }

    /// Replaces every value by `f(row, col, old)`; the pattern is untouched.
    ///
    /// On a non-finite result the error names the entry and the values
    /// visited before it have already been replaced.
    pub fn update_values<F>(&mut self, f: F) -> Result<usize>
    where
        F: Fn(usize, usize, f64) -> f64,
    {
        for b in &self.leaves {
            for k in b.start..b.end {
                let (r, c) = (
                    b.row_offset + self.local_rows[k] as usize,
                    b.col_offset + self.local_cols[k] as usize,
                );
                let v = f(r, c, self.values[k]);
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue { row: r, col: c });
                }
                self.values[k] = v;
            }
        }
        Ok(self.values.len())
    }

    /// Sets every value to `f(row, col, base[k])` where `base` is aligned
    /// with [`values`](Self::values). Leaf blocks are processed in parallel
    /// on the current rayon pool; `f` must be pure.
    pub fn update_values_from<F>(&mut self, base: &[f64], f: F) -> Result<usize>
    where
        F: Fn(usize, usize, f64) -> f64 + Sync,
    {
        use rayon::prelude::*;
        if base.len() != self.values.len() {
            return Err(Error::SizeMismatch(format!(
                "{} base values for {} entries",
                base.len(),
                self.values.len()
            )));
        }
        let mut slices = Vec::with_capacity(self.leaves.len());
        let mut rest: &mut [f64] = &mut self.values;
        for b in &self.leaves {
            let (head, tail) = rest.split_at_mut(b.nnz());
            slices.push(head);
            rest = tail;
        }
        let (rows, cols) = (&self.local_rows, &self.local_cols);
        let failure = self
            .leaves
            .par_iter()
            .zip(slices.into_par_iter())
            .map(|(b, out)| {
                for (off, slot) in out.iter_mut().enumerate() {
                    let k = b.start + off;
                    let (r, c) = (b.row_offset + rows[k] as usize, b.col_offset + cols[k] as usize);
                    let v = f(r, c, base[k]);
                    if !v.is_finite() {
                        return Some((r, c));
                    }
                    *slot = v;
                }
                None
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .next();
        match failure {
            Some((row, col)) => Err(Error::NonFiniteValue { row, col }),
            None => Ok(self.values.len()),
        }
    }

    /// Number of blocks stored on each level.
    pub fn blocks_per_level(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }

    /// `y[row_offset + lr] += v * x[col_offset + lc]` over one leaf block,
    /// with `y` already offset so that index 0 is row `y_base`.
    #[inline]
    pub(crate) fn leaf_multiply_add(&self, leaf: usize, x: &[f64], y: &mut [f64], y_base: usize) {
        let b = &self.leaves[leaf];
        if b.start == b.end {
            return;
        }
        let xs = &x[b.col_offset..b.col_offset + b.col_span];
        let ys = &mut y[b.row_offset - y_base..b.row_offset - y_base + b.row_span];
        let cols = &self.local_cols[b.start..b.end];
        let vals = &self.values[b.start..b.end];
        let runs = self.runs.ptr[leaf]..self.runs.ptr[leaf + 1];
        let mut s = 0;
        for (&r, &e) in self.runs.rows[runs.clone()].iter().zip(&self.runs.ends[runs]) {
            let e = e as usize;
            // SAFETY: local columns are below col_span == xs.len(), checked
            // when the block was built or loaded.
            ys[r as usize] += unsafe { dot_gather(&cols[s..e], &vals[s..e], xs) };
            s = e;
        }
    }

    /// Depth-first descent from the root block, calling `visit` on each
    /// leaf block in traversal order.
    pub(crate) fn descend<F: FnMut(usize)>(&self, mut visit: F) {
        if let Some(root) = self.levels.first().and_then(|l| l.first()) {
            self.descend_from(0, root, &mut visit);
        }
    }

    fn descend_from<F: FnMut(usize)>(&self, level: usize, block: &BlockDesc, visit: &mut F) {
        match block.kind {
            BlockKind::Leaf(i) => visit(i),
            BlockKind::Internal { first, count } => {
                for child in &self.levels[level + 1][first..first + count] {
                    self.descend_from(level + 1, child, visit);
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_raw_parts(
        n_rows: usize,
        n_cols: usize,
        cut_level: usize,
        row_tree: PartitionTree,
        col_tree: PartitionTree,
        levels: Vec<Vec<BlockDesc>>,
        leaves: Vec<LeafBlock>,
        local_rows: Vec<u16>,
        local_cols: Vec<u16>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("invalid block hierarchy: {msg}")));
        if row_tree.n_points() != n_rows || col_tree.n_points() != n_cols {
            return bad("tree spans do not match dimensions");
        }
        if local_rows.len() != values.len() || local_cols.len() != values.len() {
            return bad("arena arrays differ in length");
        }
        let mut cursor = 0;
        for b in &leaves {
            if b.start != cursor || b.end < b.start || b.end > values.len() {
                return bad("leaf blocks do not tile the arena");
            }
            if b.row_offset + b.row_span > n_rows || b.col_offset + b.col_span > n_cols {
                return bad("leaf block out of bounds");
            }
            for k in b.start..b.end {
                if local_rows[k] as usize >= b.row_span || local_cols[k] as usize >= b.col_span {
                    return bad("local index outside its block");
                }
            }
            cursor = b.end;
        }
        if cursor != values.len() {
            return bad("arena has trailing entries");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return bad("non-finite value");
        }
        for (l, level) in levels.iter().enumerate() {
            for d in level {
                match d.kind {
                    BlockKind::Leaf(i) if i >= leaves.len() => return bad("leaf index out of range"),
                    BlockKind::Internal { first, count }
                        if levels.get(l + 1).is_none_or(|next| first + count > next.len()) =>
                    {
                        return bad("child range out of range")
                    }
                    _ => {}
                }
            }
        }
        let units = row_units(&row_tree, cut_level, &leaves);
        let runs = RunIndex::new(&leaves, &local_rows);
        Ok(Self {
            n_rows,
            n_cols,
            cut_level,
            row_layout: row_tree.leaf_order().layout_tag(),
            col_layout: col_tree.leaf_order().layout_tag(),
            row_tree,
            col_tree,
            levels,
            leaves,
            local_rows,
            local_cols,
            values,
            units,
            runs,
        })
    }
}

/// `sum_k vals[k] * x[idx[k]]` with four interleaved partial sums, combined
/// as `(s0 + s1) + (s2 + s3)`. Every kernel uses this one summation order.
///
/// # Safety
/// Every index must be below `x.len()`.
#[inline]
pub(crate) unsafe fn dot_gather<I: Copy + Into<u64>>(idx: &[I], vals: &[f64], x: &[f64]) -> f64 {
    debug_assert_eq!(idx.len(), vals.len());
    debug_assert!(idx.iter().all(|&i| (i.into() as usize) < x.len()));
    let at = |i: I| unsafe { *x.get_unchecked(i.into() as usize) };
    let mut acc = [0.0f64; 4];
    let mut ic = idx.chunks_exact(4);
    let mut vc = vals.chunks_exact(4);
    for (i4, v4) in (&mut ic).zip(&mut vc) {
        acc[0] += v4[0] * at(i4[0]);
        acc[1] += v4[1] * at(i4[1]);
        acc[2] += v4[2] * at(i4[2]);
        acc[3] += v4[3] * at(i4[3]);
    }
    for (l, (&i, &v)) in ic.remainder().iter().zip(vc.remainder()).enumerate() {
        acc[l] += v * at(i);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SparsePattern;

    #[test]
    fn flat_case_is_single_leaf() {
        let m = SparseMatrix::from_coo(&[(0, 1, 2.0), (1, 0, 3.0), (2, 2, 4.0)], 3, 3).unwrap();
        let t = PartitionTree::trivial(3);
        let h = build_hier(&m, &t, &t, CutLevel::Fixed(1)).unwrap();
        assert_eq!(h.leaf_blocks().len(), 1);
        assert_eq!(h.blocks_per_level(), vec![1]);
        assert_eq!(h.flatten(), m);
    }

    #[test]
    fn span_mismatch() {
        let m = SparseMatrix::filled(SparsePattern::empty(3, 3), 1.0).unwrap();
        let t = PartitionTree::trivial(4);
        let t3 = PartitionTree::trivial(3);
        assert!(matches!(
            build_hier(&m, &t, &t3, CutLevel::Auto),
            Err(Error::SpanMismatch { .. })
        ));
    }

    #[test]
    fn local_index_overflow() {
        let n = MAX_LOCAL_SPAN + 1;
        let m = SparseMatrix::filled(SparsePattern::empty(n, 1), 1.0).unwrap();
        let (rt, ct) = (PartitionTree::trivial(n), PartitionTree::trivial(1));
        assert!(matches!(
            build_hier(&m, &rt, &ct, CutLevel::Fixed(0)),
            Err(Error::LocalIndexOverflow { .. })
        ));
    }

    #[test]
    fn empty_matrix_has_no_blocks() {
        let m = SparseMatrix::filled(SparsePattern::empty(2, 2), 1.0).unwrap();
        let t = PartitionTree::trivial(2);
        let h = build_hier(&m, &t, &t, CutLevel::Auto).unwrap();
        assert_eq!(h.nnz(), 0);
        assert_eq!(h.flatten(), m);
    }

    #[test]
    fn update_rejects_non_finite() {
        let m = SparseMatrix::from_coo(&[(0, 0, 1.0)], 1, 1).unwrap();
        let t = PartitionTree::trivial(1);
        let mut h = build_hier(&m, &t, &t, CutLevel::Auto).unwrap();
        assert!(matches!(
            h.update_values(|_, _, _| f64::INFINITY),
            Err(Error::NonFiniteValue { row: 0, col: 0 })
        ));
        let base = h.values().to_vec();
        assert!(h.update_values_from(&base, |_, _, _| f64::NAN).is_err());
    }
}
