//! Adaptive 2^d-ary spatial partition trees (binary tree, quadtree, octree).

use crate::error::{Error, Result};
use crate::model::{Permutation, PointSet};

pub const DEFAULT_LEAF_CAPACITY: usize = 128;
pub const DEFAULT_MAX_DEPTH: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    /// Lower corner of the cell (unused axes are zero).
    pub lo: [f64; 3],
    /// Upper corner of the cell.
    pub hi: [f64; 3],
    pub depth: usize,
    /// Orthant code of this node within its parent (0 for the root).
    pub code: u8,
    /// Child node indices in ascending orthant-code order.
    pub children: Vec<usize>,
    /// Span `[start, end)` of this node's points in leaf order.
    pub start: usize,
    pub end: usize,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Nodes are stored in pre-order; node 0 is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionTree {
    dim: usize,
    nodes: Vec<TreeNode>,
    leaf_order: Permutation,
    leaf_capacity: usize,
    max_depth: usize,
}

impl PartitionTree {
    /// A single leaf spanning `n` points in their given order.
    pub fn trivial(n: usize) -> Self {
        Self::single_cluster(Permutation::identity(n))
    }

    /// A single leaf whose point order is `order`; used to carry a
    /// non-hierarchical ordering into blocked storage.
    pub fn single_cluster(order: Permutation) -> Self {
        let n = order.len();
        Self {
            dim: 1,
            nodes: vec![TreeNode {
                lo: [0.0; 3],
                hi: [0.0; 3],
                depth: 0,
                code: 0,
                children: Vec::new(),
                start: 0,
                end: n,
            }],
            leaf_order: order,
            leaf_capacity: n.max(1),
            max_depth: 1,
        }
    }

    /// Reassembles a tree from stored parts, checking the structural invariants.
    pub fn from_parts(
        dim: usize,
        nodes: Vec<TreeNode>,
        leaf_order: Permutation,
        leaf_capacity: usize,
        max_depth: usize,
    ) -> Result<Self> {
        let t = Self {
            dim,
            nodes,
            leaf_order,
            leaf_capacity,
            max_depth,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("invalid tree: {msg}")));
        let Some(root) = self.nodes.first() else {
            return bad("no nodes");
        };
        if root.start != 0 || root.end != self.leaf_order.len() {
            return bad("root does not span all points");
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.is_leaf() {
                continue;
            }
            let mut cursor = node.start;
            for &c in &node.children {
                if c <= i || c >= self.nodes.len() {
                    return bad("child index not in pre-order");
                }
                let child = &self.nodes[c];
                if child.start != cursor || child.depth != node.depth + 1 {
                    return bad("children do not partition their parent");
                }
                cursor = child.end;
            }
            if cursor != node.end {
                return bad("children do not cover their parent");
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn n_points(&self) -> usize {
        self.leaf_order.len()
    }

    pub fn leaf_order(&self) -> &Permutation {
        &self.leaf_order
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Deepest node depth actually present.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Node indices forming the clusters at `level`: nodes at that depth plus
    /// leaves that end above it, in leaf order.
    pub fn clusters_at_level(&self, level: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.depth == level || node.is_leaf() {
                out.push(i);
            } else {
                stack.extend(node.children.iter().rev());
            }
        }
        out
    }

    /// Cluster boundary offsets at `level`, from 0 to `n_points`.
    pub fn level_blocking(&self, level: usize) -> Result<Vec<usize>> {
        let depth = self.depth();
        if level > depth {
            return Err(Error::LevelOutOfRange { level, depth });
        }
        let mut offsets: Vec<usize> = self
            .clusters_at_level(level)
            .into_iter()
            .map(|i| self.nodes[i].start)
            .collect();
        offsets.push(self.n_points());
        Ok(offsets)
    }
}

/// Builds a tree over `points` (dimension 1 to 3).
///
/// The root cell is the bounding box grown to a cube around its center.
/// Cells split at their center into 2^dim orthants while they hold more than
/// `leaf_capacity` points and lie above `max_depth`; empty orthants are
/// dropped. Leaf order is a depth-first walk by ascending orthant code,
/// keeping original index order inside each leaf.
pub fn build_tree(points: &PointSet, leaf_capacity: usize, max_depth: usize) -> Result<PartitionTree> {
    let dim = points.dim();
    if !(1..=3).contains(&dim) {
        return Err(Error::DimTooHigh(dim));
    }
    if leaf_capacity == 0 || max_depth == 0 {
        return Err(Error::InvalidParameter(
            "leaf capacity and max depth must be positive".into(),
        ));
    }
    let mut lo = [0.0f64; 3];
    let mut hi = [0.0f64; 3];
    if points.n_points() > 0 {
        for a in 0..dim {
            lo[a] = f64::INFINITY;
            hi[a] = f64::NEG_INFINITY;
        }
        for p in points.iter() {
            for a in 0..dim {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
    }
    let side = (0..dim).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    for a in 0..dim {
        let c = 0.5 * (lo[a] + hi[a]);
        // rounding must not shrink the cube inside the bounding box
        lo[a] = lo[a].min(c - 0.5 * side);
        hi[a] = hi[a].max(c + 0.5 * side);
    }

    let mut builder = Builder {
        points,
        dim,
        leaf_capacity,
        max_depth,
        nodes: Vec::new(),
        order: Vec::with_capacity(points.n_points()),
    };
    let all: Vec<usize> = (0..points.n_points()).collect();
    builder.grow(&all, lo, hi, 0, 0);
    let Builder { nodes, order, .. } = builder;
    Ok(PartitionTree {
        dim,
        nodes,
        leaf_order: Permutation::from_order(order)?,
        leaf_capacity,
        max_depth,
    })
}

struct Builder<'a> {
    points: &'a PointSet,
    dim: usize,
    leaf_capacity: usize,
    max_depth: usize,
    nodes: Vec<TreeNode>,
    order: Vec<usize>,
}

impl Builder<'_> {
    fn grow(&mut self, idx: &[usize], lo: [f64; 3], hi: [f64; 3], depth: usize, code: u8) -> usize {
        let me = self.nodes.len();
        let start = self.order.len();
        self.nodes.push(TreeNode {
            lo,
            hi,
            depth,
            code,
            children: Vec::new(),
            start,
            end: start,
        });
        if idx.len() > self.leaf_capacity && depth < self.max_depth {
            let mut center = [0.0; 3];
            for a in 0..self.dim {
                center[a] = 0.5 * (lo[a] + hi[a]);
            }
            let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); 1 << self.dim];
            for &i in idx {
                let p = self.points.point(i);
                let mut c = 0usize;
                for a in 0..self.dim {
                    if p[a] >= center[a] {
                        c |= 1 << a;
                    }
                }
                buckets[c].push(i);
            }
            let mut children = Vec::new();
            for (c, bucket) in buckets.iter().enumerate() {
                if bucket.is_empty() {
                    continue;
                }
                let (mut clo, mut chi) = (lo, hi);
                for a in 0..self.dim {
                    if c & (1 << a) != 0 {
                        clo[a] = center[a];
                    } else {
                        chi[a] = center[a];
                    }
                }
                children.push(self.grow(bucket, clo, chi, depth + 1, c as u8));
            }
            self.nodes[me].children = children;
        } else {
            self.order.extend_from_slice(idx);
        }
        self.nodes[me].end = self.order.len();
        me
    }
}
