//! `HBM1` binary dump of a [`HierBlockMatrix`].
//!
//! All integers and floats are little-endian. Layout:
//!
//! ```text
//! magic        4 bytes  "HBM1"
//! n_rows       u64
//! n_cols       u64
//! nnz          u64
//! n_levels     u64      block levels, root level included
//! cut_level    u64
//! row tree, then column tree:
//!   dim            u32
//!   leaf_capacity  u64
//!   max_depth      u64
//!   n_points       u64
//!   leaf order     n_points x u64   (forward map)
//!   n_nodes        u64
//!   per node, pre-order:
//!     depth u32, code u8, start u64, end u64, lo 3 x f64, hi 3 x f64,
//!     n_children u32, children n_children x u64
//! per level:
//!   n_blocks     u64
//!   per block: row_node u64, col_node u64, kind u8 (0 internal, 1 leaf),
//!              a u64, b u64   (internal: first child, child count;
//!                              leaf: leaf block index, 0)
//! n_leaf_blocks  u64
//! per leaf block: row_offset u64, col_offset u64, row_span u64,
//!                 col_span u64, start u64, end u64
//! local rows     nnz x u16
//! local cols     nnz x u16
//! values         nnz x f64
//! ```

use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{BlockDesc, BlockKind, HierBlockMatrix, LeafBlock};
use crate::error::{Error, Result};
use crate::model::Permutation;
use crate::ordering::{PartitionTree, TreeNode};

pub const HBM_MAGIC: &[u8; 4] = b"HBM1";

pub fn write_hbm<W: Write>(mut w: W, h: &HierBlockMatrix) -> Result<()> {
    w.write_all(HBM_MAGIC)?;
    for v in [h.n_rows, h.n_cols, h.nnz(), h.levels.len(), h.cut_level] {
        w.write_u64::<LE>(v as u64)?;
    }
    write_tree(&mut w, &h.row_tree)?;
    write_tree(&mut w, &h.col_tree)?;
    for level in &h.levels {
        w.write_u64::<LE>(level.len() as u64)?;
        for d in level {
            w.write_u64::<LE>(d.row_node as u64)?;
            w.write_u64::<LE>(d.col_node as u64)?;
            let (kind, a, b) = match d.kind {
                BlockKind::Internal { first, count } => (0u8, first, count),
                BlockKind::Leaf(i) => (1u8, i, 0),
            };
            w.write_u8(kind)?;
            w.write_u64::<LE>(a as u64)?;
            w.write_u64::<LE>(b as u64)?;
        }
    }
    w.write_u64::<LE>(h.leaves.len() as u64)?;
    for b in &h.leaves {
        for v in [b.row_offset, b.col_offset, b.row_span, b.col_span, b.start, b.end] {
            w.write_u64::<LE>(v as u64)?;
        }
    }
    for &r in &h.local_rows {
        w.write_u16::<LE>(r)?;
    }
    for &c in &h.local_cols {
        w.write_u16::<LE>(c)?;
    }
    for &v in &h.values {
        w.write_f64::<LE>(v)?;
    }
    w.flush()?;
    Ok(())
}

fn write_tree<W: Write>(w: &mut W, t: &PartitionTree) -> Result<()> {
    w.write_u32::<LE>(t.dim() as u32)?;
    w.write_u64::<LE>(t.leaf_capacity() as u64)?;
    w.write_u64::<LE>(t.max_depth() as u64)?;
    w.write_u64::<LE>(t.n_points() as u64)?;
    for &f in t.leaf_order().forward() {
        w.write_u64::<LE>(f as u64)?;
    }
    w.write_u64::<LE>(t.nodes().len() as u64)?;
    for n in t.nodes() {
        w.write_u32::<LE>(n.depth as u32)?;
        w.write_u8(n.code)?;
        w.write_u64::<LE>(n.start as u64)?;
        w.write_u64::<LE>(n.end as u64)?;
        for &x in n.lo.iter().chain(&n.hi) {
            w.write_f64::<LE>(x)?;
        }
        w.write_u32::<LE>(n.children.len() as u32)?;
        for &c in &n.children {
            w.write_u64::<LE>(c as u64)?;
        }
    }
    Ok(())
}

/// Reads a dump written by [`write_hbm`], validating structure.
pub fn read_hbm<R: Read>(mut r: R) -> Result<HierBlockMatrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != HBM_MAGIC {
        return Err(Error::InvalidParameter("not an HBM1 dump".into()));
    }
    let n_rows = read_len(&mut r)?;
    let n_cols = read_len(&mut r)?;
    let nnz = read_len(&mut r)?;
    let n_levels = read_len(&mut r)?;
    let cut_level = read_len(&mut r)?;
    let row_tree = read_tree(&mut r)?;
    let col_tree = read_tree(&mut r)?;

    let mut levels = Vec::new();
    for _ in 0..n_levels {
        let n = read_len(&mut r)?;
        let mut level = Vec::new();
        for _ in 0..n {
            let row_node = read_len(&mut r)?;
            let col_node = read_len(&mut r)?;
            let kind = r.read_u8()?;
            let a = read_len(&mut r)?;
            let b = read_len(&mut r)?;
            let kind = match kind {
                0 => BlockKind::Internal { first: a, count: b },
                1 => BlockKind::Leaf(a),
                k => return Err(Error::InvalidParameter(format!("unknown block kind {k}"))),
            };
            if row_node >= row_tree.nodes().len() || col_node >= col_tree.nodes().len() {
                return Err(Error::InvalidParameter("block names a missing tree node".into()));
            }
            level.push(BlockDesc {
                row_node,
                col_node,
                kind,
            });
        }
        levels.push(level);
    }
    let n_leaves = read_len(&mut r)?;
    let mut leaves = Vec::new();
    for _ in 0..n_leaves {
        let mut f = [0usize; 6];
        for x in &mut f {
            *x = read_len(&mut r)?;
        }
        leaves.push(LeafBlock {
            row_offset: f[0],
            col_offset: f[1],
            row_span: f[2],
            col_span: f[3],
            start: f[4],
            end: f[5],
        });
    }
    let mut local_rows = vec![0u16; nnz];
    r.read_u16_into::<LE>(&mut local_rows)?;
    let mut local_cols = vec![0u16; nnz];
    r.read_u16_into::<LE>(&mut local_cols)?;
    let mut values = vec![0f64; nnz];
    r.read_f64_into::<LE>(&mut values)?;
    HierBlockMatrix::from_raw_parts(
        n_rows, n_cols, cut_level, row_tree, col_tree, levels, leaves, local_rows, local_cols, values,
    )
}

fn read_len<R: Read>(r: &mut R) -> Result<usize> {
    let v = r.read_u64::<LE>()?;
    usize::try_from(v).map_err(|_| Error::InvalidParameter(format!("length {v} does not fit")))
}

fn read_tree<R: Read>(r: &mut R) -> Result<PartitionTree> {
    let dim = r.read_u32::<LE>()? as usize;
    let leaf_capacity = read_len(r)?;
    let max_depth = read_len(r)?;
    let n_points = read_len(r)?;
    let mut forward = Vec::with_capacity(n_points.min(1 << 24));
    for _ in 0..n_points {
        forward.push(read_len(r)?);
    }
    let leaf_order = Permutation::from_forward(forward)?;
    let n_nodes = read_len(r)?;
    let mut nodes = Vec::with_capacity(n_nodes.min(1 << 24));
    for _ in 0..n_nodes {
        let depth = r.read_u32::<LE>()? as usize;
        let code = r.read_u8()?;
        let start = read_len(r)?;
        let end = read_len(r)?;
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        r.read_f64_into::<LE>(&mut lo)?;
        r.read_f64_into::<LE>(&mut hi)?;
        let n_children = r.read_u32::<LE>()? as usize;
        let mut children = Vec::with_capacity(n_children.min(8));
        for _ in 0..n_children {
            children.push(read_len(r)?);
        }
        nodes.push(TreeNode {
            lo,
            hi,
            depth,
            code,
            children,
            start,
            end,
        });
    }
    PartitionTree::from_parts(dim, nodes, leaf_order, leaf_capacity, max_depth)
}
