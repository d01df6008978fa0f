//! Interaction kernels: flat and blocked SpMV, the t-SNE attractive force,
//! mean shift, and an update-then-multiply iteration driver.

mod meanshift;
mod spmv;
mod tsne;

use std::time::{Duration, Instant};

pub use meanshift::{meanshift_step, MeanShiftState, DEFAULT_REFRESH_PERIOD};
pub use spmv::{
    spmv_flat, spmv_flat_into, spmv_flat_parallel_into, spmv_hier, spmv_hier_in, spmv_hier_parallel,
    worker_pool,
};
pub use tsne::{tsne_attractive_step, TsneAttraction};

use crate::error::Result;
use crate::hier::HierBlockMatrix;
use crate::model::Permutation;

/// Input vector over sources, tagged with the layout it is stored in.
#[derive(Clone, Debug, PartialEq)]
pub struct ChargeVector {
    pub values: Vec<f64>,
    pub layout: u64,
}

impl ChargeVector {
    pub fn new(values: Vec<f64>, layout: u64) -> Self {
        Self { values, layout }
    }

    /// Takes values given in original source order and lays them out
    /// under `perm`.
    pub fn from_original(values: &[f64], perm: &Permutation) -> Self {
        Self {
            values: perm.apply(values),
            layout: perm.layout_tag(),
        }
    }

    /// Values already stored in the matrix's column order.
    pub fn for_columns(h: &HierBlockMatrix, values: Vec<f64>) -> Self {
        Self {
            values,
            layout: h.col_layout(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Output vector over targets, tagged with its layout.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialVector {
    pub values: Vec<f64>,
    pub layout: u64,
}

impl PotentialVector {
    /// Values back in original target order.
    pub fn to_original(&self, perm: &Permutation) -> Result<Vec<f64>> {
        if perm.layout_tag() != self.layout {
            return Err(crate::Error::OrderingMismatch);
        }
        Ok(perm.unapply(&self.values))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One step of [`iterate_interactions`].
#[derive(Clone, Debug)]
pub struct IterationOutput {
    pub potential: PotentialVector,
    pub update_time: Duration,
    pub multiply_time: Duration,
}

/// For each step `s`, replaces the values with `value_fn(s)` and multiplies
/// by `inputs[s]`.
pub fn iterate_interactions<F, G>(
    h: &mut HierBlockMatrix,
    mut value_fn: F,
    inputs: &[ChargeVector],
) -> Result<Vec<IterationOutput>>
where
    F: FnMut(usize) -> G,
    G: Fn(usize, usize, f64) -> f64,
{
    let mut out = Vec::with_capacity(inputs.len());
    for (step, x) in inputs.iter().enumerate() {
        let t0 = Instant::now();
        h.update_values(value_fn(step))?;
        let t1 = Instant::now();
        let potential = spmv_hier(h, x)?;
        out.push(IterationOutput {
            potential,
            update_time: t1 - t0,
            multiply_time: t1.elapsed(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hier::{build_hier, CutLevel};
    use crate::ordering::PartitionTree;
    use crate::SparseMatrix;

    #[test]
    fn two_step_hand_example() {
        let m = SparseMatrix::from_coo(&[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)], 2, 2).unwrap();
        let t = PartitionTree::trivial(2);
        let mut h = build_hier(&m, &t, &t, CutLevel::Auto).unwrap();
        let x = ChargeVector::for_columns(&h, vec![1.0, 2.0]);
        let out = iterate_interactions(
            &mut h,
            |s| move |r: usize, c: usize, _| (s + 1) as f64 * if r == c { 1.0 } else { 0.5 },
            &[x.clone(), x],
        )
        .unwrap();
        assert_eq!(out[0].potential.values, vec![2.0, 2.0]);
        assert_eq!(out[1].potential.values, vec![4.0, 4.0]);
    }

    #[test]
    fn potential_layout_checked() {
        let p = Permutation::from_forward(vec![1, 0]).unwrap();
        let y = PotentialVector {
            values: vec![1.0, 2.0],
            layout: p.layout_tag(),
        };
        assert_eq!(y.to_original(&p).unwrap(), vec![2.0, 1.0]);
        assert!(y.to_original(&Permutation::identity(2)).is_err());
    }
}
