use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::knn::{build_knn, KnnGraph};
use crate::model::{squared_distance, Permutation, PointSet};
use crate::ordering::{build_tree, DEFAULT_LEAF_CAPACITY, DEFAULT_MAX_DEPTH};
use crate::pca::{fit_pca, project, Embedding, PcaOptions};

pub const DEFAULT_REFRESH_PERIOD: usize = 10;

/// Mean-shift iteration state: fixed sources, moving target means, and the
/// target-to-source kNN graph, rebuilt every `refresh_period` steps.
#[derive(Clone, Debug)]
pub struct MeanShiftState {
    sources: PointSet,
    targets: PointSet,
    bandwidth: f64,
    k: usize,
    knn: KnnGraph,
    refresh_period: usize,
    iteration: usize,
    reorder: Option<Embedding>,
    /// Layout of `targets` relative to the order they were given in.
    target_order: Permutation,
}

impl MeanShiftState {
    pub fn new(sources: PointSet, targets: PointSet, bandwidth: f64, k: usize, refresh_period: usize) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::NonPositiveBandwidth(bandwidth));
        }
        if refresh_period == 0 {
            return Err(Error::InvalidParameter("refresh period must be positive".into()));
        }
        let knn = build_knn(&targets, &sources, k)?;
        let target_order = Permutation::identity(targets.n_points());
        Ok(Self {
            sources,
            targets,
            bandwidth,
            k,
            knn,
            refresh_period,
            iteration: 0,
            reorder: None,
            target_order,
        })
    }

    /// Also reorder targets by a 3D tree ordering at each refresh. The
    /// embedding is fitted once on the sources.
    pub fn with_reorder(mut self, seed: u64) -> Result<Self> {
        let d = self.sources.dim().min(3);
        let opts = PcaOptions {
            seed,
            ..PcaOptions::default()
        };
        self.reorder = Some(fit_pca(&self.sources, d, opts)?);
        Ok(self)
    }

    pub fn sources(&self) -> &PointSet {
        &self.sources
    }

    /// Current means, in the current target layout.
    pub fn targets(&self) -> &PointSet {
        &self.targets
    }

    /// Current means in the order the targets were first given.
    pub fn targets_in_original_order(&self) -> PointSet {
        self.targets.permuted(&self.target_order.inverted())
    }

    pub fn target_order(&self) -> &Permutation {
        &self.target_order
    }

    pub fn knn(&self) -> &KnnGraph {
        &self.knn
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn refresh_period(&self) -> usize {
        self.refresh_period
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn refresh(&mut self) -> Result<()> {
        if let Some(e) = &self.reorder {
            let embedded = project(&self.targets, e)?;
            let tree = build_tree(&embedded, DEFAULT_LEAF_CAPACITY, DEFAULT_MAX_DEPTH)?;
            let perm = tree.leaf_order();
            self.targets = self.targets.permuted(perm);
            self.target_order = perm.after(&self.target_order)?;
        }
        self.knn = build_knn(&self.targets, &self.sources, self.k)?;
        Ok(())
    }
}

/// Moves every target to the Gaussian-weighted mean of its kNN sources,
/// `y_i <- sum_j w_ij s_j / sum_j w_ij` with `w_ij = exp(-|y_i - s_j|^2 / (2 h^2))`.
pub fn meanshift_step(mut state: MeanShiftState) -> Result<MeanShiftState> {
    if state.knn.n_targets() != state.targets.n_points() || state.knn.n_sources() != state.sources.n_points() {
        return Err(Error::SizeMismatch("neighbor graph does not match the point sets".into()));
    }
    let dim = state.targets.dim();
    let scale = 1.0 / (2.0 * state.bandwidth * state.bandwidth);
    let mut next = vec![0.0; state.targets.coords().len()];
    let failed = {
        let (targets, sources, knn) = (&state.targets, &state.sources, &state.knn);
        next.par_chunks_mut(dim.max(1))
            .enumerate()
            .filter_map(|(i, out)| {
                let y = targets.point(i);
                let mut total = 0.0;
                for &j in knn.neighbors(i) {
                    let s = sources.point(j as usize);
                    let w = (-squared_distance(y, s) * scale).exp();
                    total += w;
                    for (o, &sv) in out.iter_mut().zip(s) {
                        *o += w * sv;
                    }
                }
                if total == 0.0 {
                    return Some(i);
                }
                for o in out.iter_mut() {
                    *o /= total;
                }
                None
            })
            .min()
    };
    if let Some(i) = failed {
        return Err(Error::ZeroWeight {
            target: state.target_order.inverse()[i],
        });
    }
    state.targets = PointSet::new(state.targets.n_points(), dim, next)?;
    state.iteration += 1;
    if state.iteration % state.refresh_period == 0 {
        state.refresh()?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_source_pulls_target() {
        let s = PointSet::new(1, 2, vec![0.0, 0.0]).unwrap();
        let t = PointSet::new(1, 2, vec![0.7, -0.2]).unwrap();
        let st = meanshift_step(MeanShiftState::new(s, t, 1.0, 1, 10).unwrap()).unwrap();
        assert_eq!(st.targets().coords(), &[0.0, 0.0]);
        assert_eq!(st.iteration(), 1);
    }

    #[test]
    fn symmetric_pair_keeps_center() {
        let s = PointSet::new(2, 1, vec![-1.0, 1.0]).unwrap();
        let t = PointSet::new(1, 1, vec![0.0]).unwrap();
        let st = meanshift_step(MeanShiftState::new(s, t, 0.5, 2, 10).unwrap()).unwrap();
        assert_eq!(st.targets().coords(), &[0.0]);
    }

    #[test]
    fn underflow_is_an_error() {
        let s = PointSet::new(1, 1, vec![1e6]).unwrap();
        let t = PointSet::new(2, 1, vec![1e6, 0.0]).unwrap();
        let st = MeanShiftState::new(s, t, 1.0, 1, 10).unwrap();
        assert!(matches!(meanshift_step(st), Err(Error::ZeroWeight { target: 1 })));
    }
}
