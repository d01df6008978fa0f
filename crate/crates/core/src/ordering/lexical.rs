use crate::error::{Error, Result};
use crate::model::{Permutation, PointSet};

/// Lexicographic ordering on quantized embedding coordinates.
///
/// Each axis is cut into `bins` equal-width bins over its observed range and
/// points are sorted by their bin tuple, then by the raw last coordinate,
/// then by original index. A one-dimensional embedding is sorted on the raw
/// coordinate and `bins` is ignored.
pub fn order_lexical(points: &PointSet, bins: usize) -> Result<Permutation> {
    let dim = points.dim();
    if !(1..=3).contains(&dim) {
        return Err(Error::DimTooHigh(dim));
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("bins per axis must be positive".into()));
    }
    let n = points.n_points();
    let last = dim - 1;
    let keys: Vec<[u32; 3]> = if dim == 1 {
        vec![[0; 3]; n]
    } else {
        let ranges: Vec<(f64, f64)> = (0..dim)
            .map(|a| {
                points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[a]), hi.max(p[a]))
                })
            })
            .collect();
        points
            .iter()
            .map(|p| {
                let mut key = [0u32; 3];
                for (a, &(lo, hi)) in ranges.iter().enumerate() {
                    key[a] = bin_of(p[a], lo, hi, bins);
                }
                key
            })
            .collect()
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        keys[i]
            .cmp(&keys[j])
            .then(points.point(i)[last].total_cmp(&points.point(j)[last]))
            .then(i.cmp(&j))
    });
    Permutation::from_order(order)
}

fn bin_of(x: f64, lo: f64, hi: f64, bins: usize) -> u32 {
    let width = hi - lo;
    if width <= 0.0 {
        return 0;
    }
    let b = ((x - lo) / width * bins as f64).floor() as usize;
    b.min(bins - 1) as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_sort() {
        let p = PointSet::new(3, 1, vec![0.9, 0.1, 0.5]).unwrap();
        let perm = order_lexical(&p, 32).unwrap();
        assert_eq!(perm.inverse(), &[1, 2, 0]);
    }

    #[test]
    fn single_bin_column_sorts_on_second_axis() {
        // x spread stays inside one bin when bins = 1
        let p = PointSet::from_rows(&[
            vec![0.0, 3.0],
            vec![0.5, 1.0],
            vec![1.0, 2.0],
        ])
        .unwrap();
        let perm = order_lexical(&p, 1).unwrap();
        assert_eq!(perm.inverse(), &[1, 2, 0]);
    }

    #[test]
    fn too_many_dims() {
        let p = PointSet::zeros(2, 4);
        assert!(matches!(order_lexical(&p, 4), Err(Error::DimTooHigh(4))));
    }
}
