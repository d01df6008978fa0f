mod common;

use common::*;
use nalgebra::{DMatrix, SymmetricEigen};
use nnorder::hier::{build_hier, read_hbm, write_hbm, CutLevel};
use nnorder::io::{parse_fvecs, spy_pixels, write_fvecs_to, Roi};
use nnorder::kernels::{meanshift_step, spmv_flat, spmv_hier, ChargeVector, MeanShiftState, TsneAttraction};
use nnorder::knn::{build_knn, build_knn_self, gaussian_values, pattern_from_knn, symmetrize};
use nnorder::measure::{bandwidth, gamma_exact, gamma_grid, GammaParams};
use nnorder::model::mmio::{read_matrix_market, write_matrix_market, MmField};
use nnorder::model::squared_distance;
use nnorder::ordering::{build_tree, order_lexical, order_rcm, PartitionTree};
use nnorder::pca::{fit_pca, project, variance_ratio, PcaOptions};
use nnorder::synth::{gen_arrowhead, gen_banded, gen_gaussian_mixture, gen_scattered};
use nnorder::{Error, Permutation, PointSet, SparseMatrix, SparsePattern};
use std::collections::BTreeSet;

#[test]
fn knn_matches_full_sort() {
    let s = random_points(300, 5, 1);
    let t = random_points(40, 5, 2);
    for k in [1, 7, 30] {
        let g = build_knn(&t, &s, k).unwrap();
        let want = dense_knn(&t, &s, k, false);
        for (i, row) in want.iter().enumerate() {
            let ids: Vec<u32> = row.iter().map(|&(_, j)| j as u32).collect();
            let d: Vec<f64> = row.iter().map(|&(d, _)| d).collect();
            assert_eq!(g.neighbors(i), &ids[..]);
            assert_eq!(g.distances(i), &d[..]);
        }
        let gs = build_knn_self(&s, k).unwrap();
        for (i, row) in dense_knn(&s, &s, k, true).iter().enumerate() {
            let ids: Vec<u32> = row.iter().map(|&(_, j)| j as u32).collect();
            assert_eq!(gs.neighbors(i), &ids[..]);
        }
    }
}

#[test]
fn knn_ties_go_to_smaller_index() {
    // four sources at unit distance from the target at the origin
    let s = PointSet::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
    let t = PointSet::from_rows(&[vec![0.0, 0.0]]).unwrap();
    assert_eq!(build_knn(&t, &s, 2).unwrap().neighbors(0), &[0, 1]);
}

#[test]
fn symmetrize_is_set_union() {
    let pts = random_points(120, 3, 3);
    let p = pattern_from_knn(&build_knn_self(&pts, 6).unwrap());
    let s = symmetrize(&p).unwrap();
    let mut want: BTreeSet<(usize, usize)> = p.entries().collect();
    want.extend(p.entries().map(|(i, j)| (j, i)));
    let got: BTreeSet<(usize, usize)> = s.entries().collect();
    assert_eq!(got, want);
    assert_eq!(s.nnz(), want.len());
}

#[test]
fn gaussian_values_match_formula() {
    let pts = random_points(50, 2, 4);
    let p = pattern_from_knn(&build_knn_self(&pts, 4).unwrap());
    let h = 0.8;
    let m = gaussian_values(&p, &pts, &pts, h).unwrap();
    for (i, j, v) in m.triplets() {
        let d2: f64 = pts.point(i).iter().zip(pts.point(j)).map(|(a, b)| (a - b) * (a - b)).sum();
        assert!(rel_err(v, (-d2 / (2.0 * h * h)).exp()) < 1e-14);
    }
    assert!(matches!(gaussian_values(&p, &pts, &pts, 0.0), Err(Error::NonPositiveBandwidth(_))));
}

#[test]
fn pca_subspace_matches_eigendecomposition() {
    // anisotropic cloud with a clear spectral gap after three axes
    let mut r = rng(5);
    let dim = 12;
    let scales = [9.0, 6.0, 4.0, 1.0, 0.8, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05];
    let rows: Vec<Vec<f64>> = (0..500)
        .map(|_| {
            use rand::Rng;
            scales.iter().map(|s| s * (r.random::<f64>() - 0.5) + 3.0).collect()
        })
        .collect();
    // rotate so axes are not coordinate-aligned
    let q = DMatrix::<f64>::from_fn(dim, dim, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0).qr().q();
    let rotated: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| (q.clone() * nalgebra::DVector::from_column_slice(row)).iter().copied().collect())
        .collect();
    let pts = PointSet::from_rows(&rotated).unwrap();

    let e = fit_pca(&pts, 3, PcaOptions::default()).unwrap();
    assert!(e.converged());

    let mean = pts.mean();
    let x = DMatrix::<f64>::from_fn(pts.n_points(), dim, |i, j| pts.point(i)[j] - mean[j]);
    let eig = SymmetricEigen::new(x.transpose() * &x);
    let mut idx: Vec<usize> = (0..dim).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    for a in 0..3 {
        let want = eig.eigenvectors.column(idx[a]);
        let got = e.axis(a);
        let cos: f64 = want.iter().zip(got).map(|(u, v)| u * v).sum();
        assert!((cos.abs() - 1.0).abs() < 1e-9, "axis {a}: |cos| = {}", cos.abs());
        assert!(rel_err(e.singular_values()[a], eig.eigenvalues[idx[a]].sqrt()) < 1e-9);
    }
    let total: f64 = eig.eigenvalues.iter().sum();
    let top: f64 = idx[..3].iter().map(|&i| eig.eigenvalues[i]).sum();
    assert!((variance_ratio(&e).unwrap() - top / total).abs() < 1e-9);

    let y = project(&pts, &e).unwrap();
    for i in [0, 17, 499] {
        for a in 0..3 {
            let want: f64 = (0..dim).map(|j| (pts.point(i)[j] - mean[j]) * e.axis(a)[j]).sum();
            assert!((y.point(i)[a] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn pca_rejects_identical_points() {
    let pts = PointSet::new(4, 2, vec![1.0; 8]).unwrap();
    assert!(matches!(fit_pca(&pts, 1, PcaOptions::default()), Err(Error::DegenerateData(_))));
}

fn check_tree(tree: &PartitionTree, pts: &PointSet) {
    let order = tree.leaf_order();
    let nodes = tree.nodes();
    assert_eq!(nodes[0].start, 0);
    assert_eq!(nodes[0].end, pts.n_points());
    for n in nodes {
        if n.is_leaf() {
            assert!(n.len() <= tree.leaf_capacity() || n.depth == tree.max_depth());
        } else {
            let mut at = n.start;
            for &c in &n.children {
                assert_eq!(nodes[c].start, at);
                assert_eq!(nodes[c].depth, n.depth + 1);
                assert!(!nodes[c].is_empty());
                at = nodes[c].end;
            }
            assert_eq!(at, n.end);
        }
        for p in n.start..n.end {
            let x = pts.point(order.inverse()[p]);
            for a in 0..pts.dim() {
                assert!(n.lo[a] <= x[a] && x[a] <= n.hi[a], "depth {} axis {a}: {} not in [{}, {}]", n.depth, x[a], n.lo[a], n.hi[a]);
            }
        }
    }
}

#[test]
fn tree_partitions_points() {
    for dim in 1..=3 {
        let pts = random_points(2000, dim, 10 + dim as u64);
        check_tree(&build_tree(&pts, 32, 12).unwrap(), &pts);
        check_tree(&build_tree(&pts, 32, 2).unwrap(), &pts);
    }
    let pts = random_points(10, 4, 1);
    assert!(matches!(build_tree(&pts, 4, 5), Err(Error::DimTooHigh(4))));
}

#[test]
fn tree_on_duplicates_stops_at_max_depth() {
    let pts = PointSet::new(300, 2, vec![0.5; 600]).unwrap();
    let t = build_tree(&pts, 8, 6).unwrap();
    assert!(t.depth() <= 6);
    assert!(t.leaf_order().is_identity());
}

#[test]
fn rcm_does_not_widen_a_scrambled_band() {
    let p = gen_banded(400, 7).unwrap();
    let scramble = Permutation::from_order((0..400).map(|i| (i * 149) % 400).collect()).unwrap();
    let scrambled = p.permute(&scramble, &scramble).unwrap();
    let r = order_rcm(&scrambled).unwrap();
    let back = scrambled.permute(&r, &r).unwrap();
    assert!(bandwidth(&back) <= 2 * bandwidth(&p), "{}", bandwidth(&back));
    assert!(bandwidth(&scrambled) > 50);
}

#[test]
fn lexical_sorts_by_bins_then_next_axis() {
    let pts = random_points(500, 2, 12);
    let perm = order_lexical(&pts, 8).unwrap();
    let (lo, hi) = pts
        .axis(0)
        .iter()
        .fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    let bin = |v: f64| (((v - lo) / (hi - lo) * 8.0) as usize).min(7);
    let keys: Vec<(usize, f64)> = perm
        .inverse()
        .iter()
        .map(|&i| (bin(pts.point(i)[0]), pts.point(i)[1]))
        .collect();
    for w in keys.windows(2) {
        assert!(w[0].0 < w[1].0 || (w[0].0 == w[1].0 && w[0].1 <= w[1].1), "{w:?}");
    }
}

#[test]
fn gamma_matches_direct_sum() {
    for (p, sigma) in [
        (gen_arrowhead(60, 10).unwrap(), 4.0),
        (gen_banded(80, 5).unwrap(), 2.5),
        (gen_scattered(70, 4, 9).unwrap(), 7.0),
    ] {
        let want = gamma_oracle(&p, sigma);
        let params = GammaParams::new(sigma).unwrap();
        assert!(rel_err(gamma_exact(&p, &params).unwrap(), want) < 1e-12);
        let noself = gamma_exact(&p, &params.without_self_pairs()).unwrap();
        assert!(rel_err(noself, want - 1.0 / sigma) < 1e-12);
    }
}

#[test]
fn gamma_of_single_entry() {
    let p = SparsePattern::from_entries(3, 3, [(1, 2)]).unwrap();
    let params = GammaParams::new(2.0).unwrap();
    assert_eq!(gamma_exact(&p, &params).unwrap(), 0.5);
    assert!((gamma_grid(&p, &params).unwrap() - 0.5).abs() < 1e-15);
    let empty = SparsePattern::empty(3, 3);
    assert!(matches!(gamma_exact(&empty, &params), Err(Error::EmptyPattern)));
}

#[test]
fn generator_counts() {
    // arrowhead: n/b diagonal blocks, plus first block row and column
    for (n, b) in [(500, 20), (40, 20), (20, 20), (90, 30)] {
        let m = n / b;
        let want = if m == 1 { b * b } else { m * b * b + 2 * (m - 1) * b * b };
        let p = gen_arrowhead(n, b).unwrap();
        assert_eq!(p.nnz(), want);
        for (i, j) in p.entries() {
            assert!(i / b == j / b || i < b || j < b);
        }
    }
    let p = gen_banded(100, 6).unwrap();
    for (i, j) in p.entries() {
        assert!(j + 3 >= i && j <= i + 2, "({i}, {j})");
    }
    assert_eq!(p.nnz(), 100 * 6 - (3 + 2 + 1) - (2 + 1));
    let s = gen_scattered(64, 5, 3).unwrap();
    assert!((0..64).all(|i| s.row_degree(i) == 5));
}

#[test]
fn mixture_is_seeded() {
    let a = gen_gaussian_mixture(200, 4, 5, 10.0, 1.0, 7).unwrap();
    assert_eq!(a, gen_gaussian_mixture(200, 4, 5, 10.0, 1.0, 7).unwrap());
    assert_ne!(a, gen_gaussian_mixture(200, 4, 5, 10.0, 1.0, 8).unwrap());
}

#[test]
fn spy_at_full_resolution_is_the_indicator() {
    let p = gen_scattered(24, 3, 5).unwrap();
    let px = spy_pixels(&p, 24, None).unwrap();
    for r in 0..24 {
        for c in 0..24 {
            assert_eq!(px[r * 24 + c], if p.contains(r, c) { 0 } else { 255 });
        }
    }
    assert!(spy_pixels(&SparsePattern::empty(5, 5), 3, None).unwrap().iter().all(|&v| v == 255));
    let roi = Roi {
        row_lo: 4,
        row_hi: 8,
        col_lo: 0,
        col_hi: 4,
    };
    let sub = spy_pixels(&p, 4, Some(roi)).unwrap();
    for r in 0..4 {
        for c in 0..4 {
            assert_eq!(sub[r * 4 + c] == 0, p.contains(4 + r, c));
        }
    }
}

#[test]
fn fvecs_roundtrip_and_errors() {
    let pts = PointSet::new(3, 2, vec![0.5, -1.25, 3.0, 4.0, 1e3, -2e-3f32 as f64]).unwrap();
    let mut bytes = Vec::new();
    write_fvecs_to(&mut bytes, &pts).unwrap();
    assert_eq!(bytes.len(), 3 * (4 + 2 * 4));
    assert_eq!(parse_fvecs(&bytes, None).unwrap(), pts);
    assert_eq!(parse_fvecs(&bytes, Some(2)).unwrap().n_points(), 2);
    assert!(matches!(parse_fvecs(&bytes[..bytes.len() - 1], None), Err(Error::MalformedRecord { offset: 24, .. })));
    assert!(matches!(parse_fvecs(&[], None), Err(Error::EmptyFile)));
    let mut odd = bytes[..12].to_vec();
    odd.extend_from_slice(&3i32.to_le_bytes());
    odd.extend_from_slice(&[0u8; 12]);
    assert!(matches!(
        parse_fvecs(&odd, None),
        Err(Error::InconsistentDim {
            record: 1,
            expected: 2,
            got: 3
        })
    ));
}

#[test]
fn matrix_market_roundtrip() {
    let m = random_matrix(9, 7, 0.3, 6);
    let mut buf = Vec::new();
    write_matrix_market(&mut buf, &m).unwrap();
    let (back, field) = read_matrix_market(&buf[..]).unwrap();
    assert_eq!(field, MmField::Real);
    assert_eq!(back, m);

    let text = "%%MatrixMarket matrix coordinate pattern symmetric\n% comment\n3 3 2\n2 1\n3 3\n";
    let (p, field) = read_matrix_market(text.as_bytes()).unwrap();
    assert_eq!(field, MmField::Pattern);
    assert_eq!(p.pattern().entries().collect::<Vec<_>>(), vec![(0, 1), (1, 0), (2, 2)]);
}

#[test]
fn hbm_dump_roundtrip() {
    let pts = random_points(700, 2, 8);
    let m = gaussian_values(&symmetrize(&pattern_from_knn(&build_knn_self(&pts, 5).unwrap())).unwrap(), &pts, &pts, 1.0)
        .unwrap();
    let tree = build_tree(&pts, 32, 12).unwrap();
    let pm = m.permute(tree.leaf_order(), tree.leaf_order()).unwrap();
    let h = build_hier(&pm, &tree, &tree, CutLevel::Fixed(3)).unwrap();
    let mut buf = Vec::new();
    write_hbm(&mut buf, &h).unwrap();
    assert_eq!(&buf[..4], b"HBM1");
    let back = read_hbm(&buf[..]).unwrap();
    assert_eq!(back.flatten(), h.flatten());
    assert_eq!(back.levels(), h.levels());
    assert_eq!(back.leaf_blocks(), h.leaf_blocks());
    let x: Vec<f64> = (0..700).map(|i| (i as f64).sin()).collect();
    let a = spmv_hier(&h, &ChargeVector::for_columns(&h, x.clone())).unwrap();
    let b = spmv_hier(&back, &ChargeVector::for_columns(&back, x)).unwrap();
    assert_eq!(a, b);

    buf[0] = b'X';
    assert!(read_hbm(&buf[..]).is_err());
}

#[test]
fn spmv_matches_dense_product() {
    for seed in 0..5 {
        let m = random_matrix(37, 53, 0.15, seed);
        let x: Vec<f64> = (0..53).map(|i| (i as f64 * 0.37).cos()).collect();
        let got = spmv_flat(&m, &x).unwrap();
        assert!(max_rel_err(&got, &dense_matvec(&m, &x)) < 1e-13);
    }
}

#[test]
fn hier_blocks_respect_tree_clusters() {
    let pts = random_points(3000, 3, 21);
    let m = gaussian_values(&pattern_from_knn(&build_knn_self(&pts, 8).unwrap()), &pts, &pts, 1.0).unwrap();
    let tree = build_tree(&pts, 64, 12).unwrap();
    let pm = m.permute(tree.leaf_order(), tree.leaf_order()).unwrap();
    for cut in [0, 1, 2, 4] {
        let h = build_hier(&pm, &tree, &tree, CutLevel::Fixed(cut)).unwrap();
        assert_eq!(h.nnz(), pm.nnz());
        let total: usize = h.leaf_blocks().iter().map(|l| l.nnz()).sum();
        assert_eq!(total, pm.nnz());
        for l in h.leaf_blocks() {
            assert!(l.nnz() > 0);
            for e in l.start..l.end {
                assert!((h.local_rows()[e] as usize) < l.row_span);
                assert!((h.local_cols()[e] as usize) < l.col_span);
            }
        }
        let mut t: Vec<_> = h.triplets().collect();
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        assert_eq!(t, pm.triplets().collect::<Vec<_>>());
    }
}

/// Forces by the defining double sum over stored pairs.
fn tsne_oracle(p: &SparseMatrix, y: &PointSet) -> Vec<f64> {
    let d = y.dim();
    let mut f = vec![0.0; y.n_points() * d];
    for (i, j, pij) in p.triplets() {
        let a = pij / (1.0 + squared_distance(y.point(i), y.point(j)));
        for c in 0..d {
            f[i * d + c] += a * (y.point(i)[c] - y.point(j)[c]);
        }
    }
    f
}

#[test]
fn tsne_step_matches_pairwise_sum() {
    let pts = random_points(200, 3, 30);
    let p = gaussian_values(&symmetrize(&pattern_from_knn(&build_knn_self(&pts, 6).unwrap())).unwrap(), &pts, &pts, 1.0)
        .unwrap();
    let tree = build_tree(&pts, 16, 12).unwrap();
    let pm = p.permute(tree.leaf_order(), tree.leaf_order()).unwrap();
    let mut st = TsneAttraction::new(build_hier(&pm, &tree, &tree, CutLevel::Fixed(2)).unwrap()).unwrap();
    let y = random_points(200, 2, 31).permuted(tree.leaf_order());
    for _ in 0..2 {
        let f = st.step(&y).unwrap();
        assert!(max_rel_err(f.coords(), &tsne_oracle(&pm, &y)) < 1e-12);
    }
    let mut a = st.affinities().to_vec();
    let mut b = pm.values().to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    assert_eq!(a, b);
}

#[test]
fn meanshift_matches_restricted_oracle() {
    let src = random_points(150, 2, 40);
    let tgt = random_points(60, 2, 41);
    let h = 1.5;
    let mut st = MeanShiftState::new(src.clone(), tgt.clone(), h, 12, 3).unwrap();
    let mut y = tgt;
    let mut nb = Vec::new();
    for step in 0..7 {
        // neighbor lists are refreshed every third step
        if step % 3 == 0 {
            nb = dense_knn(&y, &src, 12, false);
        }
        let mut next = PointSet::zeros(y.n_points(), 2);
        for i in 0..y.n_points() {
            let w: Vec<f64> = nb[i]
                .iter()
                .map(|&(_, j)| (-squared_distance(y.point(i), src.point(j)) / (2.0 * h * h)).exp())
                .collect();
            let tot: f64 = w.iter().sum();
            for c in 0..2 {
                next.point_mut(i)[c] = nb[i].iter().zip(&w).map(|(&(_, j), wj)| wj * src.point(j)[c]).sum::<f64>() / tot;
            }
        }
        y = next;
        st = meanshift_step(st).unwrap();
        assert!(max_rel_err(st.targets().coords(), y.coords()) < 1e-12);
    }
}

#[test]
fn meanshift_reorder_keeps_original_indexing() {
    let src = gen_gaussian_mixture(300, 3, 3, 20.0, 1.0, 2).unwrap();
    let tgt = src.clone();
    let plain = MeanShiftState::new(src.clone(), tgt.clone(), 2.0, 10, 2).unwrap();
    let reordered = MeanShiftState::new(src, tgt, 2.0, 10, 2).unwrap().with_reorder(0).unwrap();
    let (mut a, mut b) = (plain, reordered);
    for _ in 0..6 {
        a = meanshift_step(a).unwrap();
        b = meanshift_step(b).unwrap();
    }
    assert!(!b.target_order().is_identity());
    let (ya, yb) = (a.targets_in_original_order(), b.targets_in_original_order());
    assert!(max_rel_err(yb.coords(), ya.coords()) < 1e-12);
}
