mod common;

use common::*;
use lapsum::oracle::{
    dense_q, fsum_direct, inverse_bisect, level_sums_direct, permutation_direct, rank_direct, sort_direct,
    topk_direct, BISECT_TOL,
};
use lapsum::{prepare, soft_permutation, soft_rank, soft_sort, soft_topk, MultiInverseTangent, ScaleParam};
use rand::Rng;

fn prep(r: &[f64], alpha: f64) -> lapsum::Prepared {
    prepare(r, ScaleParam::new(alpha).unwrap()).unwrap()
}

#[test]
fn eval_matches_direct_summation_hundred_normals() {
    let mut g = rng(7);
    let r = normal_scores(&mut g, 100);
    let xs: Vec<f64> = (0..20).map(|_| 3.0 * g.random::<f64>() - 1.5).collect();
    let got = prep(&r, 1.0).fsum_eval(&xs).unwrap();
    for (&x, &v) in xs.iter().zip(&got) {
        let want = fsum_direct(&r, x, 1.0);
        assert!((v - want).abs() <= 1e-12 * want, "x {x}: {v} vs {want}");
    }
}

#[test]
fn eval_matches_direct_summation_random_sizes() {
    let mut g = rng(11);
    for case in 0..60 {
        let n = g.random_range(1..=1000);
        let m = g.random_range(1..=1000);
        let alpha = [0.05, 0.3, 1.0, 7.0][case % 4] * if case % 3 == 0 { -1.0 } else { 1.0 };
        let r = normal_scores(&mut g, n);
        let xs: Vec<f64> = (0..m).map(|_| 8.0 * g.random::<f64>() - 4.0).collect();
        let got = prep(&r, alpha).fsum_eval(&xs).unwrap();
        for (&x, &v) in xs.iter().zip(&got) {
            let want = fsum_direct(&r, x, alpha);
            // Strictly inside (0, n) whenever the reference is not saturated
            // in double precision.
            if want > 0.0 && want < n as f64 {
                assert!(v > 0.0 && v < n as f64);
            }
            assert!((v - want).abs() <= 1e-12 * want, "case {case} x {x}: {v} vs {want}");
        }
    }
}

#[test]
fn inverse_matches_bisection() {
    let r = [0.0, 1.0, 2.0];
    let b = prep(&r, 1.0).fsum_inverse(1.0).unwrap();
    let oracle = inverse_bisect(&r, 1.0, 1.0, BISECT_TOL).unwrap();
    assert!((b - oracle).abs() <= 1e-10);

    let mut g = rng(3);
    for case in 0..200 {
        let n = g.random_range(1..=300);
        let alpha = [0.1, 1.0, 10.0][case % 3] * if case % 2 == 0 { -1.0 } else { 1.0 };
        let r = normal_scores(&mut g, n);
        let k = uniform_k(&mut g, n);
        let b = prep(&r, alpha).fsum_inverse(k).unwrap();
        let oracle = inverse_bisect(&r, k, alpha, BISECT_TOL).unwrap();
        assert!((b - oracle).abs() <= 1e-10, "case {case}: {b} vs {oracle}");
    }
}

#[test]
fn topk_matches_oracle_per_component() {
    let r = [0.0, 1.0, 2.0];
    let p = soft_topk(&r, 1.5, 1.0).unwrap().p;
    let want = topk_direct(&r, 1.5, 1.0).unwrap();
    assert!(max_abs_diff(&p, &want) <= 1e-10);

    let mut g = rng(5);
    for _ in 0..50 {
        let n = g.random_range(2..=60);
        let r = normal_scores(&mut g, n);
        let k = uniform_k(&mut g, n);
        let alpha = if g.random::<bool>() { 0.4 } else { -2.0 };
        let p = soft_topk(&r, k, alpha).unwrap().p;
        assert!(max_abs_diff(&p, &topk_direct(&r, k, alpha).unwrap()) <= 1e-10);
    }
}

#[test]
fn rank_and_sort_match_oracles() {
    let r = [0.0, 1.0, 2.0];
    let v = soft_sort(&r, 1.0).unwrap().values;
    assert!(max_abs_diff(&v, &sort_direct(&r, 1.0).unwrap()) <= 1e-10);

    let mut g = rng(17);
    for case in 0..30 {
        let n = g.random_range(1..=80);
        let alpha = [0.2, 1.0, -0.7][case % 3];
        let r = normal_scores(&mut g, n);
        let ranks = soft_rank(&r, alpha).unwrap().ranks;
        assert!(max_abs_diff(&ranks, &rank_direct(&r, alpha)) <= 1e-12 * n as f64);
        let sorted = soft_sort(&r, alpha).unwrap().values;
        assert!(max_abs_diff(&sorted, &sort_direct(&r, alpha).unwrap()) <= 1e-10);
    }
}

#[test]
fn permutation_matches_oracle() {
    let r = [0.0, 1.0];
    let m = soft_permutation(&r, 1.0).unwrap();
    let want = permutation_direct(&r, 1.0).unwrap();
    for (row, want_row) in m.rows().zip(&want) {
        assert!(max_abs_diff(row, want_row) <= 1e-12);
    }
    for s in m.row_sums().into_iter().chain(m.col_sums()) {
        assert!((s - 1.0).abs() <= 1e-12);
    }

    let mut g = rng(23);
    let r = normal_scores(&mut g, 25);
    let m = soft_permutation(&r, 0.3).unwrap();
    let want = permutation_direct(&r, 0.3).unwrap();
    for (row, want_row) in m.rows().zip(&want) {
        assert!(max_abs_diff(row, want_row) <= 1e-10);
    }
}

#[test]
fn level_sums_and_q_products_match_dense() {
    let mut g = rng(29);
    for case in 0..20 {
        let n = g.random_range(1..=500);
        let levels = g.random_range(1..=500);
        let alpha = [0.3, 1.0, -2.0, -0.15][case % 4];
        let r = normal_scores(&mut g, n);
        let mut ks: Vec<f64> = (0..levels).map(|_| uniform_k(&mut g, n)).collect();
        ks.sort_by(f64::total_cmp);
        let p = prep(&r, alpha);
        let t = MultiInverseTangent::new(&p, &ks).unwrap();
        let want = level_sums_direct(&r, t.thresholds(), alpha);
        for (s, w) in t.s_per_level().iter().zip(&want) {
            assert!((s - w).abs() <= 1e-12 * w, "case {case}: {s} vs {w}");
        }

        let q = dense_q(&r, t.thresholds(), alpha);
        let v = normal_scores(&mut g, n);
        let w = normal_scores(&mut g, levels);
        let qv: Vec<f64> = q.iter().map(|row| dot(row, &v)).collect();
        assert!(max_abs_diff(&t.qvp(&v).unwrap(), &qv) <= 1e-12);
        let wq: Vec<f64> = (0..n).map(|i| q.iter().zip(&w).map(|(row, wm)| wm * row[i]).sum()).collect();
        assert!(max_abs_diff(&t.vqp(&w).unwrap(), &wq) <= 1e-12 * levels as f64);
    }
}
