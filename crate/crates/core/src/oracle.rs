//! Slow reference implementations. Nothing here shares code with the fast
//! paths beyond the scalar Laplace CDF; tests compare the two.

use crate::error::{check_finite, LapSumError, Result};
use crate::laplace::laplace_cdf;
use crate::ops::SoftSelection;

/// Default absolute tolerance on `|fsum(b) - k|` for [`inverse_bisect`].
pub const BISECT_TOL: f64 = 1e-13;
/// Iteration cap for [`inverse_bisect`].
pub const BISECT_MAX_ITER: usize = 200;

/// `sum_i Lap((x - r_i)/alpha)` by direct summation.
pub fn fsum_direct(r: &[f64], x: f64, alpha: f64) -> f64 {
    r.iter().map(|&ri| laplace_cdf((x - ri) / alpha)).sum()
}

/// Root of `fsum_direct(r, ., alpha) = k` by bisection.
///
/// The bracket starts at `[min r - |alpha|, max r + |alpha|]` and is widened
/// geometrically until it contains the root. Bisection stops once the
/// residual is within `tol`, or once the bracket has shrunk to adjacent
/// doubles (the root is then pinned to machine resolution and the endpoint
/// with the smaller residual is returned). Running out of iterations is an
/// error.
pub fn inverse_bisect(r: &[f64], k: f64, alpha: f64, tol: f64) -> Result<f64> {
    check_finite(r)?;
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(LapSumError::ZeroScale(alpha));
    }
    let n = r.len();
    if !(k > 0.0 && k < n as f64) {
        return Err(LapSumError::KOutOfRange { k, n });
    }
    // g is increasing in x whatever the sign of alpha.
    let g = |x: f64| {
        let v = fsum_direct(r, x, alpha) - k;
        if alpha > 0.0 {
            v
        } else {
            -v
        }
    };
    let a = alpha.abs();
    let min = r.iter().copied().fold(f64::INFINITY, f64::min);
    let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut width = a;
    let mut lo = min - width;
    while g(lo) > 0.0 {
        width *= 2.0;
        lo = min - width;
    }
    let mut width = a;
    let mut hi = max + width;
    while g(hi) < 0.0 {
        width *= 2.0;
        hi = max + width;
    }

    let (mut g_lo, mut g_hi) = (g(lo), g(hi));
    for _ in 0..BISECT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(if g_hi.abs() < g_lo.abs() { hi } else { lo });
        }
        let g_mid = g(mid);
        if g_mid.abs() <= tol {
            return Ok(mid);
        }
        if g_mid < 0.0 {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
            g_hi = g_mid;
        }
    }
    Err(LapSumError::BisectionFailed {
        iterations: BISECT_MAX_ITER,
        residual: g_lo.abs().min(g_hi.abs()),
    })
}

/// Central difference `(f(x0 + h) - f(x0 - h)) / 2h`, componentwise.
pub fn finite_diff<F: Fn(f64) -> Vec<f64>>(f: F, x0: f64, h: f64) -> Vec<f64> {
    let up = f(x0 + h);
    let down = f(x0 - h);
    up.iter().zip(&down).map(|(u, d)| (u - d) / (2.0 * h)).collect()
}

/// Central difference of `f` at `x` in direction `v`.
pub fn directional_diff<F: Fn(&[f64]) -> Vec<f64>>(f: F, x: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    let shifted = |t: f64| -> Vec<f64> { x.iter().zip(v).map(|(x, v)| x + t * v).collect() };
    finite_diff(|t| f(&shifted(t)), 0.0, h)
}

/// Full gradient of a scalar function by central differences.
pub fn gradient_diff<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Soft top-k by bisection and direct CDF evaluation.
pub fn topk_direct(r: &[f64], k: f64, alpha: f64) -> Result<Vec<f64>> {
    let b = inverse_bisect(r, k, alpha, BISECT_TOL)?;
    Ok(r.iter().map(|&ri| laplace_cdf((b - ri) / alpha)).collect())
}

/// Soft ranks by the double sum over pairs.
pub fn rank_direct(r: &[f64], alpha: f64) -> Vec<f64> {
    r.iter()
        .enumerate()
        .map(|(j, &rj)| {
            r.iter()
                .enumerate()
                .filter(|&(l, _)| l != j)
                .map(|(_, &rl)| laplace_cdf((rj - rl) / alpha))
                .sum()
        })
        .collect()
}

/// Soft sort by one bisection per half-integer level.
pub fn sort_direct(r: &[f64], alpha: f64) -> Result<Vec<f64>> {
    (0..r.len())
        .map(|l| inverse_bisect(r, l as f64 + 0.5, alpha, BISECT_TOL))
        .collect()
}

/// Soft permutation matrix (row = element, column = level bucket) from
/// bisection thresholds and plain CDF differences.
pub fn permutation_direct(r: &[f64], alpha: f64) -> Result<Vec<Vec<f64>>> {
    let n = r.len();
    let mut levels = vec![f64::NEG_INFINITY];
    for i in 1..n {
        levels.push(inverse_bisect(r, i as f64, alpha, BISECT_TOL)?);
    }
    levels.push(f64::INFINITY);
    Ok(r.iter()
        .map(|&ri| {
            (0..n)
                .map(|c| laplace_cdf((levels[c + 1] - ri) / alpha) - laplace_cdf((levels[c] - ri) / alpha))
                .collect()
        })
        .collect())
}

/// Dense top-k Jacobian `J[j][i] = dp_j/dr_i = sign(alpha) (s_j q_i - delta_ij s_j)`.
pub fn dense_topk_jacobian(sel: &SoftSelection) -> Vec<Vec<f64>> {
    let sign = sel.alpha.signum();
    let n = sel.len();
    (0..n)
        .map(|j| {
            (0..n)
                .map(|i| {
                    let diag = if i == j { sel.s[j] } else { 0.0 };
                    sign * (sel.s[j] * sel.q[i] - diag)
                })
                .collect()
        })
        .collect()
}

/// Rows `q_m = softmax(-|b_m - r_i|/|alpha|)` evaluated one by one.
pub fn dense_q(r: &[f64], thresholds: &[f64], alpha: f64) -> Vec<Vec<f64>> {
    let a = alpha.abs();
    thresholds
        .iter()
        .map(|&b| {
            let logits: Vec<f64> = r.iter().map(|&ri| -((b - ri) / a).abs()).collect();
            let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
            let total: f64 = e.iter().sum();
            e.iter().map(|v| v / total).collect()
        })
        .collect()
}

/// `S_m = sum_i exp(-|b_m - r_i|/|alpha|) / (2|alpha|)` by direct summation.
pub fn level_sums_direct(r: &[f64], thresholds: &[f64], alpha: f64) -> Vec<f64> {
    let a = alpha.abs();
    thresholds
        .iter()
        .map(|&b| r.iter().map(|&ri| (-((b - ri) / a).abs()).exp()).sum::<f64>() / (2.0 * a))
        .collect()
}

/// Exact combinatorial order information of a score vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HardOrder {
    /// 1 on the `k` smallest scores.
    pub topk_min_mask: Vec<f64>,
    /// 1 on the `k` largest scores.
    pub topk_max_mask: Vec<f64>,
    /// `ranks[i] = #{j : r_j < r_i}`.
    pub ranks: Vec<usize>,
    /// Scores ascending.
    pub sorted: Vec<f64>,
    /// Row-major `n x n`, a one at `(i, ranks[i])`.
    pub perm_matrix: Vec<Vec<f64>>,
}

/// Hard top-k masks, ranks, sort and permutation matrix. Scores should be
/// pairwise distinct for the ranks and matrix to describe a permutation.
pub fn hard_ops(r: &[f64], k: usize) -> HardOrder {
    let n = r.len();
    let ranks: Vec<usize> = r
        .iter()
        .map(|&ri| r.iter().filter(|&&rj| rj < ri).count())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| r[a].total_cmp(&r[b]).then(a.cmp(&b)));
    let sorted = order.iter().map(|&i| r[i]).collect();
    let mut topk_min_mask = vec![0.0; n];
    let mut topk_max_mask = vec![0.0; n];
    for &i in order.iter().take(k) {
        topk_min_mask[i] = 1.0;
    }
    for &i in order.iter().rev().take(k) {
        topk_max_mask[i] = 1.0;
    }
    let perm_matrix = ranks
        .iter()
        .map(|&rank| (0..n).map(|c| if c == rank { 1.0 } else { 0.0 }).collect())
        .collect();
    HardOrder {
        topk_min_mask,
        topk_max_mask,
        ranks,
        sorted,
        perm_matrix,
    }
}
