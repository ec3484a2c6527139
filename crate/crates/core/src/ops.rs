//! Soft top-k, soft rank, soft sort and soft permutation.
//!
//! Positive `alpha` orders ascending (top-k concentrates on the smallest
//! scores); negative `alpha` orders descending. Per-element outputs are
//! returned in the caller's order.

use rayon::prelude::*;

use crate::error::{check_len, LapSumError, Result};
use crate::fsum::{prepare, Prepared, ScaleParam};
use crate::laplace::{exp_nonpos, laplace_cdf, laplace_cdf_diff, laplace_density};

/// Output of [`soft_topk`] plus the state its derivatives need.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSelection {
    /// `p_i = Lap((b - r_i)/alpha)`, in `(0, 1)`, summing to `k`.
    pub p: Vec<f64>,
    /// Threshold solving `sum_i Lap((b - r_i)/alpha) = k`.
    pub b: f64,
    pub k: f64,
    pub alpha: f64,
    /// Density weights `min(p_i, 1 - p_i) / |alpha|`.
    pub s: Vec<f64>,
    /// `s` normalised to sum 1, formed as a softmax of `-|b - r_i|/|alpha|`.
    pub q: Vec<f64>,
    /// `sum_i s_i`.
    pub s_total: f64,
}

impl SoftSelection {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// `|sum_i p_i - k|`.
    pub fn mass_error(&self) -> f64 {
        (self.p.iter().sum::<f64>() - self.k).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftRanks {
    /// `ranks_j = sum_{l != j} Lap((r_j - r_l)/alpha)`, in `(0, n-1)`.
    pub ranks: Vec<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftSorted {
    /// `values_l` solves `fsum(values_l) = l + 1/2`; increasing for positive
    /// alpha, decreasing for negative.
    pub values: Vec<f64>,
    pub alpha: f64,
}

/// Dense soft permutation matrix, row-major.
///
/// Row `i` belongs to input element `i`, column `c` to sorted position `c`:
/// entry `(i, c)` is the mass of `Lap((. - r_i)/alpha)` between the
/// thresholds at levels `c` and `c + 1` (`-inf` and `+inf` at the ends).
/// In the small-alpha limit it is the matrix with a one at
/// `(i, ascending rank of r_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublyStochastic {
    entries: Vec<f64>,
    n: usize,
    alpha: f64,
    levels: Vec<f64>,
}

impl DoublyStochastic {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.n..(row + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.n)
    }

    /// Interior thresholds `fsum^{-1}(1), ..., fsum^{-1}(n-1)`.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for row in self.rows() {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }
}

/// Soft top-k: a point of `{p in (0,1)^n : sum p = k}` converging to the hard
/// selection of the `k` smallest (`alpha > 0`) or largest (`alpha < 0`)
/// scores as `alpha -> 0`. `k` need not be an integer.
pub fn soft_topk(scores: &[f64], k: f64, alpha: f64) -> Result<SoftSelection> {
    let prep = prepare(scores, ScaleParam::new(alpha)?)?;
    soft_topk_prepared(&prep, scores, k)
}

/// [`soft_topk`] on already prepared scores. `scores` must be the vector
/// `prep` was built from.
pub fn soft_topk_prepared(prep: &Prepared, scores: &[f64], k: f64) -> Result<SoftSelection> {
    check_len(prep.len(), scores.len())?;
    let scale = prep.scale();
    let threshold = prep.fsum_inverse(k)?;
    let a = scale.magnitude();
    let sign = scale.sign();
    let working_b = sign * threshold;

    let n = scores.len();
    let mut p = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut closest = f64::INFINITY;
    for &r in scores {
        let x = (working_b - sign * r) / a;
        p.push(laplace_cdf(x));
        s.push(laplace_density(x) / a);
        closest = closest.min(x.abs());
    }
    let q = softmax_neg_abs(scores, sign * working_b, a, closest);
    let s_total = s.iter().sum();
    Ok(SoftSelection {
        p,
        b: threshold,
        k,
        alpha: scale.alpha(),
        s,
        q,
        s_total,
    })
}

/// `softmax(-|b - r_i|/a)` shifted by the smallest distance `closest`.
fn softmax_neg_abs(scores: &[f64], b: f64, a: f64, closest: f64) -> Vec<f64> {
    let mut q: Vec<f64> = scores
        .iter()
        .map(|&r| exp_nonpos((closest - ((b - r) / a).abs()).min(0.0)))
        .collect();
    let total: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= total);
    q
}

/// Soft ranks: `fsum(r_j) - 1/2`, ascending ranks for positive alpha.
pub fn soft_rank(scores: &[f64], alpha: f64) -> Result<SoftRanks> {
    let prep = prepare(scores, ScaleParam::new(alpha)?)?;
    Ok(soft_rank_prepared(&prep))
}

pub fn soft_rank_prepared(prep: &Prepared) -> SoftRanks {
    let w = prep.coefficients().segment_values();
    let ranks = prep.sorted().inv_perm().iter().map(|&j| w[j] - 0.5).collect();
    SoftRanks {
        ranks,
        alpha: prep.scale().alpha(),
    }
}

/// Soft sort: thresholds at the half-integer levels `1/2, 3/2, ...`.
pub fn soft_sort(scores: &[f64], alpha: f64) -> Result<SoftSorted> {
    let prep = prepare(scores, ScaleParam::new(alpha)?)?;
    soft_sort_prepared(&prep)
}

pub fn soft_sort_prepared(prep: &Prepared) -> Result<SoftSorted> {
    let levels = sort_levels(prep.len());
    Ok(SoftSorted {
        values: prep.fsum_inverse_sorted(&levels)?,
        alpha: prep.scale().alpha(),
    })
}

pub(crate) fn sort_levels(n: usize) -> Vec<f64> {
    (0..n).map(|l| l as f64 + 0.5).collect()
}

pub(crate) fn permutation_levels(n: usize) -> Vec<f64> {
    (1..n).map(|l| l as f64).collect()
}

/// Soft permutation matrix (positive alpha only). `O(n log n)` thresholds
/// plus `O(n^2)` output.
pub fn soft_permutation(scores: &[f64], alpha: f64) -> Result<DoublyStochastic> {
    let scale = ScaleParam::new(alpha)?;
    if scale.is_negative() {
        return Err(LapSumError::NegativeScale(alpha));
    }
    let prep = prepare(scores, scale)?;
    let n = scores.len();
    let levels = prep.fsum_inverse_sorted(&permutation_levels(n))?;

    let len = n.checked_mul(n).ok_or(LapSumError::Allocation { bytes: usize::MAX })?;
    let mut entries: Vec<f64> = Vec::new();
    entries
        .try_reserve_exact(len)
        .map_err(|_| LapSumError::Allocation { bytes: len.saturating_mul(8) })?;
    entries.resize(len, 0.0);

    let fill = |(row, &r): (&mut [f64], &f64)| {
        let mut lo = f64::NEG_INFINITY;
        for (c, e) in row.iter_mut().enumerate() {
            let hi = if c + 1 < n { (levels[c] - r) / alpha } else { f64::INFINITY };
            *e = laplace_cdf_diff(lo, hi).max(0.0);
            lo = hi;
        }
    };
    if n >= 256 {
        entries.par_chunks_mut(n).zip(scores.par_iter()).for_each(fill);
    } else {
        entries.chunks_mut(n).zip(scores.iter()).for_each(fill);
    }
    Ok(DoublyStochastic {
        entries,
        n,
        alpha,
        levels,
    })
}

/// [`soft_topk`] applied to each row of a row-major matrix, rows in parallel.
pub fn soft_topk_rows(data: &[f64], row_len: usize, k: f64, alpha: f64) -> Result<Vec<SoftSelection>> {
    check_rows(data, row_len)?;
    data.par_chunks(row_len).map(|row| soft_topk(row, k, alpha)).collect()
}

/// [`soft_rank`] applied to each row of a row-major matrix.
pub fn soft_rank_rows(data: &[f64], row_len: usize, alpha: f64) -> Result<Vec<SoftRanks>> {
    check_rows(data, row_len)?;
    data.par_chunks(row_len).map(|row| soft_rank(row, alpha)).collect()
}

/// [`soft_sort`] applied to each row of a row-major matrix.
pub fn soft_sort_rows(data: &[f64], row_len: usize, alpha: f64) -> Result<Vec<SoftSorted>> {
    check_rows(data, row_len)?;
    data.par_chunks(row_len).map(|row| soft_sort(row, alpha)).collect()
}

fn check_rows(data: &[f64], row_len: usize) -> Result<()> {
    if row_len == 0 || data.is_empty() {
        return Err(LapSumError::EmptyInput);
    }
    if !data.len().is_multiple_of(row_len) {
        return Err(LapSumError::DimensionMismatch {
            expected: data.len().next_multiple_of(row_len),
            got: data.len(),
        });
    }
    Ok(())
}
