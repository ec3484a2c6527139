//! Sorted-score preprocessing, linear-time evaluation of the Laplace CDF sum
//! and its closed-form inverse.
//!
//! For ascending scores `r` and scale `a = |alpha|` the sum
//! `F(x) = sum_i Lap((x - r_i) / a)` restricted to a segment `[r_j, r_{j+1}]`
//! is
//!
//! ```text
//! F(x) = (j + 1) - A_j/2 * exp((r_j - x)/a) + B_{j+1}/2 * exp((x - r_{j+1})/a)
//! ```
//!
//! with the anchored sums `A_j = sum_{i<=j} exp((r_i - r_j)/a)` and
//! `B_j = sum_{i>=j} exp((r_j - r_i)/a)`. Both are built by one-step
//! recurrences whose factors are `exp` of non-positive numbers.
//!
//! A negative scale is reduced to the positive one: `F_{-a}(r, x)` equals
//! `F_a(-r, -x)`, so the prepared state stores negated scores and queries and
//! thresholds are reflected at the boundary.

use rayon::prelude::*;

use crate::error::{check_finite, LapSumError, Result};
use crate::laplace::exp_nonpos;
use crate::scan::affine_prefix;

const PARALLEL_MIN: usize = 1 << 15;

/// Nonzero, finite scale parameter. Its sign picks the orientation: positive
/// selects/ranks ascending, negative descending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParam {
    alpha: f64,
}

impl ScaleParam {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(LapSumError::ZeroScale(alpha));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn magnitude(&self) -> f64 {
        self.alpha.abs()
    }

    /// `+1.0` or `-1.0`.
    pub fn sign(&self) -> f64 {
        self.alpha.signum()
    }

    pub fn is_negative(&self) -> bool {
        self.alpha < 0.0
    }
}

/// Scores sorted ascending together with the sort permutation.
///
/// `perm[j]` is the original index of the `j`-th smallest score and
/// `inv_perm[perm[j]] == j`. Ties are broken by original index, so the order
/// is unique and does not depend on the sorting algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedScores {
    values: Vec<f64>,
    perm: Vec<usize>,
    inv_perm: Vec<usize>,
}

impl SortedScores {
    pub fn new(scores: &[f64]) -> Result<Self> {
        check_finite(scores)?;
        Ok(Self::from_iter_unchecked(scores.iter().copied()))
    }

    pub(crate) fn from_iter_unchecked(scores: impl ExactSizeIterator<Item = f64>) -> Self {
        let n = scores.len();
        let mut pairs: Vec<(f64, usize)> = scores.enumerate().map(|(i, v)| (v, i)).collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if n >= PARALLEL_MIN {
            pairs.par_sort_unstable_by(cmp);
        } else {
            pairs.sort_unstable_by(cmp);
        }
        let mut values = Vec::with_capacity(n);
        let mut perm = Vec::with_capacity(n);
        for (v, i) in pairs {
            values.push(v);
            perm.push(i);
        }
        let mut inv_perm = vec![0; n];
        for (j, &i) in perm.iter().enumerate() {
            inv_perm[i] = j;
        }
        Self {
            values,
            perm,
            inv_perm,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn inv_perm(&self) -> &[usize] {
        &self.inv_perm
    }

    /// Reorders a vector given in original order into sorted order.
    pub fn gather(&self, original: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&i| original[i]).collect()
    }

    /// Reorders a vector given in sorted order back into original order.
    pub fn scatter(&self, sorted: &[f64]) -> Vec<f64> {
        self.inv_perm.iter().map(|&j| sorted[j]).collect()
    }
}

/// Anchored prefix/suffix exponential sums and the values of the CDF sum at
/// the sorted scores.
#[derive(Debug, Clone, PartialEq)]
pub struct LapCoefficients {
    prefix: Vec<f64>,
    suffix: Vec<f64>,
    /// `exp((r_j - r_{j+1})/a)`, length `n - 1`.
    gap_factors: Vec<f64>,
    segment_values: Vec<f64>,
    scale: f64,
}

impl LapCoefficients {
    fn build(sorted: &[f64], scale: f64) -> Self {
        let n = sorted.len();
        let gap = |j: usize| exp_nonpos((sorted[j] - sorted[j + 1]) / scale);
        let gap_factors: Vec<f64> = if n >= PARALLEL_MIN {
            (0..n - 1).into_par_iter().map(gap).collect()
        } else {
            (0..n.saturating_sub(1)).map(gap).collect()
        };

        // A_j = 1 + E_{j-1} A_{j-1}
        let mut factors = vec![0.0; n];
        factors[1..].copy_from_slice(&gap_factors);
        let mut prefix = vec![0.0; n];
        affine_prefix(&factors, &mut prefix);

        // B_j = 1 + E_j B_{j+1}, scanned on the reversed sequence.
        for (t, f) in factors.iter_mut().enumerate().skip(1) {
            *f = gap_factors[n - 1 - t];
        }
        let mut suffix = vec![0.0; n];
        affine_prefix(&factors, &mut suffix);
        suffix.reverse();
        drop(factors);

        let value = |j: usize| {
            if j + 1 == n {
                n as f64 - 0.5 * prefix[j]
            } else {
                (j + 1) as f64 - 0.5 * prefix[j] + 0.5 * suffix[j + 1] * gap_factors[j]
            }
        };
        let segment_values: Vec<f64> = if n >= PARALLEL_MIN {
            (0..n).into_par_iter().map(value).collect()
        } else {
            (0..n).map(value).collect()
        };

        Self {
            prefix,
            suffix,
            gap_factors,
            segment_values,
            scale,
        }
    }

    /// `A_j = sum_{i<=j} exp((r_i - r_j)/a)`.
    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    /// `B_j = sum_{i>=j} exp((r_j - r_i)/a)`.
    pub fn suffix(&self) -> &[f64] {
        &self.suffix
    }

    /// CDF sum evaluated at each sorted score; non-decreasing, strictly
    /// increasing away from ties.
    pub fn segment_values(&self) -> &[f64] {
        &self.segment_values
    }

    /// The magnitude `|alpha|` the sums were built with.
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Everything needed to evaluate and invert the CDF sum of one score vector.
///
/// Immutable once built; share freely between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    sorted: SortedScores,
    coeffs: LapCoefficients,
    scale: ScaleParam,
}

/// Sorts the scores (negated when `alpha < 0`) and builds the coefficient
/// tables. `O(n log n)`.
pub fn prepare(scores: &[f64], scale: ScaleParam) -> Result<Prepared> {
    check_finite(scores)?;
    let sorted = if scale.is_negative() {
        SortedScores::from_iter_unchecked(scores.iter().map(|v| -v))
    } else {
        SortedScores::from_iter_unchecked(scores.iter().copied())
    };
    let coeffs = LapCoefficients::build(sorted.values(), scale.magnitude());
    Ok(Prepared {
        sorted,
        coeffs,
        scale,
    })
}

impl Prepared {
    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn scale(&self) -> ScaleParam {
        self.scale
    }

    /// Scores in working orientation (negated when `alpha < 0`), ascending.
    pub fn sorted(&self) -> &SortedScores {
        &self.sorted
    }

    pub fn coefficients(&self) -> &LapCoefficients {
        &self.coeffs
    }

    /// The original scores, reconstructed in input order.
    pub fn scores(&self) -> Vec<f64> {
        let s = self.scale.sign();
        self.sorted
            .inv_perm()
            .iter()
            .map(|&j| s * self.sorted.values()[j])
            .collect()
    }

    /// `sum_i Lap((x - r_i)/alpha)` at a single point. `O(log n)`.
    pub fn fsum_at(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(LapSumError::NonFiniteInput { index: 0, value: x });
        }
        let x = self.scale.sign() * x;
        let r = self.sorted.values();
        let upper = r.partition_point(|&v| v <= x);
        Ok(self.eval_working(x, upper))
    }

    /// Evaluates the CDF sum at every query, results in query order.
    /// `O(n + m log m)`: the queries are sorted and merged with the scores.
    pub fn fsum_eval(&self, xs: &[f64]) -> Result<Vec<f64>> {
        if let Some(index) = xs.iter().position(|v| !v.is_finite()) {
            return Err(LapSumError::NonFiniteInput {
                index,
                value: xs[index],
            });
        }
        let sign = self.scale.sign();
        let mut order: Vec<(f64, usize)> = xs.iter().enumerate().map(|(i, &x)| (sign * x, i)).collect();
        order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let r = self.sorted.values();
        let mut out = vec![0.0; xs.len()];
        let mut upper = 0;
        for (x, i) in order {
            while upper < r.len() && r[upper] <= x {
                upper += 1;
            }
            out[i] = self.eval_working(x, upper);
        }
        Ok(out)
    }

    /// Evaluates in working orientation; `upper` counts the scores `<= x`.
    pub(crate) fn eval_working(&self, x: f64, upper: usize) -> f64 {
        let r = self.sorted.values();
        let n = r.len();
        let a = self.coeffs.scale;
        let (pre, suf) = (&self.coeffs.prefix, &self.coeffs.suffix);
        if upper == 0 {
            0.5 * suf[0] * exp_nonpos((x - r[0]) / a)
        } else if upper == n {
            n as f64 - 0.5 * pre[n - 1] * exp_nonpos((r[n - 1] - x) / a)
        } else {
            let j = upper - 1;
            upper as f64 - 0.5 * pre[j] * exp_nonpos((r[j] - x) / a)
                + 0.5 * suf[j + 1] * exp_nonpos((x - r[j + 1]) / a)
        }
    }

    fn check_target(&self, k: f64) -> Result<()> {
        let n = self.len();
        if !(k > 0.0 && k < n as f64) {
            return Err(LapSumError::KOutOfRange { k, n });
        }
        Ok(())
    }

    /// The unique `b` with `fsum(b) = k`, for `0 < k < n`. `O(log n)`.
    pub fn fsum_inverse(&self, k: f64) -> Result<f64> {
        self.check_target(k)?;
        let w = &self.coeffs.segment_values;
        let upper = w.partition_point(|&v| v <= k);
        Ok(self.scale.sign() * self.invert_working(k, upper))
    }

    /// Inverts an ascending batch of targets by a single merge over the
    /// segment table. `O(n + L)`.
    pub fn fsum_inverse_sorted(&self, ks: &[f64]) -> Result<Vec<f64>> {
        let thresholds = self.working_thresholds(ks)?;
        let sign = self.scale.sign();
        Ok(thresholds.into_iter().map(|b| sign * b).collect())
    }

    /// Thresholds in working orientation (ascending in `k` regardless of the
    /// sign of alpha).
    pub(crate) fn working_thresholds(&self, ks: &[f64]) -> Result<Vec<f64>> {
        for (i, &k) in ks.iter().enumerate() {
            self.check_target(k)?;
            if i > 0 && ks[i - 1] > k {
                return Err(LapSumError::UnsortedTargets { index: i });
            }
        }
        let w = &self.coeffs.segment_values;
        let mut upper = 0;
        Ok(ks
            .iter()
            .map(|&k| {
                while upper < w.len() && w[upper] <= k {
                    upper += 1;
                }
                self.invert_working(k, upper)
            })
            .collect())
    }

    /// Solves `fsum(x) = k` in working orientation; `upper` counts the
    /// segment values `<= k` (rightmost segment on ties).
    fn invert_working(&self, k: f64, upper: usize) -> f64 {
        let r = self.sorted.values();
        let n = r.len();
        let a = self.coeffs.scale;
        let (pre, suf) = (&self.coeffs.prefix, &self.coeffs.suffix);
        if upper == 0 {
            return r[0] + a * ((2.0 * k).ln() - suf[0].ln());
        }
        if upper == n {
            return r[n - 1] - a * ((2.0 * (n as f64 - k)).ln() - pre[n - 1].ln());
        }
        let j = upper - 1;
        // Quadratic in exp((x - r_{j+1})/a) (or exp((r_j - x)/a) when the
        // target is below the integer level). The root is formed in log
        // space so wide gaps cannot underflow it.
        let d = k - upper as f64;
        let log_a = pre[j].ln();
        let log_b = suf[j + 1].ln();
        let log_prod = log_a + log_b - (r[j + 1] - r[j]) / a;
        let x = if d >= 0.0 {
            r[j + 1] + a * (log_root(d, log_prod) - log_b)
        } else {
            r[j] - a * (log_root(-d, log_prod) - log_a)
        };
        x.clamp(r[j], r[j + 1])
    }
}

/// `ln(d + sqrt(d^2 + exp(log_p)))` for `d >= 0`, without overflow or
/// underflow of the intermediate square root.
fn log_root(d: f64, log_p: f64) -> f64 {
    if d == 0.0 {
        return 0.5 * log_p;
    }
    let log_d = d.ln();
    let m = (2.0 * log_d).max(log_p);
    let half = 0.5 * m;
    half + (exp_nonpos(log_d - half) + (exp_nonpos(2.0 * log_d - m) + exp_nonpos(log_p - m)).sqrt()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplace::laplace_cdf;

    fn direct(r: &[f64], alpha: f64, x: f64) -> f64 {
        r.iter().map(|&ri| laplace_cdf((x - ri) / alpha)).sum()
    }

    fn bisect(r: &[f64], alpha: f64, k: f64) -> f64 {
        let (mut lo, mut hi) = (-1e3, 1e3);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if (direct(r, alpha, mid) < k) == (alpha > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn prep(r: &[f64], alpha: f64) -> Prepared {
        prepare(r, ScaleParam::new(alpha).unwrap()).unwrap()
    }

    #[test]
    fn scale_param_rejects_zero() {
        assert_eq!(ScaleParam::new(0.0), Err(LapSumError::ZeroScale(0.0)));
        assert!(ScaleParam::new(f64::NAN).is_err());
        assert!(ScaleParam::new(-2.0).unwrap().is_negative());
    }

    #[test]
    fn sorted_scores_permutations() {
        let s = SortedScores::new(&[3.0, 1.0, 2.0, 1.0]).unwrap();
        assert_eq!(s.values(), &[1.0, 1.0, 2.0, 3.0]);
        assert_eq!(s.perm(), &[1, 3, 2, 0]);
        for (j, &i) in s.perm().iter().enumerate() {
            assert_eq!(s.inv_perm()[i], j);
        }
        assert_eq!(s.scatter(s.values()), vec![3.0, 1.0, 2.0, 1.0]);
        assert_eq!(s.gather(&[3.0, 1.0, 2.0, 1.0]), s.values());
    }

    #[test]
    fn rejects_bad_input() {
        let sc = ScaleParam::new(1.0).unwrap();
        assert_eq!(prepare(&[], sc), Err(LapSumError::EmptyInput));
        assert!(matches!(
            prepare(&[0.0, f64::INFINITY], sc),
            Err(LapSumError::NonFiniteInput { index: 1, .. })
        ));
        let p = prep(&[0.0, 1.0], 1.0);
        assert!(matches!(p.fsum_inverse(0.0), Err(LapSumError::KOutOfRange { .. })));
        assert!(matches!(p.fsum_inverse(2.0), Err(LapSumError::KOutOfRange { .. })));
        assert!(matches!(p.fsum_eval(&[f64::NAN]), Err(LapSumError::NonFiniteInput { .. })));
        assert!(matches!(
            p.fsum_inverse_sorted(&[1.5, 0.5]),
            Err(LapSumError::UnsortedTargets { index: 1 })
        ));
    }

    #[test]
    fn single_element_tables() {
        let p = prep(&[4.2], 0.7);
        assert_eq!(p.coefficients().prefix(), &[1.0]);
        assert_eq!(p.coefficients().suffix(), &[1.0]);
        assert_eq!(p.coefficients().segment_values(), &[0.5]);
        assert!((p.fsum_inverse(0.5).unwrap() - 4.2).abs() < 1e-15);
    }

    #[test]
    fn equal_pair_tables() {
        let p = prep(&[0.0, 0.0], 1.0);
        assert_eq!(p.coefficients().prefix(), &[1.0, 2.0]);
        assert_eq!(p.coefficients().suffix(), &[2.0, 1.0]);
        assert_eq!(p.coefficients().segment_values(), &[1.0, 1.0]);
    }

    #[test]
    fn three_point_tables_match_direct_sums() {
        let r = [0.0, 1.0, 2.0];
        let p = prep(&r, 1.0);
        let c = p.coefficients();
        for j in 0..3 {
            let a: f64 = (0..=j).map(|i| (r[i] - r[j]).exp()).sum();
            let b: f64 = (j..3).map(|i| (r[j] - r[i]).exp()).sum();
            assert!((c.prefix()[j] - a).abs() < 1e-15);
            assert!((c.suffix()[j] - b).abs() < 1e-15);
            assert!((c.segment_values()[j] - direct(&r, 1.0, r[j])).abs() < 1e-15);
        }
        // middle point of equispaced scores
        assert!((c.segment_values()[1] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn eval_reference_points() {
        assert_eq!(prep(&[5.0], 1.0).fsum_eval(&[5.0]).unwrap(), vec![0.5]);
        assert_eq!(prep(&[0.0; 6], 0.3).fsum_eval(&[0.0]).unwrap(), vec![3.0]);
        let v = prep(&[0.0, 1.0, 2.0], 1.0).fsum_eval(&[1.0]).unwrap()[0];
        assert!((v - 1.5).abs() < 1e-15);
    }

    #[test]
    fn eval_matches_direct_on_grid_both_signs() {
        let r = [0.3, -1.2, 2.5, 0.3, 0.9, -0.4];
        for &alpha in &[0.25, 1.0, -0.5, -3.0] {
            let p = prep(&r, alpha);
            let xs: Vec<f64> = (-40..40).map(|i| i as f64 * 0.11).collect();
            let got = p.fsum_eval(&xs).unwrap();
            for (&x, &g) in xs.iter().zip(&got) {
                let want = direct(&r, alpha, x);
                assert!((g - want).abs() <= 1e-13 * want.max(1.0), "alpha {alpha} x {x}: {g} vs {want}");
                assert_eq!(g, p.fsum_at(x).unwrap());
            }
        }
    }

    #[test]
    fn inverse_reference_points() {
        assert!((prep(&[7.0], 1.0).fsum_inverse(0.5).unwrap() - 7.0).abs() < 1e-15);
        assert!(prep(&[0.0; 4], 1.0).fsum_inverse(2.0).unwrap().abs() < 1e-15);
        let r = [0.0, 1.0, 2.0];
        let b = prep(&r, 1.0).fsum_inverse(1.0).unwrap();
        assert!((b - bisect(&r, 1.0, 1.0)).abs() < 1e-10);
    }

    #[test]
    fn inverse_matches_bisection_across_segments() {
        let r = [-2.0, -0.5, -0.5, 0.1, 1.7, 4.0];
        for &alpha in &[0.1, 1.0, 5.0, -0.3, -2.0] {
            let p = prep(&r, alpha);
            for i in 1..120 {
                let k = i as f64 * 0.05;
                let b = p.fsum_inverse(k).unwrap();
                assert!((b - bisect(&r, alpha, k)).abs() < 1e-9, "alpha {alpha} k {k}");
            }
        }
    }

    #[test]
    fn batch_inverse_equals_single() {
        let r = [0.5, -1.0, 3.0, 2.0, 2.0, -0.7, 1.1];
        for &alpha in &[0.4, -1.5] {
            let p = prep(&r, alpha);
            let ks: Vec<f64> = (1..70).map(|i| i as f64 * 0.1).collect();
            let batch = p.fsum_inverse_sorted(&ks).unwrap();
            for (&k, &b) in ks.iter().zip(&batch) {
                assert_eq!(b, p.fsum_inverse(k).unwrap());
            }
        }
    }

    #[test]
    fn wide_gaps_do_not_underflow() {
        // Gaps of 10 at scale 1e-3 put exp(-gap/a) far below the smallest double.
        let r = [0.0, 10.0, 20.0];
        let p = prep(&r, 1e-3);
        for &k in &[0.3, 1.0, 1.5, 2.0, 2.9] {
            let b = p.fsum_inverse(k).unwrap();
            assert!(b.is_finite());
            let back = p.fsum_at(b).unwrap();
            assert!((back - k).abs() < 1e-9, "k {k}: b {b} back {back}");
        }
        // k = 1 with symmetric neighbours sits halfway between 0 and 10.
        assert!((p.fsum_inverse(1.0).unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn scores_round_trip() {
        let r = [3.0, -1.0, 2.0];
        assert_eq!(prep(&r, -2.0).scores(), r.to_vec());
        assert_eq!(prep(&r, 2.0).scores(), r.to_vec());
    }
}
