//! Analytic derivatives of the soft order operations.
//!
//! Dense Jacobians are never formed. For top-k the Jacobian of `p` with
//! respect to the scores is `sign(alpha) * (s q^T - diag(s))`, so both
//! products cost `O(n)` given the forward state. Thresholds at several
//! levels share the matrix `Q` of per-level softmax weights; products with
//! `Q` and `Q^T` are Laplace kernel sums evaluated in `O(n + L)`.

use crate::error::{check_len, LapSumError, Result};
use crate::fsum::Prepared;
use crate::kernel::kernel_sum;
use crate::laplace::{density_over_cdf, laplace_density, laplace_log_cdf};
use crate::ops::{permutation_levels, sort_levels, SoftSelection};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Borrowed view of a soft top-k result and the scores it came from.
#[derive(Debug, Clone, Copy)]
pub struct TopKTangent<'a> {
    sel: &'a SoftSelection,
    scores: &'a [f64],
}

/// Derivatives of `u = log p`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPGrads {
    pub du_dk: Vec<f64>,
    pub du_dalpha: Vec<f64>,
    /// Jacobian of `u` with respect to the scores applied to `v`.
    pub jvp: Vec<f64>,
    /// `v^T` times the same Jacobian.
    pub vjp: Vec<f64>,
}

impl<'a> TopKTangent<'a> {
    pub fn new(sel: &'a SoftSelection, scores: &'a [f64]) -> Result<Self> {
        check_len(sel.len(), scores.len())?;
        Ok(Self { sel, scores })
    }

    pub fn selection(&self) -> &SoftSelection {
        self.sel
    }

    fn sign(&self) -> f64 {
        self.sel.alpha.signum()
    }

    /// `(b - r_i) / alpha` for every element.
    fn arguments(&self) -> impl Iterator<Item = f64> + '_ {
        let (b, alpha) = (self.sel.b, self.sel.alpha);
        self.scores.iter().map(move |&r| (b - r) / alpha)
    }

    /// `<q, r - b>`, the softmax-weighted offset of the scores from the
    /// threshold.
    fn weighted_offset(&self) -> f64 {
        let b = self.sel.b;
        self.sel.q.iter().zip(self.scores).map(|(q, r)| q * (r - b)).sum()
    }

    /// `db/dk = sign(alpha) / S`.
    pub fn db_dk(&self) -> f64 {
        self.sign() / self.sel.s_total
    }

    /// `db/dalpha = (b - <q, r>) / alpha`.
    pub fn db_dalpha(&self) -> f64 {
        -self.weighted_offset() / self.sel.alpha
    }

    /// `J v = sign(alpha) (<q, v> s - s * v)`.
    pub fn jvp(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.sel.len(), v.len())?;
        let qv = dot(&self.sel.q, v);
        let sign = self.sign();
        Ok(self.sel.s.iter().zip(v).map(|(s, v)| sign * s * (qv - v)).collect())
    }

    /// `v^T J = sign(alpha) (<s, v> q - s * v)`.
    pub fn vjp(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.sel.len(), v.len())?;
        let sv = dot(&self.sel.s, v);
        let sign = self.sign();
        Ok(self
            .sel
            .q
            .iter()
            .zip(&self.sel.s)
            .zip(v)
            .map(|((q, s), v)| sign * (sv * q - s * v))
            .collect())
    }

    /// `dp/dk = q`.
    pub fn dp_dk(&self) -> Vec<f64> {
        self.sel.q.clone()
    }

    /// `dp/dalpha = s * (r - <q, r>) / |alpha|`; sums to zero.
    pub fn dp_dalpha(&self) -> Vec<f64> {
        let (b, a) = (self.sel.b, self.sel.alpha.abs());
        let offset = self.weighted_offset();
        self.sel
            .s
            .iter()
            .zip(self.scores)
            .map(|(s, r)| s * ((r - b) - offset) / a)
            .collect()
    }

    /// `log p`, accurate also for `p` close to 1.
    pub fn log_p(&self) -> Vec<f64> {
        self.arguments().map(laplace_log_cdf).collect()
    }

    /// The four derivatives of `u = log p`, each `O(n)`. With
    /// `h = density / p` componentwise:
    ///
    /// * `du/dk = h / (|alpha| S)`
    /// * `du/dalpha = h * (r - <q, r>) / alpha^2`
    /// * `Du v = (<q, v> h - v * h) / alpha`
    /// * `v^T Du = (<v, h> q - v * h) / alpha`
    pub fn log_p_grads(&self, v: &[f64]) -> Result<LogPGrads> {
        check_len(self.sel.len(), v.len())?;
        let alpha = self.sel.alpha;
        let h: Vec<f64> = self.arguments().map(density_over_cdf).collect();
        let by_k = 1.0 / (alpha.abs() * self.sel.s_total);
        let du_dk = h.iter().map(|h| h * by_k).collect();

        let (b, offset) = (self.sel.b, self.weighted_offset());
        let alpha_sq = alpha * alpha;
        let du_dalpha = h
            .iter()
            .zip(self.scores)
            .map(|(h, r)| h * ((r - b) - offset) / alpha_sq)
            .collect();

        let qv = dot(&self.sel.q, v);
        let jvp = h.iter().zip(v).map(|(h, v)| h * (qv - v) / alpha).collect();
        let vh = dot(v, &h);
        let vjp = self
            .sel
            .q
            .iter()
            .zip(&h)
            .zip(v)
            .map(|((q, h), v)| (vh * q - v * h) / alpha)
            .collect();
        Ok(LogPGrads {
            du_dk,
            du_dalpha,
            jvp,
            vjp,
        })
    }
}

/// Thresholds at an ascending list of targets with the per-level sums `S_m`
/// and implicit access to `Q` (row `m` is the softmax of
/// `-|b_m - r_i|/|alpha|` over `i`).
#[derive(Debug, Clone)]
pub struct MultiInverseTangent<'a> {
    prep: &'a Prepared,
    thresholds: Vec<f64>,
    /// Thresholds in the prepared (possibly reflected) orientation, ascending.
    working: Vec<f64>,
    /// `D_m = sum_i exp(-|b_m - r_i|/|alpha|)`.
    norms: Vec<f64>,
    s_levels: Vec<f64>,
}

impl<'a> MultiInverseTangent<'a> {
    /// `O(n + L)` after `prepare`. `ks` must be ascending and inside `(0, n)`.
    pub fn new(prep: &'a Prepared, ks: &[f64]) -> Result<Self> {
        let working = prep.working_thresholds(ks)?;
        let sign = prep.scale().sign();
        let thresholds = working.iter().map(|b| sign * b).collect();
        let a = prep.scale().magnitude();
        let r = prep.sorted().values();
        let ones = vec![1.0; r.len()];
        let norms = kernel_sum(r, &ones, &working, a);
        let s_levels = norms.iter().map(|d| d / (2.0 * a)).collect();
        Ok(Self {
            prep,
            thresholds,
            working,
            norms,
            s_levels,
        })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// `S_m = sum_i exp(-|b_m - r_i|/|alpha|) / (2|alpha|)`.
    pub fn s_per_level(&self) -> &[f64] {
        &self.s_levels
    }

    /// Diagonal of `dB/dk`: `sign(alpha) / S_m`.
    pub fn db_dk(&self) -> Vec<f64> {
        let sign = self.prep.scale().sign();
        self.s_levels.iter().map(|s| sign / s).collect()
    }

    /// `dB/dalpha = (b - Q r) / alpha`.
    pub fn db_dalpha(&self) -> Vec<f64> {
        let scale = self.prep.scale();
        let r = self.prep.sorted().values();
        let weighted = self.apply_sorted(r);
        self.working
            .iter()
            .zip(weighted)
            .map(|(b, qr)| scale.sign() * (b - qr) / scale.alpha())
            .collect()
    }

    /// `Q v` for `v` of length `n` in input order.
    pub fn qvp(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.prep.len(), v.len())?;
        Ok(self.apply_sorted(&self.prep.sorted().gather(v)))
    }

    /// `w^T Q` for `w` of length `L`, returned in input order.
    pub fn vqp(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len(self.working.len(), w.len())?;
        let weights: Vec<f64> = w.iter().zip(&self.norms).map(|(w, d)| w / d).collect();
        let a = self.prep.scale().magnitude();
        let sorted = kernel_sum(&self.working, &weights, self.prep.sorted().values(), a);
        Ok(self.prep.sorted().scatter(&sorted))
    }

    fn apply_sorted(&self, v_sorted: &[f64]) -> Vec<f64> {
        let a = self.prep.scale().magnitude();
        let sums = kernel_sum(self.prep.sorted().values(), v_sorted, &self.working, a);
        sums.iter().zip(&self.norms).map(|(s, d)| s / d).collect()
    }
}

/// Laplace kernel sums over the scores themselves, in sorted order.
fn self_kernel(prep: &Prepared, v_sorted: &[f64]) -> Vec<f64> {
    let r = prep.sorted().values();
    kernel_sum(r, v_sorted, r, prep.scale().magnitude())
}

/// Jacobian of the soft ranks applied to `v`. The Jacobian is symmetric, so
/// this is also the vector-Jacobian product. `O(n)` after `prepare`.
pub fn rank_jvp(prep: &Prepared, v: &[f64]) -> Result<Vec<f64>> {
    check_len(prep.len(), v.len())?;
    let sorted = prep.sorted();
    let v_sorted = sorted.gather(v);
    let total = self_kernel(prep, &vec![1.0; prep.len()]);
    let weighted = self_kernel(prep, &v_sorted);
    let factor = 0.5 / prep.scale().alpha();
    let out: Vec<f64> = v_sorted
        .iter()
        .zip(&total)
        .zip(&weighted)
        .map(|((v, t), w)| factor * (v * t - w))
        .collect();
    Ok(sorted.scatter(&out))
}

/// `v^T` times the Jacobian of the soft ranks.
pub fn rank_vjp(prep: &Prepared, v: &[f64]) -> Result<Vec<f64>> {
    rank_jvp(prep, v)
}

/// Jacobian of the soft sort (thresholds at `l + 1/2`) applied to `v`.
pub fn sort_jvp(prep: &Prepared, v: &[f64]) -> Result<Vec<f64>> {
    MultiInverseTangent::new(prep, &sort_levels(prep.len()))?.qvp(v)
}

/// `w^T` times the Jacobian of the soft sort.
pub fn sort_vjp(prep: &Prepared, w: &[f64]) -> Result<Vec<f64>> {
    MultiInverseTangent::new(prep, &sort_levels(prep.len()))?.vqp(w)
}

/// Gradient of `sum_{i,c} V_{ic} M_{ic}` with respect to the scores, where
/// `M` is the soft permutation matrix and `V` a row-major `n x n`
/// cotangent. `O(n^2)`, the size of the cotangent.
pub fn perm_vjp(prep: &Prepared, cotangent: &[f64]) -> Result<Vec<f64>> {
    let scale = prep.scale();
    if scale.is_negative() {
        return Err(LapSumError::NegativeScale(scale.alpha()));
    }
    let n = prep.len();
    check_len(n * n, cotangent.len())?;
    let tangent = MultiInverseTangent::new(prep, &permutation_levels(n))?;
    let levels = tangent.thresholds();
    let alpha = scale.alpha();
    let scores = prep.scores();

    // Entry (i, c) is P(c+1, i) - P(c, i) with P(c, i) = Lap((b_c - r_i)/alpha),
    // so P(c, i) enters with weight V[i][c-1] - V[i][c]. Differentiating
    // P(c, i) gives phi_{ci} (Q_{c,t} - delta_{it}) / alpha.
    let mut level_weights = vec![0.0; levels.len()];
    let mut direct = vec![0.0; n];
    for (i, (&r, row)) in scores.iter().zip(cotangent.chunks(n)).enumerate() {
        for (c, &b) in levels.iter().enumerate() {
            let w = row[c] - row[c + 1];
            let phi = laplace_density((b - r) / alpha) / alpha;
            level_weights[c] += w * phi;
            direct[i] += w * phi;
        }
    }
    let through_levels = tangent.vqp(&level_weights)?;
    Ok(through_levels.iter().zip(&direct).map(|(l, d)| l - d).collect())
}
