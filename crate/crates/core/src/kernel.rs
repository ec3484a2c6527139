//! Two-pointer evaluation of Laplace kernel sums
//! `out_t = sum_s w_s * exp(-|t - y_s| / a)` for ascending sources `y` and
//! ascending targets `t` in `O(|y| + |t|)`.
//!
//! The sum splits into the sources at or left of the target and those to its
//! right. The left part is carried forward through the targets and rescaled
//! by `exp((t_prev - t)/a)`; the right part is carried backward. Every
//! exponent is non-positive.

use crate::laplace::exp_nonpos;

pub(crate) fn kernel_sum(sources: &[f64], weights: &[f64], targets: &[f64], scale: f64) -> Vec<f64> {
    debug_assert_eq!(sources.len(), weights.len());
    let mut out = vec![0.0; targets.len()];

    let mut acc = 0.0;
    let mut next = 0;
    let mut prev = f64::NEG_INFINITY;
    for (o, &t) in out.iter_mut().zip(targets) {
        if prev > f64::NEG_INFINITY {
            acc *= exp_nonpos((prev - t) / scale);
        }
        while next < sources.len() && sources[next] <= t {
            acc += weights[next] * exp_nonpos((sources[next] - t) / scale);
            next += 1;
        }
        *o = acc;
        prev = t;
    }

    let mut acc = 0.0;
    let mut next = sources.len();
    let mut prev = f64::INFINITY;
    for (o, &t) in out.iter_mut().zip(targets).rev() {
        if prev < f64::INFINITY {
            acc *= exp_nonpos((t - prev) / scale);
        }
        while next > 0 && sources[next - 1] > t {
            acc += weights[next - 1] * exp_nonpos((t - sources[next - 1]) / scale);
            next -= 1;
        }
        *o += acc;
        prev = t;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(sources: &[f64], weights: &[f64], targets: &[f64], scale: f64) -> Vec<f64> {
        targets
            .iter()
            .map(|&t| {
                sources
                    .iter()
                    .zip(weights)
                    .map(|(&y, &w)| w * (-(t - y).abs() / scale).exp())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_with_interleaving_and_ties() {
        let sources = [-3.0, -1.0, -1.0, 0.0, 0.5, 2.0, 6.0];
        let weights = [1.0, -0.5, 2.0, 0.25, 1.5, -1.0, 3.0];
        let targets = [-5.0, -1.0, -0.2, 0.5, 0.5, 1.0, 7.0, 9.0];
        for &scale in &[0.3, 1.0, 4.0] {
            let got = kernel_sum(&sources, &weights, &targets, scale);
            let want = naive(&sources, &weights, &targets, scale);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-13, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn empty_sides() {
        assert!(kernel_sum(&[], &[], &[1.0], 1.0) == vec![0.0]);
        assert!(kernel_sum(&[1.0], &[2.0], &[], 1.0).is_empty());
        assert_eq!(kernel_sum(&[1.0], &[2.0], &[1.0], 1.0), vec![2.0]);
    }
}
