//! Scalar functions of the standard Laplace distribution.
//!
//! Every exponential on the hot paths of this crate goes through
//! [`exp_nonpos`], which asserts (in debug builds) that its argument is not
//! positive. The anchored formulations used by the evaluator, the inverse and
//! the kernel sums never need anything else.

use std::f64::consts::LN_2;

/// `exp(x)` for `x <= 0`. Debug builds assert the precondition.
#[inline(always)]
pub(crate) fn exp_nonpos(x: f64) -> f64 {
    debug_assert!(x <= 0.0 || x.is_nan(), "positive exponent {x} in anchored evaluation");
    x.exp()
}

/// Laplace CDF: `exp(x)/2` for `x <= 0`, `1 - exp(-x)/2` otherwise.
#[inline]
pub fn laplace_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.5 * exp_nonpos(x)
    } else {
        1.0 - 0.5 * exp_nonpos(-x)
    }
}

/// Laplace density `exp(-|x|)/2`, equal to `min(F(x), 1 - F(x))`.
#[inline]
pub fn laplace_density(x: f64) -> f64 {
    0.5 * exp_nonpos(-x.abs())
}

/// `log F(x)` without forming `F(x)` first.
#[inline]
pub fn laplace_log_cdf(x: f64) -> f64 {
    if x < 0.0 {
        x - LN_2
    } else {
        (-0.5 * exp_nonpos(-x)).ln_1p()
    }
}

/// `F(hi) - F(lo)` for `lo <= hi`, computed from the tails on each side so
/// that no two values close to 1 are subtracted. Infinite endpoints are
/// allowed.
#[inline]
pub fn laplace_cdf_diff(lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi || lo.is_nan() || hi.is_nan());
    if lo == f64::NEG_INFINITY {
        return laplace_cdf(hi);
    }
    if hi == f64::INFINITY {
        return laplace_cdf(-lo);
    }
    if lo > 0.0 {
        0.5 * (exp_nonpos(-lo) - exp_nonpos(-hi))
    } else if hi <= 0.0 {
        0.5 * (exp_nonpos(hi) - exp_nonpos(lo))
    } else {
        1.0 - 0.5 * (exp_nonpos(lo) + exp_nonpos(-hi))
    }
}

/// The ratio `density(x) / F(x)`: 1 on the left half-line and
/// `1/F(x) - 1` on the right.
#[inline]
pub fn density_over_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        let tail = 0.5 * exp_nonpos(-x);
        tail / (1.0 - tail)
    }
}
