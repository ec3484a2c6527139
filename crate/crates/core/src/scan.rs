//! Prefix scan for the affine recurrence `x_0 = 1`, `x_j = 1 + f_j * x_{j-1}`.
//!
//! Affine maps `x -> m*x + c` compose associatively, so the recurrence is a
//! prefix scan. Large inputs are cut into fixed-size blocks that are reduced
//! in parallel; the block size does not depend on the thread count, so the
//! result is the same whatever pool the call runs in.

use rayon::prelude::*;

const BLOCK: usize = 1 << 14;
const PARALLEL_MIN: usize = 1 << 17;

/// Fills `out[j]` with the recurrence value; `factors[0]` is ignored.
pub(crate) fn affine_prefix(factors: &[f64], out: &mut [f64]) {
    debug_assert_eq!(factors.len(), out.len());
    if out.is_empty() {
        return;
    }
    if out.len() < PARALLEL_MIN {
        sequential(factors, out, 1.0, 0);
        return;
    }

    // Each block maps its incoming value x to m*x + c.
    let summaries: Vec<(f64, f64)> = factors
        .par_chunks(BLOCK)
        .enumerate()
        .map(|(b, chunk)| {
            let skip = usize::from(b == 0);
            chunk[skip..]
                .iter()
                .fold((1.0, 0.0), |(m, c), &f| (f * m, 1.0 + f * c))
        })
        .collect();

    let mut starts = Vec::with_capacity(summaries.len());
    // Block 0 starts from the seed x_0 = 1; later blocks from the value
    // preceding them.
    let mut carry = 1.0;
    for &(m, c) in &summaries {
        starts.push(carry);
        carry = m * carry + c;
    }

    out.par_chunks_mut(BLOCK)
        .zip(factors.par_chunks(BLOCK))
        .zip(starts.par_iter())
        .enumerate()
        .for_each(|(b, ((o, f), &start))| {
            if b == 0 {
                sequential(f, o, start, 0);
            } else {
                sequential(f, o, start, 1);
            }
        });
}

/// If `from_prev == 0`, `out[0] = seed` and the loop starts at 1; otherwise
/// `seed` is the value preceding `out[0]`.
fn sequential(factors: &[f64], out: &mut [f64], seed: f64, from_prev: usize) {
    let mut x = seed;
    let start = if from_prev == 0 {
        out[0] = seed;
        1
    } else {
        0
    };
    for j in start..out.len() {
        x = 1.0 + factors[j] * x;
        out[j] = x;
    }
}
