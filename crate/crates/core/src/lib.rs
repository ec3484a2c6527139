//! Differentiable order operations built on sums of Laplace CDFs.
//!
//! For scores `r` and a nonzero scale `alpha`, the function
//! `fsum(x) = sum_i Lap((x - r_i)/alpha)` is strictly monotone from 0 to
//! `n`. Its closed-form inverse gives soft top-k (threshold at level `k`),
//! soft sort (levels `l + 1/2`) and soft permutations (integer levels);
//! evaluating it at the scores gives soft ranks. After an `O(n log n)` sort,
//! evaluation, inversion and every derivative product are linear.
//!
//! ```
//! let p = lapsum::soft_topk(&[0.1, 3.0, 2.0, -1.0], 2.0, -0.05).unwrap().p;
//! assert!((p.iter().sum::<f64>() - 2.0).abs() < 1e-12);
//! assert!(p[1] > 0.99 && p[2] > 0.99);
//! ```

pub mod error;
pub mod fsum;
pub mod grad;
mod kernel;
pub mod laplace;
pub mod ops;
pub mod oracle;
mod scan;

pub use error::{LapSumError, Result};
pub use fsum::{prepare, LapCoefficients, Prepared, ScaleParam, SortedScores};
pub use grad::{
    perm_vjp, rank_jvp, rank_vjp, sort_jvp, sort_vjp, LogPGrads, MultiInverseTangent, TopKTangent,
};
pub use laplace::laplace_cdf;
pub use ops::{
    soft_permutation, soft_rank, soft_rank_prepared, soft_rank_rows, soft_sort, soft_sort_prepared,
    soft_sort_rows, soft_topk, soft_topk_prepared, soft_topk_rows, DoublyStochastic, SoftRanks,
    SoftSelection, SoftSorted,
};
