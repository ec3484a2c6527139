use thiserror::Error;

pub type Result<T> = std::result::Result<T, LapSumError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LapSumError {
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite value {value} at index {index}")]
    NonFiniteInput { index: usize, value: f64 },
    #[error("scale parameter alpha must be nonzero and finite, got {0}")]
    ZeroScale(f64),
    #[error("scale parameter alpha must be positive for this operation, got {0}")]
    NegativeScale(f64),
    #[error("target {k} outside the open interval (0, {n})")]
    KOutOfRange { k: f64, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("targets must be sorted ascending (violation at index {index})")]
    UnsortedTargets { index: usize },
    #[error("bisection did not converge after {iterations} iterations (residual {residual:e})")]
    BisectionFailed { iterations: usize, residual: f64 },
    #[error("allocation of {bytes} bytes failed")]
    Allocation { bytes: usize },
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(LapSumError::EmptyInput);
    }
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(LapSumError::NonFiniteInput {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(LapSumError::DimensionMismatch { expected, got })
    }
}
