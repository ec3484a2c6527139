//! Run one op on scores read from a file and write the result as CSV.
//!
//! Input is either text (one decimal per line, blank lines ignored) or
//! binary: the magic bytes `LPS1`, a little-endian `u64` count, then that
//! many little-endian `f64` values.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use lapsum::{soft_permutation, soft_rank, soft_sort, soft_topk, LapSumError};

use crate::sweep::Op;

pub const MAGIC: &[u8; 4] = b"LPS1";

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error("empty input")]
    EmptyInput,
    #[error("line {line}: cannot parse {text:?} as a number")]
    Parse { line: usize, text: String },
    #[error("binary input truncated: header says {expected} values, found {found}")]
    Truncated { expected: u64, found: usize },
    #[error("input is neither UTF-8 text nor LPS1 binary")]
    NotText,
    #[error("bad k: {0}")]
    BadK(String),
    #[error("zero alpha: the scale must be nonzero and finite")]
    ZeroAlpha,
    #[error(transparent)]
    Op(LapSumError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl From<LapSumError> for DemoError {
    fn from(e: LapSumError) -> Self {
        match e {
            LapSumError::EmptyInput => DemoError::EmptyInput,
            LapSumError::ZeroScale(_) => DemoError::ZeroAlpha,
            LapSumError::KOutOfRange { .. } => DemoError::BadK(e.to_string()),
            other => DemoError::Op(other),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DemoError + '_ {
    move |source| DemoError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn parse_text(text: &str) -> Result<Vec<f64>, DemoError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        let x = t.parse::<f64>().map_err(|_| DemoError::Parse {
            line: i + 1,
            text: t.to_string(),
        })?;
        out.push(x);
    }
    Ok(out)
}

pub fn parse_binary(bytes: &[u8]) -> Result<Vec<f64>, DemoError> {
    let body = &bytes[MAGIC.len()..];
    let (count, data) = match body.split_first_chunk::<8>() {
        Some((c, rest)) => (u64::from_le_bytes(*c), rest),
        None => return Err(DemoError::Truncated { expected: 0, found: 0 }),
    };
    let found = data.len() / 8;
    if (found as u64) < count {
        return Err(DemoError::Truncated { expected: count, found });
    }
    Ok(data
        .chunks_exact(8)
        .take(count as usize)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn encode_binary(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn parse_scores(bytes: &[u8]) -> Result<Vec<f64>, DemoError> {
    let scores = if bytes.starts_with(MAGIC) {
        parse_binary(bytes)?
    } else {
        parse_text(std::str::from_utf8(bytes).map_err(|_| DemoError::NotText)?)?
    };
    if scores.is_empty() {
        return Err(DemoError::EmptyInput);
    }
    Ok(scores)
}

pub fn read_scores(path: &Path) -> Result<Vec<f64>, DemoError> {
    parse_scores(&fs::read(path).map_err(io_err(path))?)
}

/// Output rows: a single column for vector ops, `n` rows of `n` for the
/// permutation matrix.
pub fn run_op(op: Op, scores: &[f64], k: Option<f64>, alpha: f64) -> Result<Vec<Vec<f64>>, DemoError> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(DemoError::ZeroAlpha);
    }
    let column = |v: Vec<f64>| v.into_iter().map(|x| vec![x]).collect();
    Ok(match op {
        Op::TopK => {
            let k = k.ok_or_else(|| DemoError::BadK("--k is required for topk".into()))?;
            column(soft_topk(scores, k, alpha)?.p)
        }
        Op::Rank => column(soft_rank(scores, alpha)?.ranks),
        Op::Sort => column(soft_sort(scores, alpha)?.values),
        Op::Perm => soft_permutation(scores, alpha)?.rows().map(<[f64]>::to_vec).collect(),
    })
}

pub fn write_rows<W: Write>(rows: &[Vec<f64>], out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in rows {
        w.write_record(row.iter().map(|x| format!("{x:?}")))?;
    }
    w.flush()
}

pub fn run_demo(op: Op, input: &Path, k: Option<f64>, alpha: f64, output: &Path) -> Result<(), DemoError> {
    let scores = read_scores(input)?;
    let rows = run_op(op, &scores, k, alpha)?;
    let file = fs::File::create(output).map_err(io_err(output))?;
    write_rows(&rows, BufWriter::new(file)).map_err(io_err(output))
}
