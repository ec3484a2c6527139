//! Timing and memory sweep over problem sizes.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use lapsum::{
    perm_vjp, prepare, rank_vjp, soft_permutation, soft_rank_prepared, soft_sort_prepared, soft_topk_prepared,
    sort_vjp, Prepared, ScaleParam, TopKTangent,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::alloc;

pub const COLUMNS: [&str; 11] = [
    "op",
    "n",
    "k",
    "alpha",
    "forward_ns",
    "forward_backward_ns",
    "peak_bytes",
    "error_k",
    "repeats",
    "seed",
    "failed",
];

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("unknown op {0:?} (expected topk, rank, sort or perm)")]
    UnknownOp(String),
    #[error("bad k rule {0:?} (expected half or fixed:<k>)")]
    BadKRule(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    TopK,
    Rank,
    Sort,
    Perm,
}

impl Op {
    pub const ALL: [Op; 4] = [Op::TopK, Op::Rank, Op::Sort, Op::Perm];

    pub fn name(self) -> &'static str {
        match self {
            Op::TopK => "topk",
            Op::Rank => "rank",
            Op::Sort => "sort",
            Op::Perm => "perm",
        }
    }

    fn stream(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Op {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Op::ALL
            .into_iter()
            .find(|op| op.name() == s.trim())
            .ok_or_else(|| SweepError::UnknownOp(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KRule {
    Half,
    Fixed(f64),
}

impl KRule {
    /// Target for size `n`, clamped into the open interval (0, n).
    pub fn k_for(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            KRule::Half => n / 2.0,
            KRule::Fixed(k) => k.min(n / 2.0),
        }
    }
}

impl FromStr for KRule {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "half" {
            return Ok(KRule::Half);
        }
        s.strip_prefix("fixed:")
            .and_then(|k| k.parse::<f64>().ok())
            .filter(|k| k.is_finite() && *k > 0.0)
            .map(KRule::Fixed)
            .ok_or_else(|| SweepError::BadKRule(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub ops: Vec<Op>,
    /// Sizes are `2^n_min ..= 2^n_max`.
    pub n_min: u32,
    pub n_max: u32,
    pub k_rule: KRule,
    pub alpha: f64,
    pub repeats: usize,
    pub warmup: usize,
    pub seed: u64,
    /// Cells whose estimated footprint exceeds this are reported as failed.
    pub mem_cap_bytes: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            ops: Op::ALL.to_vec(),
            n_min: 10,
            n_max: 21,
            k_rule: KRule::Half,
            alpha: -1.0,
            repeats: 5,
            warmup: 1,
            seed: 42,
            mem_cap_bytes: 4 << 30,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.ops.is_empty() {
            return Err(SweepError::Config("no ops selected".into()));
        }
        if self.n_min > self.n_max || self.n_max > 40 {
            return Err(SweepError::Config(format!("bad size range 2^{}..2^{}", self.n_min, self.n_max)));
        }
        if self.repeats == 0 {
            return Err(SweepError::Config("repeats must be at least 1".into()));
        }
        if self.alpha == 0.0 || !self.alpha.is_finite() {
            return Err(SweepError::Config(format!("alpha must be nonzero and finite, got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub op: String,
    pub n: usize,
    /// Only meaningful for top-k; empty otherwise.
    pub k: Option<f64>,
    pub alpha: f64,
    pub forward_ns: u64,
    pub forward_backward_ns: u64,
    pub peak_bytes: u64,
    pub error_k: f64,
    pub repeats: usize,
    pub seed: u64,
    pub failed: bool,
}

/// Standard-normal scores for one cell. Each (op, size) pair draws from its
/// own stream so cells are reproducible in isolation.
pub fn cell_scores(seed: u64, op: Op, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(op.stream() * 64 + n.trailing_zeros() as u64);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn cotangent(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Rough upper bound on the bytes one cell needs.
fn footprint(op: Op, n: usize) -> usize {
    match op {
        Op::Perm => n.saturating_mul(n).saturating_mul(16).saturating_add(n * 128),
        _ => n.saturating_mul(256),
    }
}

fn forward(op: Op, scores: &[f64], k: f64, alpha: f64) -> lapsum::Result<(Prepared, Output)> {
    let prep = prepare(scores, ScaleParam::new(alpha)?)?;
    let out = match op {
        Op::TopK => Output::TopK(soft_topk_prepared(&prep, scores, k)?),
        Op::Rank => Output::Rank(soft_rank_prepared(&prep).ranks),
        Op::Sort => Output::Sort(soft_sort_prepared(&prep)?.values),
        Op::Perm => Output::Perm(soft_permutation(scores, alpha)?),
    };
    Ok((prep, out))
}

enum Output {
    TopK(lapsum::SoftSelection),
    Rank(Vec<f64>),
    Sort(Vec<f64>),
    Perm(lapsum::DoublyStochastic),
}

fn backward(prep: &Prepared, out: &Output, scores: &[f64], v: &[f64]) -> lapsum::Result<Vec<f64>> {
    match out {
        Output::TopK(sel) => TopKTangent::new(sel, scores)?.vjp(v),
        Output::Rank(_) => rank_vjp(prep, v),
        Output::Sort(_) => sort_vjp(prep, v),
        Output::Perm(_) => perm_vjp(prep, v),
    }
}

/// Mass defect of an op's output: `|sum p - k|` for top-k, `|sum ranks -
/// n(n-1)/2|` for ranks, the worst level residual `|Fsum(b_l) - (l + 1/2)|`
/// for sorting, and the worst row or column sum defect for permutations.
fn error_k(prep: &Prepared, out: &Output, k: f64) -> f64 {
    match out {
        Output::TopK(sel) => (sel.p.iter().sum::<f64>() - k).abs(),
        Output::Rank(ranks) => {
            let n = ranks.len() as f64;
            (ranks.iter().sum::<f64>() - n * (n - 1.0) / 2.0).abs()
        }
        Output::Sort(values) => prep
            .fsum_eval(values)
            .map(|f| f.iter().enumerate().map(|(l, x)| (x - (l as f64 + 0.5)).abs()).fold(0.0, f64::max))
            .unwrap_or(f64::NAN),
        Output::Perm(m) => m
            .row_sums()
            .into_iter()
            .chain(m.col_sums())
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max),
    }
}

/// One timed forward and forward+VJP pass with its allocator peak (bytes
/// above the live count at entry) and output mass defect.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub forward_ns: u64,
    pub forward_backward_ns: u64,
    pub peak_bytes: usize,
    pub error_k: f64,
}

/// Inputs for one cell, generated outside any timed region.
pub struct CellInput {
    pub op: Op,
    pub scores: Vec<f64>,
    pub cotangent: Vec<f64>,
    pub k: f64,
    pub alpha: f64,
}

impl CellInput {
    pub fn new(cfg: &SweepConfig, op: Op, n: usize) -> Self {
        CellInput {
            op,
            scores: cell_scores(cfg.seed, op, n),
            cotangent: cotangent(cfg.seed, if op == Op::Perm { n * n } else { n }),
            k: cfg.k_rule.k_for(n),
            // The permutation matrix is only defined for positive scale.
            alpha: if op == Op::Perm { cfg.alpha.abs() } else { cfg.alpha },
        }
    }

    pub fn measure(&self) -> lapsum::Result<Sample> {
        let base = alloc::live_bytes();
        alloc::reset_peak();
        let t0 = Instant::now();
        let (prep, out) = forward(self.op, &self.scores, self.k, self.alpha)?;
        let t1 = Instant::now();
        let grad = backward(&prep, &out, &self.scores, &self.cotangent)?;
        let t2 = Instant::now();
        let peak_bytes = alloc::peak_bytes().saturating_sub(base);
        std::hint::black_box(&grad);
        Ok(Sample {
            forward_ns: (t1 - t0).as_nanos() as u64,
            forward_backward_ns: (t2 - t0).as_nanos() as u64,
            peak_bytes,
            error_k: error_k(&prep, &out, self.k),
        })
    }
}

pub fn median(xs: &mut [u64]) -> u64 {
    xs.sort_unstable();
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2
    }
}

/// Times one (op, n) cell: warmup passes, then the median of `repeats`.
pub fn run_cell(cfg: &SweepConfig, op: Op, n: usize) -> BenchRecord {
    let input_k = cfg.k_rule.k_for(n);
    let mut record = BenchRecord {
        op: op.name().to_string(),
        n,
        k: (op == Op::TopK).then_some(input_k),
        alpha: if op == Op::Perm { cfg.alpha.abs() } else { cfg.alpha },
        forward_ns: 0,
        forward_backward_ns: 0,
        peak_bytes: 0,
        error_k: f64::NAN,
        repeats: cfg.repeats,
        seed: cfg.seed,
        failed: true,
    };
    if footprint(op, n) > cfg.mem_cap_bytes {
        return record;
    }
    let input = CellInput::new(cfg, op, n);
    let run = || -> lapsum::Result<Vec<Sample>> {
        for _ in 0..cfg.warmup {
            input.measure()?;
        }
        (0..cfg.repeats).map(|_| input.measure()).collect()
    };
    if let Ok(samples) = run() {
        let mut fwd: Vec<u64> = samples.iter().map(|s| s.forward_ns).collect();
        let mut fb: Vec<u64> = samples.iter().map(|s| s.forward_backward_ns).collect();
        record.forward_ns = median(&mut fwd);
        record.forward_backward_ns = median(&mut fb);
        record.peak_bytes = samples.iter().map(|s| s.peak_bytes).max().unwrap_or(0) as u64;
        record.error_k = samples.iter().map(|s| s.error_k).fold(0.0, f64::max);
        record.failed = false;
    }
    record
}

/// Runs every cell in order, one at a time, handing each record to `sink`.
pub fn run_sweep(
    cfg: &SweepConfig,
    mut sink: impl FnMut(BenchRecord) -> Result<(), SweepError>,
) -> Result<(), SweepError> {
    cfg.validate()?;
    for &op in &cfg.ops {
        for e in cfg.n_min..=cfg.n_max {
            sink(run_cell(cfg, op, 1usize << e))?;
        }
    }
    Ok(())
}

/// Streams sweep records as CSV. The header row is written even when no
/// cell runs.
pub fn write_sweep_csv<W: Write>(cfg: &SweepConfig, out: W) -> Result<(), SweepError> {
    cfg.validate()?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(COLUMNS)?;
    w.flush()?;
    run_sweep(cfg, |rec| {
        w.serialize(&rec)?;
        w.flush()?;
        Ok(())
    })
}
