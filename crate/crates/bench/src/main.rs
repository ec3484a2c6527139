use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lapsum_bench::alloc::CountingAlloc;
use lapsum_bench::{demo, sweep, KRule, Op, SweepConfig};

#[global_allocator]
static ALLOC: CountingAlloc = CountingAlloc;

#[derive(Parser)]
#[command(name = "bench", about = "Soft order operations: timing sweeps and one-off demos")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time forward and forward+VJP passes over a grid of sizes; CSV out.
    Sweep(SweepArgs),
    /// Apply one op to scores from a file and write the result as CSV.
    Demo(DemoArgs),
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "topk,rank,sort,perm")]
    ops: Vec<Op>,
    /// Smallest size exponent (n = 2^n_min).
    #[arg(long, default_value_t = 10)]
    n_min: u32,
    /// Largest size exponent.
    #[arg(long, default_value_t = 21)]
    n_max: u32,
    /// `half` for k = n/2, or `fixed:<k>`.
    #[arg(long, default_value = "half")]
    k_rule: KRule,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the ops' internal parallelism (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Cells estimated to need more than this many MiB are reported as failed.
    #[arg(long, default_value_t = 4096)]
    mem_cap_mib: usize,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long)]
    op: Op,
    #[arg(long)]
    input: PathBuf,
    /// Target mass, required for topk.
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
}

fn sweep(args: SweepArgs) -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SweepConfig {
        ops: args.ops,
        n_min: args.n_min,
        n_max: args.n_max,
        k_rule: args.k_rule,
        alpha: args.alpha,
        repeats: args.repeats,
        warmup: args.warmup,
        seed: args.seed,
        mem_cap_bytes: args.mem_cap_mib.saturating_mul(1 << 20),
    };
    let out: Box<dyn Write + Send> = match &args.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout()),
    };
    lapsum_bench::alloc::retain_freed_pages();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = args.threads {
        pool = pool.num_threads(t);
    }
    pool.build()?.install(|| sweep::write_sweep_csv(&cfg, out))?;
    Ok(())
}

fn main() -> ExitCode {
    let result = match Cli::parse().cmd {
        Cmd::Sweep(a) => sweep(a),
        Cmd::Demo(a) => demo::run_demo(a.op, &a.input, a.k, a.alpha, &a.out).map_err(Into::into),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
