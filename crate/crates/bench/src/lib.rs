//! Benchmark sweep and demo front end for the `lapsum` crate.
//!
//! The `bench` binary wraps [`sweep::write_sweep_csv`] and [`demo::run_demo`].
//! Peak memory is only recorded when [`alloc::CountingAlloc`] is installed as
//! the global allocator, as the binary and the acceptance harness do.

pub mod alloc;
pub mod demo;
pub mod sweep;

pub use sweep::{BenchRecord, KRule, Op, SweepConfig, SweepError};
