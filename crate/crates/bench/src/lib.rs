//! Benchmark-only crate; see `benches/hot_paths.rs`.
//!
//! Run with `cargo bench -p permlab-bench`. The interesting costs are
//! per-message compression, the tridiagonal-stencil gradient sweep, keyed
//! permutation sampling, and whole optimizer rounds including metering.
