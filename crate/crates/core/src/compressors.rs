//! Message compressors for distributed gradient methods.
//!
//! A compressor maps a worker's dense `d`-vector to a [`SparseMessage`] whose
//! payload (number of transmitted coordinates) is what the communication
//! meter charges. Three families live here:
//!
//! * **Permutation compressors** — workers jointly partition the coordinates
//!   (or, when workers outnumber coordinates, the coordinate *slots*) using a
//!   permutation shared through [`RoundContext`], each transmitting only its
//!   own part, rescaled so the average over workers stays unbiased. Their
//!   aggregate error satisfies the two-constant variance bound with `A = B`,
//!   which is what lets correlated compression exploit gradient similarity.
//! * **Sparsification** — uniform random `k`-subsets (`RandK`, unbiased) and
//!   greedy largest-`k` selection (`TopK`, biased but contractive).
//! * **Quantization** — unbiased stochastic rounding onto the power-of-two
//!   grid, composable with any unbiased compressor above.
//!
//! Every random choice is derived deterministically from the context, so a
//! simulated worker and the verification oracles (exhaustive enumeration in
//! [`exhaustive`], Monte Carlo in [`empirical_ab_gap`]) see bit-identical
//! randomness.

use crate::linalg::norm2_sq;
use crate::rng::{sample_permutation, KeyedStream, StreamDomain};
use thiserror::Error;

pub mod exhaustive;

/// A compressed message: the coordinates a worker actually transmits.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMessage {
    /// Dimension of the underlying dense vector.
    pub dim: u32,
    /// `(index, value)` pairs with strictly increasing-free but distinct
    /// indices below `dim`. Values may be zero (e.g. a selected coordinate
    /// that happens to vanish still costs its slot on the wire).
    pub entries: Vec<(u32, f64)>,
    /// Number of transmitted coordinates; always `entries.len()`. Dense
    /// messages carry `dim` entries.
    pub payload_coords: u32,
}

impl SparseMessage {
    /// Build a message, checking the index invariants.
    pub fn new(dim: u32, entries: Vec<(u32, f64)>) -> Self {
        debug_assert!(
            entries.iter().all(|&(i, _)| i < dim),
            "message index out of range"
        );
        #[cfg(debug_assertions)]
        {
            let mut seen = std::collections::HashSet::new();
            for &(i, _) in &entries {
                assert!(seen.insert(i), "duplicate index {i} in message");
            }
        }
        let payload_coords = entries.len() as u32;
        SparseMessage {
            dim,
            entries,
            payload_coords,
        }
    }

    /// Dense representation of the message.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim as usize];
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
        out
    }

    /// `out += weight * message`.
    pub fn add_into(&self, out: &mut [f64], weight: f64) {
        debug_assert_eq!(out.len(), self.dim as usize);
        for &(i, v) in &self.entries {
            out[i as usize] += weight * v;
        }
    }
}

/// Unbiased scalar quantizer applied coordinate-wise before an (optional)
/// inner compressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantizer {
    /// No quantization; variance constant 0.
    Identity,
    /// Stochastic rounding of each magnitude onto `{2^e}`: a value in
    /// `[2^e, 2^{e+1})` rounds up with probability `(|v| − 2^e)/2^e`, which
    /// keeps it unbiased; the sign is kept and exact zero stays zero. The
    /// worst-case relative second moment `E(q/v − 1)²` is `θ(1−θ)/(1+θ)²`
    /// maximized at `θ = 1/3`, i.e. variance constant 1/8.
    Pow2Stochastic,
}

impl Quantizer {
    /// Variance constant ω of the quantizer.
    pub fn omega(&self) -> f64 {
        match self {
            Quantizer::Identity => 0.0,
            Quantizer::Pow2Stochastic => 0.125,
        }
    }

    /// Quantize one value using the supplied stream.
    pub fn quantize_value(&self, v: f64, stream: &mut KeyedStream) -> f64 {
        match self {
            Quantizer::Identity => v,
            Quantizer::Pow2Stochastic => {
                if v == 0.0 || !v.is_finite() {
                    return v;
                }
                let mag = v.abs();
                // Zeroing the mantissa bits of a normal double yields exactly
                // 2^e; subnormals pass through unquantized.
                let lo = f64::from_bits(mag.to_bits() & 0xFFF0_0000_0000_0000);
                if lo == 0.0 {
                    return v;
                }
                let t = (mag - lo) / lo;
                let out = if stream.uniform() < t { 2.0 * lo } else { lo };
                out.copysign(v)
            }
        }
    }

    /// Quantize a dense vector with the worker's quantization stream.
    pub fn quantize(&self, x: &[f64], ctx: &RoundContext) -> Vec<f64> {
        match self {
            Quantizer::Identity => x.to_vec(),
            Quantizer::Pow2Stochastic => {
                let mut s = ctx.stream(StreamDomain::Quantizer, true);
                x.iter().map(|&v| self.quantize_value(v, &mut s)).collect()
            }
        }
    }
}

/// Identity of one compression call: which run, which round, which worker.
///
/// Round-level randomness (permutations, shared sparsification patterns) is a
/// pure function of `(master_seed, round)`; worker-level randomness is a pure
/// function of `(master_seed, round, worker_id)`. No state is carried between
/// calls, so any party can replay any round.
#[derive(Debug, Clone, Copy)]
pub struct RoundContext {
    /// Master seed of the run.
    pub master_seed: u64,
    /// Round counter.
    pub round: u64,
    /// This worker's id in `0..n`.
    pub worker_id: u32,
    /// Number of workers.
    pub n: u32,
    /// Vector dimension.
    pub d: u32,
}

impl RoundContext {
    /// Derive a stream for this round; `per_worker` additionally keys by the
    /// worker id.
    pub fn stream(&self, domain: StreamDomain, per_worker: bool) -> KeyedStream {
        let worker = if per_worker {
            self.worker_id as u64
        } else {
            u64::MAX
        };
        KeyedStream::derive(self.master_seed, domain, self.round, worker)
    }
}

/// Errors from compressor construction or application.
#[derive(Debug, Error)]
pub enum CompressError {
    #[error("input has dimension {got} but the context declares {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("{kind} requires {requirement} (n = {n}, d = {d})")]
    ShapeUnsupported {
        kind: &'static str,
        requirement: &'static str,
        n: u32,
        d: u32,
    },
    #[error("k = {k} must be in 1..={d}")]
    BadK { k: u32, d: u32 },
    #[error("partition is invalid: {reason}")]
    BadPartition { reason: String },
    #[error("no closed-form variance constants for {kind} with n = {n}, d = {d}")]
    NoClosedForm { kind: &'static str, n: u32, d: u32 },
    #[error("exhaustive enumeration space has about {approx} outcomes, above the limit {limit}")]
    EnumerationTooLarge { approx: f64, limit: u64 },
    #[error("exhaustive enumeration is not available for {kind}")]
    NotEnumerable { kind: &'static str },
}

/// The two-constant aggregate variance bound
/// `E‖(1/n)Σ C_i(a_i) − ā‖² ≤ A·(1/n)Σ‖a_i‖² − B·‖ā‖²` with `A ≥ B ≥ 0`.
/// For single unbiased compressors, `omega` carries the per-message constant
/// `E‖C(x) − x‖² ≤ ω‖x‖²` when one exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ABConstants {
    pub a: f64,
    pub b: f64,
    /// Per-compressor variance constant, when the family has one.
    pub omega: Option<f64>,
}

/// Compressor selection, with per-family parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum CompressorSpec {
    /// Coordinate partition via a shared permutation; requires `d ≥ n`.
    /// Each worker sends `⌊d/n⌋` or `⌈d/n⌉` coordinates scaled by `n`.
    PermKBigD,
    /// Slot partition via a shared permutation; requires `n ≥ d` and `n > 1`.
    /// Each worker sends one coordinate or nothing, scaled by `n/⌊n/d⌋`.
    PermKBigN,
    /// Uniform random `k`-subset, rescaled by `d/k`. With `shared = true`
    /// the subset is drawn once per round and used by every worker;
    /// otherwise each worker draws independently.
    RandK { k: u32, shared: bool },
    /// Deterministic largest-`k` magnitudes (ties broken toward the lowest
    /// index). Biased; contractive with `α = k/d`.
    TopK { k: u32 },
    /// A fixed coordinate partition into `m ≤ n` blocks assigned to workers
    /// by a shared permutation: `⌊n/m⌋` workers replicate each block
    /// (scaled by `n/⌊n/m⌋`), leftover workers stay silent.
    BlockPerm { partition: Vec<Vec<u32>> },
    /// Quantize first, then apply the inner compressor to the quantized
    /// vector.
    Composed {
        inner: Box<CompressorSpec>,
        quantizer: Quantizer,
    },
}

impl CompressorSpec {
    /// Short stable label for file names and CSV columns.
    pub fn label(&self) -> String {
        match self {
            CompressorSpec::PermKBigD => "permk".into(),
            CompressorSpec::PermKBigN => "permk".into(),
            CompressorSpec::RandK { k, shared } => {
                if *shared {
                    format!("randk{k}shared")
                } else {
                    format!("randk{k}")
                }
            }
            CompressorSpec::TopK { k } => format!("topk{k}"),
            CompressorSpec::BlockPerm { partition } => format!("blockperm{}", partition.len()),
            CompressorSpec::Composed { inner, quantizer } => match quantizer {
                Quantizer::Identity => inner.label(),
                Quantizer::Pow2Stochastic => format!("q8_{}", inner.label()),
            },
        }
    }

    /// Check the spec against a worker/dimension shape.
    pub fn validate(&self, n: u32, d: u32) -> Result<(), CompressError> {
        match self {
            CompressorSpec::PermKBigD => {
                if n == 0 || d < n {
                    return Err(CompressError::ShapeUnsupported {
                        kind: "PermKBigD",
                        requirement: "d >= n >= 1",
                        n,
                        d,
                    });
                }
            }
            CompressorSpec::PermKBigN => {
                if d == 0 || n < d || n <= 1 {
                    return Err(CompressError::ShapeUnsupported {
                        kind: "PermKBigN",
                        requirement: "n >= d >= 1 and n > 1",
                        n,
                        d,
                    });
                }
            }
            CompressorSpec::RandK { k, .. } | CompressorSpec::TopK { k } => {
                if *k == 0 || *k > d {
                    return Err(CompressError::BadK { k: *k, d });
                }
            }
            CompressorSpec::BlockPerm { partition } => {
                validate_partition(partition, n, d)?;
            }
            CompressorSpec::Composed { inner, .. } => {
                if matches!(**inner, CompressorSpec::Composed { .. }) {
                    return Err(CompressError::BadPartition {
                        reason: "nested composition is not supported".into(),
                    });
                }
                inner.validate(n, d)?;
            }
        }
        Ok(())
    }

    /// Largest payload (in coordinates) any worker can be charged per round.
    pub fn max_payload(&self, n: u32, d: u32) -> u32 {
        match self {
            CompressorSpec::PermKBigD => d.div_ceil(n),
            CompressorSpec::PermKBigN => 1,
            CompressorSpec::RandK { k, .. } | CompressorSpec::TopK { k } => *k,
            CompressorSpec::BlockPerm { partition } => partition
                .iter()
                .map(|b| b.len() as u32)
                .max()
                .unwrap_or(0),
            CompressorSpec::Composed { inner, .. } => inner.max_payload(n, d),
        }
    }

    /// Compress `x` for the worker identified by `ctx`.
    pub fn compress(&self, x: &[f64], ctx: &RoundContext) -> Result<SparseMessage, CompressError> {
        if x.len() != ctx.d as usize {
            return Err(CompressError::DimensionMismatch {
                got: x.len(),
                want: ctx.d as usize,
            });
        }
        self.validate(ctx.n, ctx.d)?;
        Ok(match self {
            CompressorSpec::PermKBigD => permk_big_d(x, ctx),
            CompressorSpec::PermKBigN => permk_big_n(x, ctx),
            CompressorSpec::RandK { k, shared } => randk(x, *k, ctx, *shared),
            CompressorSpec::TopK { k } => topk(x, *k),
            CompressorSpec::BlockPerm { partition } => block_perm(x, partition, ctx),
            CompressorSpec::Composed { inner, quantizer } => {
                return compose_quantize(inner, *quantizer, x, ctx);
            }
        })
    }

    /// Closed-form aggregate variance constants for `n` workers in dimension
    /// `d`. Errors for families without them (TopK is biased).
    pub fn ab_constants(&self, n: u32, d: u32) -> Result<ABConstants, CompressError> {
        self.validate(n, d)?;
        match self {
            CompressorSpec::PermKBigD => Ok(ABConstants {
                a: 1.0,
                b: 1.0,
                omega: None,
            }),
            CompressorSpec::PermKBigN => {
                let q = n / d;
                let ab = one_minus_replication_gain(n, q);
                Ok(ABConstants {
                    a: ab,
                    b: ab,
                    omega: None,
                })
            }
            CompressorSpec::RandK { k, shared } => {
                let omega = d as f64 / *k as f64 - 1.0;
                let a = if *shared { omega } else { omega / n as f64 };
                Ok(ABConstants {
                    a,
                    b: 0.0,
                    omega: Some(omega),
                })
            }
            CompressorSpec::TopK { .. } => Err(CompressError::NoClosedForm {
                kind: "TopK (biased; use contraction_alpha)",
                n,
                d,
            }),
            CompressorSpec::BlockPerm { partition } => {
                let m = partition.len() as u32;
                let q = n / m;
                let ab = one_minus_replication_gain(n, q);
                Ok(ABConstants {
                    a: ab,
                    b: ab,
                    omega: None,
                })
            }
            CompressorSpec::Composed { inner, quantizer } => {
                // Independent per-worker quantizer streams inflate only the
                // first constant: the composed family satisfies
                // ((ω_q + 1)·A, B).
                let base = inner.ab_constants(n, d)?;
                Ok(ABConstants {
                    a: (quantizer.omega() + 1.0) * base.a,
                    b: base.b,
                    omega: None,
                })
            }
        }
    }

    /// Contraction constant `α` with `‖C(x) − x‖² ≤ (1 − α)‖x‖²`, for the
    /// deterministic contractive family.
    pub fn contraction_alpha(&self, d: u32) -> Result<f64, CompressError> {
        match self {
            CompressorSpec::TopK { k } => {
                if *k == 0 || *k > d {
                    return Err(CompressError::BadK { k: *k, d });
                }
                Ok(*k as f64 / d as f64)
            }
            _ => Err(CompressError::NoClosedForm {
                kind: "contraction constant is only defined for TopK",
                n: 0,
                d,
            }),
        }
    }
}

/// `1 − n(q−1)/((n−1)q)`, the shared constant of replication-based
/// partition compressors where `q` workers replicate each part. With `q = 1`
/// there is no replication gain and the constant is 1.
fn one_minus_replication_gain(n: u32, q: u32) -> f64 {
    if q <= 1 {
        return 1.0;
    }
    let (n, q) = (n as f64, q as f64);
    1.0 - n * (q - 1.0) / ((n - 1.0) * q)
}

fn validate_partition(partition: &[Vec<u32>], n: u32, d: u32) -> Result<(), CompressError> {
    let m = partition.len();
    if m == 0 {
        return Err(CompressError::BadPartition {
            reason: "no blocks".into(),
        });
    }
    if m as u32 > n {
        return Err(CompressError::BadPartition {
            reason: format!("{m} blocks but only {n} workers"),
        });
    }
    let mut seen = vec![false; d as usize];
    for (j, block) in partition.iter().enumerate() {
        if block.is_empty() {
            return Err(CompressError::BadPartition {
                reason: format!("block {j} is empty"),
            });
        }
        for &c in block {
            if c >= d {
                return Err(CompressError::BadPartition {
                    reason: format!("coordinate {c} out of range in block {j}"),
                });
            }
            if seen[c as usize] {
                return Err(CompressError::BadPartition {
                    reason: format!("coordinate {c} appears twice"),
                });
            }
            seen[c as usize] = true;
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(CompressError::BadPartition {
            reason: format!("coordinate {missing} is not covered"),
        });
    }
    Ok(())
}

/// Coordinate-partition compressor for `d ≥ n`, given explicit permutations.
///
/// With `d = kn + r`, worker `i` owns the block
/// `perm_d[k·i .. k·(i+1)]`; the `r` leftover coordinates
/// `perm_d[k·n ..]` go one each to the workers `perm_n` places on the first
/// `r` slots. Every transmitted coordinate is scaled by `n`, so the average
/// over workers reconstructs an unbiased estimate (exactly `x` when all
/// workers compress the same vector).
pub fn permk_big_d_with(
    x: &[f64],
    worker_id: u32,
    n: u32,
    perm_d: &[u32],
    perm_n: &[u32],
) -> SparseMessage {
    let d = x.len() as u32;
    let k = (d / n) as usize;
    let r = (d % n) as usize;
    let i = worker_id as usize;
    let scale = n as f64;
    let mut entries = Vec::with_capacity(k + 1);
    for &coord in &perm_d[k * i..k * (i + 1)] {
        entries.push((coord, scale * x[coord as usize]));
    }
    if r > 0 {
        let slot = perm_n[i] as usize;
        if slot < r {
            let coord = perm_d[k * (n as usize) + slot];
            entries.push((coord, scale * x[coord as usize]));
        }
    }
    SparseMessage::new(d, entries)
}

/// Coordinate-partition compressor for `d ≥ n`, with permutations drawn from
/// the shared round stream: first the coordinate permutation, then (only if
/// `n` does not divide `d`) the worker permutation for the leftovers.
pub fn permk_big_d(x: &[f64], ctx: &RoundContext) -> SparseMessage {
    let mut stream = ctx.stream(StreamDomain::RoundShared, false);
    let perm_d = sample_permutation(ctx.d as usize, &mut stream);
    let perm_n = if ctx.d % ctx.n != 0 {
        sample_permutation(ctx.n as usize, &mut stream)
    } else {
        Vec::new()
    };
    permk_big_d_with(x, ctx.worker_id, ctx.n, &perm_d, &perm_n)
}

/// Slot-partition compressor for `n ≥ d`, given the explicit slot
/// permutation.
///
/// The `n` slots consist of `q = ⌊n/d⌋` copies of each coordinate followed by
/// `n − qd` empty slots; worker `i` takes slot `perm_slots[i]` and transmits
/// that coordinate scaled by `n/q` (or nothing for an empty slot).
pub fn permk_big_n_with(x: &[f64], worker_id: u32, n: u32, perm_slots: &[u32]) -> SparseMessage {
    let d = x.len() as u32;
    let q = n / d;
    let slot = perm_slots[worker_id as usize];
    let mut entries = Vec::new();
    if slot < q * d {
        let coord = slot / q;
        entries.push((coord, (n as f64 / q as f64) * x[coord as usize]));
    }
    SparseMessage::new(d, entries)
}

/// Slot-partition compressor for `n ≥ d` with the slot permutation drawn
/// from the shared round stream.
pub fn permk_big_n(x: &[f64], ctx: &RoundContext) -> SparseMessage {
    let mut stream = ctx.stream(StreamDomain::RoundShared, false);
    let perm = sample_permutation(ctx.n as usize, &mut stream);
    permk_big_n_with(x, ctx.worker_id, ctx.n, &perm)
}

/// Block-partition compressor, given the explicit worker permutation.
///
/// With `m` blocks and `q = ⌊n/m⌋`, the worker at permutation position
/// `j·q + t` (for `t < q`) replicates block `j` scaled by `n/q`; positions
/// `≥ m·q` transmit nothing.
pub fn block_perm_with(
    x: &[f64],
    worker_id: u32,
    n: u32,
    partition: &[Vec<u32>],
    perm_workers: &[u32],
) -> SparseMessage {
    let d = x.len() as u32;
    let m = partition.len() as u32;
    let q = n / m;
    let pos = perm_workers[worker_id as usize];
    let mut entries = Vec::new();
    if pos < m * q {
        let block = &partition[(pos / q) as usize];
        let scale = n as f64 / q as f64;
        for &coord in block {
            entries.push((coord, scale * x[coord as usize]));
        }
    }
    SparseMessage::new(d, entries)
}

/// Block-partition compressor with the worker permutation drawn from the
/// shared round stream.
pub fn block_perm(x: &[f64], partition: &[Vec<u32>], ctx: &RoundContext) -> SparseMessage {
    let mut stream = ctx.stream(StreamDomain::RoundShared, false);
    let perm = sample_permutation(ctx.n as usize, &mut stream);
    block_perm_with(x, ctx.worker_id, ctx.n, partition, &perm)
}

/// Random `k`-subset sparsifier given explicit sorted indices.
pub fn randk_with(x: &[f64], indices: &[u32]) -> SparseMessage {
    let d = x.len() as u32;
    let k = indices.len() as f64;
    let scale = d as f64 / k;
    let entries = indices
        .iter()
        .map(|&i| (i, scale * x[i as usize]))
        .collect();
    SparseMessage::new(d, entries)
}

/// Uniform random `k`-subset of coordinates, scaled by `d/k` for
/// unbiasedness. `shared = true` draws one subset per round for all workers;
/// otherwise each worker draws its own.
pub fn randk(x: &[f64], k: u32, ctx: &RoundContext, shared: bool) -> SparseMessage {
    let domain = if shared {
        StreamDomain::RoundShared
    } else {
        StreamDomain::WorkerLocal
    };
    let mut stream = ctx.stream(domain, !shared);
    let indices = sample_k_subset(ctx.d as usize, k as usize, &mut stream);
    randk_with(x, &indices)
}

/// Uniform `k`-subset of `{0..len-1}`, returned sorted: the first `k` slots
/// of a partial Fisher–Yates shuffle.
pub fn sample_k_subset(len: usize, k: usize, stream: &mut KeyedStream) -> Vec<u32> {
    debug_assert!(k <= len);
    let mut pool: Vec<u32> = (0..len as u32).collect();
    for i in 0..k {
        let j = i + stream.below((len - i) as u64) as usize;
        pool.swap(i, j);
    }
    let mut out = pool[..k].to_vec();
    out.sort_unstable();
    out
}

/// Largest-`k` magnitude selection, ties broken toward the lowest index.
/// Selected values are kept unscaled (the compressor is biased).
pub fn topk(x: &[f64], k: u32) -> SparseMessage {
    let d = x.len() as u32;
    let k = k as usize;
    let mut order: Vec<u32> = (0..d).collect();
    // Stable sort by descending magnitude keeps the lowest index first
    // among equal magnitudes.
    order.sort_by(|&a, &b| {
        x[b as usize]
            .abs()
            .partial_cmp(&x[a as usize].abs())
            .expect("non-finite value in topk input")
    });
    let mut selected = order[..k].to_vec();
    selected.sort_unstable();
    let entries = selected.iter().map(|&i| (i, x[i as usize])).collect();
    SparseMessage::new(d, entries)
}

/// Quantize `x` with the worker's quantization stream, then compress the
/// quantized vector with `inner`.
pub fn compose_quantize(
    inner: &CompressorSpec,
    quantizer: Quantizer,
    x: &[f64],
    ctx: &RoundContext,
) -> Result<SparseMessage, CompressError> {
    let q = quantizer.quantize(x, ctx);
    inner.compress(&q, ctx)
}

/// How [`empirical_ab_gap`] explores the randomness space.
#[derive(Debug, Clone, Copy)]
pub enum GapMode {
    /// Enumerate every outcome with its exact probability. Only available
    /// for finitely-randomized families and guarded by an outcome budget.
    Exhaustive,
    /// Average over `trials` rounds of the production sampling path.
    MonteCarlo { trials: u64, seed: u64 },
}

/// Result of an aggregate-variance measurement: the measured left side,
/// the closed-form right side, and the constants used.
#[derive(Debug, Clone, Copy)]
pub struct AbGap {
    /// `E‖(1/n)Σ C_i(a_i) − ā‖²`, exactly (exhaustive) or estimated (MC).
    pub lhs: f64,
    /// `A·(1/n)Σ‖a_i‖² − B·‖ā‖²` from the closed-form constants.
    pub rhs: f64,
    /// The constants behind `rhs`.
    pub ab: ABConstants,
}

/// Measure both sides of the aggregate variance bound on concrete worker
/// inputs `inputs[i]` (one vector per worker).
pub fn empirical_ab_gap(
    spec: &CompressorSpec,
    inputs: &[Vec<f64>],
    mode: GapMode,
) -> Result<AbGap, CompressError> {
    let n = inputs.len() as u32;
    assert!(n > 0, "need at least one worker input");
    let d = inputs[0].len() as u32;
    for x in inputs {
        assert_eq!(x.len(), d as usize, "worker inputs must share a dimension");
    }
    spec.validate(n, d)?;
    let ab = spec.ab_constants(n, d)?;

    let mut mean_input = vec![0.0; d as usize];
    let mut mean_sq = 0.0;
    for x in inputs {
        for (m, v) in mean_input.iter_mut().zip(x) {
            *m += v / n as f64;
        }
        mean_sq += norm2_sq(x) / n as f64;
    }
    let rhs = ab.a * mean_sq - ab.b * norm2_sq(&mean_input);

    let lhs = match mode {
        GapMode::Exhaustive => {
            exhaustive::expected_aggregate_error_sq(spec, inputs, &mean_input)?
        }
        GapMode::MonteCarlo { trials, seed } => {
            let mut acc = 0.0;
            let mut agg = vec![0.0; d as usize];
            for trial in 0..trials {
                agg.iter_mut().for_each(|v| *v = 0.0);
                for (i, x) in inputs.iter().enumerate() {
                    let ctx = RoundContext {
                        master_seed: seed,
                        round: trial,
                        worker_id: i as u32,
                        n,
                        d,
                    };
                    let msg = spec.compress(x, &ctx)?;
                    msg.add_into(&mut agg, 1.0 / n as f64);
                }
                acc += agg
                    .iter()
                    .zip(&mean_input)
                    .map(|(a, m)| (a - m) * (a - m))
                    .sum::<f64>();
            }
            acc / trials as f64
        }
    };
    Ok(AbGap { lhs, rhs, ab })
}
