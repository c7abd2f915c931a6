//! Deterministic, domain-separated random streams.
//!
//! Every random choice in the laboratory (round permutations, per-worker
//! sparsification patterns, quantizer coin flips, Bernoulli sync decisions,
//! output-iterate selection, task generation) is drawn from a [`KeyedStream`]
//! derived from a master seed, a domain tag, and counters. Coordinator and
//! workers can therefore reproduce each other's randomness without exchanging
//! a single message, and reruns are bit-identical regardless of thread count
//! or evaluation order.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Namespace tag separating the independent random streams derived from one
/// master seed. Two streams with different domains never collide even when
/// their counters do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamDomain {
    /// Round-level randomness shared by every worker: permutations and
    /// shared sparsification patterns.
    RoundShared = 1,
    /// Per-worker sparsification randomness (independent across workers).
    WorkerLocal = 2,
    /// Per-worker quantization randomness.
    Quantizer = 3,
    /// Coordinator's Bernoulli synchronization coin.
    SyncCoin = 4,
    /// Coordinator's uniform choice of the reported output iterate.
    OutputChoice = 5,
    /// Task generation (problem data).
    TaskGen = 6,
    /// Dataset shuffling and shard assignment.
    DataSplit = 7,
    /// Parameter initialization.
    ParamInit = 8,
    /// Sampling in empirical constant estimators.
    Empirical = 9,
    /// Starting vectors for iterative eigensolvers.
    EigenStart = 10,
}

/// A counter-keyed deterministic random stream.
///
/// The stream is a ChaCha8 generator seeded by
/// `(master_seed, domain, round, worker)`; equal keys yield bit-identical
/// streams on every platform.
pub struct KeyedStream {
    rng: ChaCha8Rng,
    spare_gauss: Option<f64>,
}

impl KeyedStream {
    /// Derive the stream for `(master_seed, domain, round, worker)`.
    pub fn derive(master_seed: u64, domain: StreamDomain, round: u64, worker: u64) -> Self {
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&round.to_le_bytes());
        seed[16..24].copy_from_slice(&worker.to_le_bytes());
        seed[24] = domain as u8;
        seed[25..32].copy_from_slice(b"PLSTRM1");
        KeyedStream {
            rng: ChaCha8Rng::from_seed(seed),
            spare_gauss: None,
        }
    }

    /// Next raw 64-bit word.
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw from `[0, 1)` with 53 random mantissa bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased uniform draw from `{0, 1, ..., bound-1}` by rejection.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "below() requires a positive bound");
        // Reject draws falling in the final partial block so every residue
        // is equally likely.
        loop {
            let v = self.next_u64();
            let r = v % bound;
            if v - r <= u64::MAX - (bound - 1) {
                return r;
            }
        }
    }

    /// Bernoulli draw with success probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal draw (Box–Muller, with the second variate cached).
    pub fn gauss(&mut self) -> f64 {
        if let Some(g) = self.spare_gauss.take() {
            return g;
        }
        // u1 ∈ (0, 1] so the logarithm is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        self.spare_gauss = Some(r * s);
        r * c
    }

    /// Fill `out` with standard normal draws.
    pub fn fill_gauss(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.gauss();
        }
    }
}

/// Uniformly random permutation of `{0, 1, ..., len-1}` via Fisher–Yates.
///
/// Consumes exactly the draws needed by the shuffle, so callers sampling
/// several objects from one stream get a stable, documented order.
pub fn sample_permutation(len: usize, stream: &mut KeyedStream) -> Vec<u32> {
    assert!(len <= u32::MAX as usize, "permutation length exceeds u32");
    let mut perm: Vec<u32> = (0..len as u32).collect();
    for i in (1..len).rev() {
        let j = stream.below(i as u64 + 1) as usize;
        perm.swap(i, j);
    }
    perm
}
