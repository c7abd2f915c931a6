//! Exact expectations over a compressor's randomness by full enumeration.
//!
//! The discrete compressors draw from small, perfectly known sample spaces:
//! permutations of coordinates, slots, or workers, and uniform `k`-subsets.
//! Enumerating those spaces gives exact expectations that serve as the
//! ground truth the sampled implementations and closed-form constants are
//! verified against. Spaces are guarded by an outcome budget; continuous
//! randomness (the stochastic quantizer) is not enumerable and must be
//! checked by Monte Carlo instead.

use super::{
    block_perm_with, permk_big_d_with, permk_big_n_with, randk_with, topk, CompressError,
    CompressorSpec, Quantizer, SparseMessage,
};

/// Upper bound on the number of enumerated outcomes.
pub const MAX_OUTCOMES: u64 = 2_000_000;

/// All permutations of `{0..len-1}` (Heap's algorithm), unordered.
pub fn permutations(len: usize) -> Vec<Vec<u32>> {
    let mut current: Vec<u32> = (0..len as u32).collect();
    let mut out = vec![current.clone()];
    let mut counters = vec![0usize; len];
    let mut i = 1;
    while i < len {
        if counters[i] < i {
            if i % 2 == 0 {
                current.swap(0, i);
            } else {
                current.swap(counters[i], i);
            }
            out.push(current.clone());
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    out
}

/// All `k`-subsets of `{0..len-1}`, each sorted ascending.
pub fn k_subsets(len: usize, k: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current: Vec<u32> = (0..k as u32).collect();
    if k == 0 {
        return vec![vec![]];
    }
    if k > len {
        return out;
    }
    loop {
        out.push(current.clone());
        // Advance the lexicographically next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] < (len - k + i) as u32 {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        current[i] += 1;
        for j in (i + 1)..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

fn factorial_f64(n: u32) -> f64 {
    (1..=n as u64).map(|v| v as f64).product()
}

fn binomial_f64(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

fn guard(approx: f64) -> Result<(), CompressError> {
    if !(approx <= MAX_OUTCOMES as f64) {
        return Err(CompressError::EnumerationTooLarge {
            approx,
            limit: MAX_OUTCOMES,
        });
    }
    Ok(())
}

/// Visit every equally likely outcome of the compressor's randomness.
///
/// For each outcome, `visit` receives a function mapping
/// `(worker_id, worker_input)` to that worker's message under the outcome.
/// Returns the number of outcomes (all of probability `1/count`).
pub fn enumerate_outcomes<F>(
    spec: &CompressorSpec,
    n: u32,
    d: u32,
    mut visit: F,
) -> Result<u64, CompressError>
where
    F: FnMut(&dyn Fn(u32, &[f64]) -> SparseMessage),
{
    spec.validate(n, d)?;
    match spec {
        CompressorSpec::PermKBigD => {
            let r = d % n;
            let perm_space = factorial_f64(d) * if r > 0 { factorial_f64(n) } else { 1.0 };
            guard(perm_space)?;
            let perms_d = permutations(d as usize);
            if r == 0 {
                for pd in &perms_d {
                    visit(&|w, x| permk_big_d_with(x, w, n, pd, &[]));
                }
                Ok(perms_d.len() as u64)
            } else {
                let perms_n = permutations(n as usize);
                for pd in &perms_d {
                    for pn in &perms_n {
                        visit(&|w, x| permk_big_d_with(x, w, n, pd, pn));
                    }
                }
                Ok((perms_d.len() * perms_n.len()) as u64)
            }
        }
        CompressorSpec::PermKBigN => {
            guard(factorial_f64(n))?;
            let perms = permutations(n as usize);
            for p in &perms {
                visit(&|w, x| permk_big_n_with(x, w, n, p));
            }
            Ok(perms.len() as u64)
        }
        CompressorSpec::BlockPerm { partition } => {
            guard(factorial_f64(n))?;
            let perms = permutations(n as usize);
            for p in &perms {
                visit(&|w, x| block_perm_with(x, w, n, partition, p));
            }
            Ok(perms.len() as u64)
        }
        CompressorSpec::RandK { k, shared: true } => {
            guard(binomial_f64(d, *k))?;
            let subsets = k_subsets(d as usize, *k as usize);
            for s in &subsets {
                visit(&|_, x| randk_with(x, s));
            }
            Ok(subsets.len() as u64)
        }
        CompressorSpec::RandK { k, shared: false } => {
            let per_worker = binomial_f64(d, *k);
            guard(per_worker.powi(n as i32))?;
            let subsets = k_subsets(d as usize, *k as usize);
            let m = subsets.len();
            // Odometer over one subset choice per worker.
            let mut idx = vec![0usize; n as usize];
            let mut count = 0u64;
            loop {
                visit(&|w, x| randk_with(x, &subsets[idx[w as usize]]));
                count += 1;
                let mut pos = 0;
                loop {
                    if pos == idx.len() {
                        return Ok(count);
                    }
                    idx[pos] += 1;
                    if idx[pos] < m {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
            }
        }
        CompressorSpec::TopK { k } => {
            // Deterministic: a single certain outcome.
            visit(&|_, x| topk(x, *k));
            Ok(1)
        }
        CompressorSpec::Composed { inner, quantizer } => match quantizer {
            Quantizer::Identity => enumerate_outcomes(inner, n, d, visit),
            Quantizer::Pow2Stochastic => Err(CompressError::NotEnumerable {
                kind: "Composed with a stochastic quantizer (continuous randomness)",
            }),
        },
    }
}

/// Exact `E‖(1/n) Σ_i C_i(a_i) − m‖²` over the enumerated randomness, where
/// `m` is the supplied reference vector (typically the input mean).
pub fn expected_aggregate_error_sq(
    spec: &CompressorSpec,
    inputs: &[Vec<f64>],
    reference: &[f64],
) -> Result<f64, CompressError> {
    let n = inputs.len() as u32;
    let d = reference.len();
    let mut acc = 0.0;
    let mut agg = vec![0.0; d];
    let count = enumerate_outcomes(spec, n, d as u32, |msg_of| {
        agg.iter_mut().for_each(|v| *v = 0.0);
        for (i, x) in inputs.iter().enumerate() {
            msg_of(i as u32, x).add_into(&mut agg, 1.0 / n as f64);
        }
        acc += agg
            .iter()
            .zip(reference)
            .map(|(a, m)| (a - m) * (a - m))
            .sum::<f64>();
    })?;
    Ok(acc / count as f64)
}

/// Exact `E[(1/n) Σ_i C_i(a_i)]` over the enumerated randomness.
pub fn expected_aggregate(
    spec: &CompressorSpec,
    inputs: &[Vec<f64>],
) -> Result<Vec<f64>, CompressError> {
    let n = inputs.len() as u32;
    let d = inputs[0].len();
    let mut acc = vec![0.0; d];
    let count = enumerate_outcomes(spec, n, d as u32, |msg_of| {
        for (i, x) in inputs.iter().enumerate() {
            msg_of(i as u32, x).add_into(&mut acc, 1.0 / n as f64);
        }
    })?;
    for v in &mut acc {
        *v /= count as f64;
    }
    Ok(acc)
}

/// Exact `E[C_i(x)]` for one worker over the enumerated randomness.
pub fn expected_message(
    spec: &CompressorSpec,
    x: &[f64],
    worker_id: u32,
    n: u32,
) -> Result<Vec<f64>, CompressError> {
    let d = x.len();
    let mut acc = vec![0.0; d];
    let count = enumerate_outcomes(spec, n, d as u32, |msg_of| {
        msg_of(worker_id, x).add_into(&mut acc, 1.0);
    })?;
    for v in &mut acc {
        *v /= count as f64;
    }
    Ok(acc)
}
