//! Linear autoencoder over distributed image shards.
//!
//! Worker `i` holds rows `a_j ∈ R^{d_f}` and minimizes
//! `f_i(D, E) = (1/m_i)·Σ_j ‖DEa_j − a_j‖² + (λ/2)·‖DE − I‖_F²`
//! in the decoder `D ∈ R^{d_f×d_e}` and encoder `E ∈ R^{d_e×d_f}`, flattened
//! row-major as `[D, E]` into `d = 2·d_f·d_e` parameters. The objective is a
//! quartic in `(D, E)` — nonconvex, with parameter-dependent curvature — so
//! the reported smoothness constants are finite-difference estimates local to
//! the starting point and flagged inexact.
//!
//! Data heterogeneity is controlled at construction: the source rows are cut
//! into `n + 1` near-equal shards and each worker is independently handed the
//! shared shard with probability `p̂`, its private shard otherwise.

use super::{write_f64_slice, DistributedTask, PayloadReader, TaskArtifact, TaskError};
use crate::analysis::{GradFamily, SmoothnessConstants};
use crate::rng::{sample_permutation, KeyedStream, StreamDomain};

/// A heterogeneity-controlled partition of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<T> {
    /// `n + 1` shards: index 0 is shared, index `i + 1` is private to worker `i`.
    pub shards: Vec<Vec<T>>,
    /// Shard index each worker was handed (0 or `i + 1`).
    pub assignment: Vec<u32>,
    /// Probability of the shared shard.
    pub p_hat: f64,
}

impl<T> DatasetSplit<T> {
    /// The shard worker `i` operates on.
    pub fn worker_shard(&self, worker: usize) -> &[T] {
        &self.shards[self.assignment[worker] as usize]
    }
}

/// Shuffle `data` into `n + 1` near-equal shards and hand each worker the
/// shared shard with probability `p_hat`, its own private shard otherwise.
pub fn split_heterogeneous<T: Clone>(
    data: &[T],
    n: u32,
    p_hat: f64,
    seed: u64,
) -> Result<DatasetSplit<T>, TaskError> {
    if n == 0 {
        return Err(TaskError::Invalid {
            why: "need at least one worker".into(),
        });
    }
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(TaskError::Invalid {
            why: format!("shared-shard probability {p_hat} must lie in [0, 1]"),
        });
    }
    let shard_count = n as usize + 1;
    if data.len() < shard_count {
        return Err(TaskError::Invalid {
            why: format!(
                "{} items cannot fill {shard_count} nonempty shards",
                data.len()
            ),
        });
    }
    let mut shuffle = KeyedStream::derive(seed, StreamDomain::DataSplit, 0, u64::MAX);
    let order = sample_permutation(data.len(), &mut shuffle);
    let base = data.len() / shard_count;
    let extra = data.len() % shard_count;
    let mut shards = Vec::with_capacity(shard_count);
    let mut cursor = 0usize;
    for s in 0..shard_count {
        let len = base + usize::from(s < extra);
        let shard = order[cursor..cursor + len]
            .iter()
            .map(|&idx| data[idx as usize].clone())
            .collect();
        shards.push(shard);
        cursor += len;
    }
    let assignment = (0..n)
        .map(|i| {
            let mut coin = KeyedStream::derive(seed, StreamDomain::DataSplit, 1, i as u64);
            if coin.bernoulli(p_hat) {
                0
            } else {
                i + 1
            }
        })
        .collect();
    Ok(DatasetSplit {
        shards,
        assignment,
        p_hat,
    })
}

/// A distributed linear-autoencoder objective.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderTask {
    n: u32,
    d_f: u32,
    d_e: u32,
    lambda: f64,
    p_hat: f64,
    seed: u64,
    /// Per-worker data, each a row-major `m_i × d_f` matrix.
    worker_data: Vec<Vec<f64>>,
    x0: Vec<f64>,
}

impl AutoencoderTask {
    /// Build from dataset rows, splitting them across workers.
    pub fn from_dataset(
        rows: &[Vec<f64>],
        n: u32,
        d_e: u32,
        lambda: f64,
        p_hat: f64,
        seed: u64,
    ) -> Result<Self, TaskError> {
        let d_f = match rows.first() {
            Some(r) if !r.is_empty() => r.len() as u32,
            _ => {
                return Err(TaskError::Invalid {
                    why: "dataset must contain nonempty rows".into(),
                })
            }
        };
        if rows.iter().any(|r| r.len() != d_f as usize) {
            return Err(TaskError::Invalid {
                why: "dataset rows must share one width".into(),
            });
        }
        if d_e == 0 || d_e > d_f {
            return Err(TaskError::Invalid {
                why: format!("encoding size {d_e} must lie in 1..={d_f}"),
            });
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(TaskError::Invalid {
                why: format!("regularizer {lambda} must be nonnegative"),
            });
        }
        let split = split_heterogeneous(rows, n, p_hat, seed)?;
        let worker_data = (0..n as usize)
            .map(|i| {
                let shard = split.worker_shard(i);
                let mut flat = Vec::with_capacity(shard.len() * d_f as usize);
                for row in shard {
                    flat.extend_from_slice(row);
                }
                flat
            })
            .collect();
        let x0 = xavier_init(d_f, d_e, seed);
        Ok(AutoencoderTask {
            n,
            d_f,
            d_e,
            lambda,
            p_hat,
            seed,
            worker_data,
            x0,
        })
    }

    /// Build from a synthetic Gaussian-mixture dataset (four random centers,
    /// isotropic noise 0.3) when no image corpus is configured.
    pub fn synthetic(
        n: u32,
        d_f: u32,
        d_e: u32,
        lambda: f64,
        p_hat: f64,
        seed: u64,
        items: usize,
    ) -> Result<Self, TaskError> {
        if d_f == 0 {
            return Err(TaskError::Invalid {
                why: "feature dimension must be positive".into(),
            });
        }
        let mut gen = KeyedStream::derive(seed, StreamDomain::TaskGen, 0, 0);
        let centers: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut c = vec![0.0; d_f as usize];
                gen.fill_gauss(&mut c);
                c
            })
            .collect();
        let rows: Vec<Vec<f64>> = (0..items)
            .map(|_| {
                let center = &centers[gen.below(4) as usize];
                center
                    .iter()
                    .map(|&c| c + 0.3 * gen.gauss())
                    .collect()
            })
            .collect();
        Self::from_dataset(&rows, n, d_e, lambda, p_hat, seed)
    }

    /// Regularizer weight λ.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Shared-shard probability used by the split.
    pub fn p_hat(&self) -> f64 {
        self.p_hat
    }

    /// Construction seed.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Feature and encoding widths `(d_f, d_e)`.
    pub fn shape(&self) -> (u32, u32) {
        (self.d_f, self.d_e)
    }

    /// Rows held by one worker.
    pub fn worker_rows(&self, worker: usize) -> usize {
        self.worker_data[worker].len() / self.d_f as usize
    }

    /// One worker's objective value at `x = [D, E]`.
    pub fn worker_value(&self, worker: usize, x: &[f64]) -> f64 {
        let (d_f, d_e) = (self.d_f as usize, self.d_e as usize);
        let (dec, enc) = x.split_at(d_f * d_e);
        let data = &self.worker_data[worker];
        let m = data.len() / d_f;
        let mut encoded = vec![0.0; d_e];
        let mut loss = 0.0;
        for j in 0..m {
            let a = &data[j * d_f..(j + 1) * d_f];
            encode(enc, a, &mut encoded, d_e, d_f);
            let mut row_sq = 0.0;
            for p in 0..d_f {
                let mut y = 0.0;
                for k in 0..d_e {
                    y += dec[p * d_e + k] * encoded[k];
                }
                let r = y - a[p];
                row_sq += r * r;
            }
            loss += row_sq;
        }
        loss /= m as f64;
        if self.lambda > 0.0 {
            loss += 0.5 * self.lambda * product_minus_identity_frob_sq(dec, enc, d_f, d_e);
        }
        loss
    }

    /// Largest curvature magnitudes estimated by finite-difference Hessian
    /// products at the starting point.
    fn estimate_constants(&self) -> SmoothnessConstants {
        let d = self.dim();
        let n = self.workers();
        let x0 = &self.x0;
        let norm0 = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = 1e-4 * (1.0 + norm0);

        // Central-difference Hessian-vector product for one worker.
        let hvp = |worker: usize, v: &[f64], out: &mut [f64], buf: &mut FdBuffers| {
            for j in 0..d {
                buf.plus[j] = x0[j] + h * v[j];
                buf.minus[j] = x0[j] - h * v[j];
            }
            self.grad(worker, &buf.plus, &mut buf.g_plus);
            self.grad(worker, &buf.minus, &mut buf.g_minus);
            for j in 0..d {
                out[j] = (buf.g_plus[j] - buf.g_minus[j]) / (2.0 * h);
            }
        };
        let mean_hvp = |v: &[f64], out: &mut [f64], buf: &mut FdBuffers| {
            out.iter_mut().for_each(|o| *o = 0.0);
            for i in 0..n {
                hvp(i, v, &mut buf.single, buf.inner.as_mut().unwrap());
                for j in 0..d {
                    out[j] += buf.single[j] / n as f64;
                }
            }
        };

        let mut buf = FdBuffers::new(d, true);
        // λmax of H̄², i.e. ρ(H̄)².
        let l_minus_sq = power_lambda_max(
            |v, out| {
                let mut tmp = vec![0.0; d];
                mean_hvp(v, &mut tmp, &mut buf);
                mean_hvp(&tmp, out, &mut buf);
            },
            d,
            self.seed,
            0,
        );
        let mut buf2 = FdBuffers::new(d, true);
        // λmax of (1/n)Σ H_i².
        let l_plus_sq = power_lambda_max(
            |v, out| {
                out.iter_mut().for_each(|o| *o = 0.0);
                let mut tmp = vec![0.0; d];
                for i in 0..n {
                    hvp(i, v, &mut tmp, buf2.inner.as_mut().unwrap());
                    hvp(i, &tmp, &mut buf2.single, buf2.inner.as_mut().unwrap());
                    for j in 0..d {
                        out[j] += buf2.single[j] / n as f64;
                    }
                }
            },
            d,
            self.seed,
            1,
        );
        let mut buf3 = FdBuffers::new(d, true);
        // λmax of (1/n)Σ H_i² − H̄².
        let l_pm_sq = power_lambda_max(
            |v, out| {
                out.iter_mut().for_each(|o| *o = 0.0);
                let mut tmp = vec![0.0; d];
                for i in 0..n {
                    hvp(i, v, &mut tmp, buf3.inner.as_mut().unwrap());
                    hvp(i, &tmp, &mut buf3.single, buf3.inner.as_mut().unwrap());
                    for j in 0..d {
                        out[j] += buf3.single[j] / n as f64;
                    }
                }
                mean_hvp(v, &mut tmp, &mut buf3);
                let tmp2 = tmp.clone();
                mean_hvp(&tmp2, &mut tmp, &mut buf3);
                for j in 0..d {
                    out[j] -= tmp[j];
                }
            },
            d,
            self.seed,
            2,
        );
        SmoothnessConstants {
            l_minus: l_minus_sq.max(0.0).sqrt(),
            l_plus: l_plus_sq.max(0.0).sqrt(),
            l_pm: l_pm_sq.max(0.0).sqrt(),
            mu: None,
            exact: false,
        }
    }
}

/// Scratch space for finite-difference Hessian products.
struct FdBuffers {
    plus: Vec<f64>,
    minus: Vec<f64>,
    g_plus: Vec<f64>,
    g_minus: Vec<f64>,
    single: Vec<f64>,
    inner: Option<Box<FdBuffers>>,
}

impl FdBuffers {
    fn new(d: usize, nested: bool) -> Self {
        FdBuffers {
            plus: vec![0.0; d],
            minus: vec![0.0; d],
            g_plus: vec![0.0; d],
            g_minus: vec![0.0; d],
            single: vec![0.0; d],
            inner: if nested {
                Some(Box::new(FdBuffers::new(d, false)))
            } else {
                None
            },
        }
    }
}

/// Power iteration for the top eigenvalue of a symmetric PSD operator given
/// as a closure. Deterministic start drawn from the eigensolver stream.
fn power_lambda_max(
    mut op: impl FnMut(&[f64], &mut [f64]),
    d: usize,
    seed: u64,
    which: u64,
) -> f64 {
    let mut stream = KeyedStream::derive(seed, StreamDomain::EigenStart, which, 0);
    let mut v = vec![0.0; d];
    stream.fill_gauss(&mut v);
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    let mut w = vec![0.0; d];
    let mut lambda = 0.0;
    for _ in 0..80 {
        op(&v, &mut w);
        let next = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let wn = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if wn == 0.0 {
            return 0.0;
        }
        for j in 0..d {
            v[j] = w[j] / wn;
        }
        if (next - lambda).abs() <= 1e-9 * next.abs().max(1.0) {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// `encoded = E a` for row-major `E (d_e × d_f)`.
fn encode(enc: &[f64], a: &[f64], encoded: &mut [f64], d_e: usize, d_f: usize) {
    for k in 0..d_e {
        let row = &enc[k * d_f..(k + 1) * d_f];
        encoded[k] = row.iter().zip(a).map(|(e, x)| e * x).sum();
    }
}

/// `‖DE − I‖_F²` for row-major factors.
fn product_minus_identity_frob_sq(dec: &[f64], enc: &[f64], d_f: usize, d_e: usize) -> f64 {
    let mut acc = 0.0;
    for p in 0..d_f {
        for q in 0..d_f {
            let mut m = 0.0;
            for k in 0..d_e {
                m += dec[p * d_e + k] * enc[k * d_f + q];
            }
            if p == q {
                m -= 1.0;
            }
            acc += m * m;
        }
    }
    acc
}

impl GradFamily for AutoencoderTask {
    fn workers(&self) -> usize {
        self.n as usize
    }

    fn dim(&self) -> usize {
        2 * (self.d_f * self.d_e) as usize
    }

    fn grad(&self, worker: usize, x: &[f64], out: &mut [f64]) {
        let (d_f, d_e) = (self.d_f as usize, self.d_e as usize);
        let block = d_f * d_e;
        let (dec, enc) = x.split_at(block);
        out.iter_mut().for_each(|o| *o = 0.0);
        let (g_dec, g_enc) = out.split_at_mut(block);

        let data = &self.worker_data[worker];
        let m = data.len() / d_f;
        let inv_m = 2.0 / m as f64;
        let mut encoded = vec![0.0; d_e];
        let mut residual = vec![0.0; d_f];
        let mut dtr = vec![0.0; d_e];
        for j in 0..m {
            let a = &data[j * d_f..(j + 1) * d_f];
            encode(enc, a, &mut encoded, d_e, d_f);
            for p in 0..d_f {
                let mut y = 0.0;
                for k in 0..d_e {
                    y += dec[p * d_e + k] * encoded[k];
                }
                residual[p] = y - a[p];
            }
            // ∂D ← (2/m)·r (Ea)ᵀ
            for p in 0..d_f {
                let rp = inv_m * residual[p];
                for k in 0..d_e {
                    g_dec[p * d_e + k] += rp * encoded[k];
                }
            }
            // ∂E ← (2/m)·(Dᵀr) aᵀ
            for k in 0..d_e {
                let mut acc = 0.0;
                for p in 0..d_f {
                    acc += dec[p * d_e + k] * residual[p];
                }
                dtr[k] = inv_m * acc;
            }
            for k in 0..d_e {
                for l in 0..d_f {
                    g_enc[k * d_f + l] += dtr[k] * a[l];
                }
            }
        }

        if self.lambda > 0.0 {
            // M = DE − I; ∂D ← λ·M Eᵀ; ∂E ← λ·Dᵀ M.
            let mut m_row = vec![0.0; d_f];
            for p in 0..d_f {
                for q in 0..d_f {
                    let mut v = 0.0;
                    for k in 0..d_e {
                        v += dec[p * d_e + k] * enc[k * d_f + q];
                    }
                    if p == q {
                        v -= 1.0;
                    }
                    m_row[q] = v;
                }
                for k in 0..d_e {
                    let enc_row = &enc[k * d_f..(k + 1) * d_f];
                    let dot: f64 = m_row.iter().zip(enc_row).map(|(a, b)| a * b).sum();
                    g_dec[p * d_e + k] += self.lambda * dot;
                }
                for k in 0..d_e {
                    let dpk = dec[p * d_e + k];
                    for l in 0..d_f {
                        g_enc[k * d_f + l] += self.lambda * dpk * m_row[l];
                    }
                }
            }
        }
    }
}

/// Row-major Xavier-uniform factors for `[D, E]`.
fn xavier_init(d_f: u32, d_e: u32, seed: u64) -> Vec<f64> {
    let block = (d_f * d_e) as usize;
    let bound = (6.0 / (d_f + d_e) as f64).sqrt();
    let mut stream = KeyedStream::derive(seed, StreamDomain::ParamInit, 0, 0);
    (0..2 * block)
        .map(|_| bound * (2.0 * stream.uniform() - 1.0))
        .collect()
}

impl DistributedTask for AutoencoderTask {
    fn x0(&self) -> &[f64] {
        &self.x0
    }

    fn value(&self, x: &[f64]) -> f64 {
        (0..self.workers())
            .map(|i| self.worker_value(i, x))
            .sum::<f64>()
            / self.workers() as f64
    }

    fn smoothness(&self) -> SmoothnessConstants {
        self.estimate_constants()
    }

    fn f_star(&self, _tol: f64) -> Option<f64> {
        None
    }

    fn kind_label(&self) -> &'static str {
        "autoencoder"
    }

    fn fingerprint(&self) -> String {
        TaskArtifact::Autoencoder(self.clone()).fingerprint()
    }
}

impl AutoencoderTask {
    pub(super) fn write_payload(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&self.d_f.to_le_bytes());
        out.extend_from_slice(&self.d_e.to_le_bytes());
        out.extend_from_slice(&self.lambda.to_le_bytes());
        out.extend_from_slice(&self.p_hat.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        write_f64_slice(out, &self.x0);
        for data in &self.worker_data {
            let rows = (data.len() / self.d_f as usize) as u32;
            out.extend_from_slice(&rows.to_le_bytes());
            write_f64_slice(out, data);
        }
    }

    pub(super) fn read_payload(r: &mut PayloadReader<'_>) -> Result<Self, TaskError> {
        let n = r.read_u32()?;
        let d_f = r.read_u32()?;
        let d_e = r.read_u32()?;
        if n == 0 || d_f == 0 || d_e == 0 || d_e > d_f {
            return Err(TaskError::Corrupt {
                why: format!("bad shape n = {n}, d_f = {d_f}, d_e = {d_e}"),
            });
        }
        let lambda = r.read_f64()?;
        let p_hat = r.read_f64()?;
        let seed = r.read_u64()?;
        let x0 = r.read_f64_vec(2 * (d_f * d_e) as usize)?;
        let mut worker_data = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let rows = r.read_u32()? as usize;
            if rows == 0 {
                return Err(TaskError::Corrupt {
                    why: "worker shard is empty".into(),
                });
            }
            worker_data.push(r.read_f64_vec(rows * d_f as usize)?);
        }
        Ok(AutoencoderTask {
            n,
            d_f,
            d_e,
            lambda,
            p_hat,
            seed,
            worker_data,
            x0,
        })
    }
}
