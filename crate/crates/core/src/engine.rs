//! Deterministic synchronous drivers for compressed-gradient methods.
//!
//! Three methods share one trace format: a variance-reduced method whose
//! workers send compressed gradient *differences* and occasionally perform a
//! coin-triggered full synchronization; an error-feedback method whose
//! workers greedily compress the gap between their local gradient and a
//! persistent memory vector; and plain distributed gradient descent as the
//! uncompressed baseline.
//!
//! Determinism: every random choice (sync coins, compressor randomness,
//! output-iterate selection) is drawn from keyed counter streams derived from
//! the run's master seed, and server aggregation always sums worker
//! contributions in ascending worker order. Re-running a configuration
//! reproduces the trace bit for bit regardless of host parallelism.
//!
//! Metering: the trace counts the coordinates each worker uploads
//! (`floats`), plus a configurable bits-per-coordinate conversion. Index
//! side-channel costs can optionally be charged for compressors whose support
//! is data-dependent and therefore not reconstructible from shared
//! randomness. Initialization gradients are not metered; the cost of round
//! `t` is what workers upload during that round.

use crate::analysis::Objective;
use crate::compressors::{CompressError, CompressorSpec, RoundContext};
use crate::problems::DistributedTask;
use crate::rng::{KeyedStream, StreamDomain};

/// Iterates whose norm or objective value pass this magnitude abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Conversion from transmitted coordinates to wire size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeterConfig {
    /// Bits charged per transmitted coordinate (default single precision).
    pub bits_per_coord: u32,
    /// Charge `ceil(log2 d)` extra bits per coordinate for compressors whose
    /// selected support cannot be replayed from shared randomness.
    pub count_selection_indices: bool,
}

impl Default for MeterConfig {
    fn default() -> Self {
        MeterConfig {
            bits_per_coord: 32,
            count_selection_indices: false,
        }
    }
}

/// Everything a driver needs besides the task and method parameters.
#[derive(Debug, Clone)]
pub struct RunSettings {
    /// Number of optimization rounds `T`.
    pub rounds: u64,
    /// Master seed; all run randomness derives from it.
    pub master_seed: u64,
    /// Communication accounting.
    pub meter: MeterConfig,
    /// Known minimum of `f`, enabling gap columns and sharp-rate checks.
    pub f_star: Option<f64>,
}

impl RunSettings {
    pub fn new(rounds: u64, master_seed: u64) -> Self {
        RunSettings {
            rounds,
            master_seed,
            meter: MeterConfig::default(),
            f_star: None,
        }
    }
}

/// Identity of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub method: String,
    pub compressor: String,
    pub n: u32,
    pub d: u32,
    pub master_seed: u64,
    pub gamma: f64,
    /// Sync probability (variance-reduced method only).
    pub p: Option<f64>,
    /// Requested rounds (a diverged run records fewer).
    pub rounds: u64,
}

/// State of the run after one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub round: u64,
    /// Whether this round was a full synchronization.
    pub theta: bool,
    /// Largest per-worker cumulative upload, in coordinates.
    pub cum_floats_per_node: u64,
    /// Largest per-worker cumulative upload, in bits.
    pub cum_bits_per_node: u64,
    /// `‖∇f(x^t)‖²` at this round's iterate.
    pub grad_norm_sq: f64,
    /// `f(x^t)`.
    pub f_value: f64,
    /// `f(x^t) − f*` when the minimum is known.
    pub f_gap: Option<f64>,
}

/// Why and when a run was cut short.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub round: u64,
    pub reason: String,
}

/// Complete account of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub meta: RunMeta,
    /// One record per visited iterate, starting at round 0. A full run has
    /// `rounds + 1` records; a diverged run stops at the last finite iterate.
    pub records: Vec<RunRecord>,
    pub diverged: Option<Divergence>,
    /// Output iterate: uniform draw from `{x^0, …, x^{T−1}}`.
    pub xhat: Vec<f64>,
    pub xhat_round: u64,
    /// Iterate with the smallest recorded gradient norm (diagnostic).
    pub best_round: u64,
    pub best_grad_norm_sq: f64,
    /// Average coordinates uploaded per round per worker.
    pub mean_floats_per_round_per_node: f64,
    /// Total coordinates uploaded by all workers over the whole run.
    pub total_floats_all_workers: u64,
}

impl RunTrace {
    /// Completed optimization rounds (excludes the round-0 record).
    pub fn completed_rounds(&self) -> u64 {
        self.records.len() as u64 - 1
    }

    /// Smallest gradient norm seen without exceeding a per-node upload
    /// budget, in coordinates.
    pub fn min_grad_within_budget(&self, budget_floats: u64) -> Option<f64> {
        self.records
            .iter()
            .filter(|r| r.cum_floats_per_node <= budget_floats)
            .map(|r| r.grad_norm_sq)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }
}

/// Driver failure independent of the trajectory.
#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("stepsize {0} must be finite and nonnegative")]
    BadStepsize(f64),
    #[error("sync probability {0} must lie in (0, 1]")]
    BadProbability(f64),
    #[error("error-feedback needs the greedy top-k compressor, got {0}")]
    NeedsContractive(String),
    #[error(transparent)]
    Compress(#[from] CompressError),
}

/// Post-round snapshot handed to observers.
pub struct RoundInfo<'a> {
    /// Round just completed (1-based).
    pub round: u64,
    /// Full-sync flag of this round.
    pub theta: bool,
    /// Iterate before the update.
    pub x_prev: &'a [f64],
    /// Iterate after the update.
    pub x: &'a [f64],
    /// Server estimator after aggregation.
    pub server_g: &'a [f64],
    /// Worker estimators after their updates.
    pub worker_g: &'a [Vec<f64>],
    /// Fresh local gradients at `x`.
    pub grads: &'a [Vec<f64>],
}

/// Hook for tests and diagnostics; the default does nothing.
pub trait RunObserver {
    fn after_round(&mut self, _info: &RoundInfo<'_>) {}
}

/// No-op observer.
pub struct NoObserver;

impl RunObserver for NoObserver {}

fn mean_ascending(parts: &[Vec<f64>], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for part in parts {
        for (o, v) in out.iter_mut().zip(part) {
            *o += v;
        }
    }
    let n = parts.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Reason the trajectory must stop, if any.
fn divergence_reason(x: &[f64], f_value: f64, grad_norm_sq: f64) -> Option<String> {
    if !f_value.is_finite() || f_value.abs() > DIVERGENCE_LIMIT {
        return Some(format!(
            "objective reached {f_value:e}; the stepsize is likely too large"
        ));
    }
    let xn = norm_sq(x);
    if !xn.is_finite() || xn > DIVERGENCE_LIMIT * DIVERGENCE_LIMIT {
        return Some(format!(
            "iterate norm reached {:e}; the stepsize is likely too large",
            xn.sqrt()
        ));
    }
    if !grad_norm_sq.is_finite() {
        return Some("gradient became non-finite".into());
    }
    None
}

/// Bits to address one of `d` coordinates.
fn index_bits(d: usize) -> u64 {
    if d <= 1 {
        0
    } else {
        (usize::BITS - (d - 1).leading_zeros()) as u64
    }
}

/// Whether the receiver can only learn the support from explicit indices.
fn support_is_data_dependent(spec: &CompressorSpec) -> bool {
    match spec {
        CompressorSpec::TopK { .. } => true,
        CompressorSpec::RandK { shared, .. } => !shared,
        CompressorSpec::Composed { inner, .. } => support_is_data_dependent(inner),
        _ => false,
    }
}

/// Shared per-run bookkeeping: per-worker meters and the record list.
struct Tape {
    records: Vec<RunRecord>,
    floats: Vec<u64>,
    bits: Vec<u64>,
    f_star: Option<f64>,
}

impl Tape {
    fn new(n: usize, f_star: Option<f64>) -> Self {
        Tape {
            records: Vec::new(),
            floats: vec![0; n],
            bits: vec![0; n],
            f_star,
        }
    }

    fn push(&mut self, round: u64, theta: bool, grad_norm_sq: f64, f_value: f64) {
        self.records.push(RunRecord {
            round,
            theta,
            cum_floats_per_node: self.floats.iter().copied().max().unwrap_or(0),
            cum_bits_per_node: self.bits.iter().copied().max().unwrap_or(0),
            grad_norm_sq,
            f_value,
            f_gap: self.f_star.map(|fs| f_value - fs),
        });
    }
}

/// Pre-draws the output-iterate round from the master stream.
fn draw_output_round(master_seed: u64, rounds: u64) -> u64 {
    if rounds == 0 {
        return 0;
    }
    let mut stream = KeyedStream::derive(master_seed, StreamDomain::OutputChoice, 0, u64::MAX);
    stream.below(rounds)
}

/// Assembles the trace once a driver loop has finished.
#[allow(clippy::too_many_arguments)]
fn finish(
    meta: RunMeta,
    tape: Tape,
    diverged: Option<Divergence>,
    xhat: Option<(Vec<f64>, u64)>,
    last_x: Vec<f64>,
    n: usize,
) -> RunTrace {
    let completed = tape.records.len() as u64 - 1;
    let (xhat, xhat_round) = xhat.unwrap_or((last_x, completed));
    let (best_round, best_grad_norm_sq) = tape
        .records
        .iter()
        .fold((0, f64::INFINITY), |(br, bg), r| {
            if r.grad_norm_sq < bg {
                (r.round, r.grad_norm_sq)
            } else {
                (br, bg)
            }
        });
    let total_floats_all_workers: u64 = tape.floats.iter().sum();
    let mean_floats_per_round_per_node = if completed == 0 {
        0.0
    } else {
        total_floats_all_workers as f64 / (completed as f64 * n as f64)
    };
    RunTrace {
        meta,
        records: tape.records,
        diverged,
        xhat,
        xhat_round,
        best_round,
        best_grad_norm_sq,
        mean_floats_per_round_per_node,
        total_floats_all_workers,
    }
}

fn check_gamma(gamma: f64) -> Result<(), EngineError> {
    if gamma.is_finite() && gamma >= 0.0 {
        Ok(())
    } else {
        Err(EngineError::BadStepsize(gamma))
    }
}

/// Variance-reduced compressed-difference method.
///
/// Per round: `x^{t+1} = x^t − γ g^t`; a shared coin θ_t ~ Be(p) then decides
/// whether every worker uploads its full fresh gradient (metered `d`
/// coordinates) or the compressed difference `C_i(∇f_i(x^{t+1}) − ∇f_i(x^t))`
/// (metered by actual payload). The server folds messages into `g^{t+1}` in
/// ascending worker order.
pub fn run_marina(
    task: &dyn DistributedTask,
    spec: &CompressorSpec,
    p: f64,
    gamma: f64,
    settings: &RunSettings,
) -> Result<RunTrace, EngineError> {
    run_marina_observed(task, spec, p, gamma, settings, &mut NoObserver)
}

/// [`run_marina`] with a per-round observer.
pub fn run_marina_observed(
    task: &dyn DistributedTask,
    spec: &CompressorSpec,
    p: f64,
    gamma: f64,
    settings: &RunSettings,
    observer: &mut dyn RunObserver,
) -> Result<RunTrace, EngineError> {
    check_gamma(gamma)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(EngineError::BadProbability(p));
    }
    let n = task.workers();
    let d = task.dim();
    spec.validate(n as u32, d as u32)?;
    let seed = settings.master_seed;
    let idx_bits = if settings.meter.count_selection_indices && support_is_data_dependent(spec) {
        index_bits(d)
    } else {
        0
    };
    let bpc = settings.meter.bits_per_coord as u64;

    let mut x = task.x0().to_vec();
    let mut x_new = vec![0.0; d];
    let mut grads_prev = vec![vec![0.0; d]; n];
    task.grad_all(&x, &mut grads_prev);
    let mut grads_new = vec![vec![0.0; d]; n];
    let mut worker_g = grads_prev.clone();
    let mut g = vec![0.0; d];
    mean_ascending(&worker_g, &mut g);
    let mut mean_grad = vec![0.0; d];
    let mut delta = vec![0.0; d];
    let mut acc = vec![0.0; d];

    let mut tape = Tape::new(n, settings.f_star);
    tape.push(0, true, norm_sq(&g), task.value(&x));

    let xhat_target = draw_output_round(seed, settings.rounds);
    let mut xhat: Option<(Vec<f64>, u64)> = None;
    let mut diverged = None;

    for t in 0..settings.rounds {
        if t == xhat_target {
            xhat = Some((x.clone(), t));
        }
        for j in 0..d {
            x_new[j] = x[j] - gamma * g[j];
        }
        let f_new = task.value(&x_new);
        task.grad_all(&x_new, &mut grads_new);
        mean_ascending(&grads_new, &mut mean_grad);
        let gns = norm_sq(&mean_grad);
        if let Some(reason) = divergence_reason(&x_new, f_new, gns) {
            diverged = Some(Divergence {
                round: t + 1,
                reason,
            });
            break;
        }
        let round = t + 1;
        let theta =
            KeyedStream::derive(seed, StreamDomain::SyncCoin, round, u64::MAX).bernoulli(p);
        if theta {
            for i in 0..n {
                worker_g[i].copy_from_slice(&grads_new[i]);
                tape.floats[i] += d as u64;
                tape.bits[i] += d as u64 * bpc;
            }
            mean_ascending(&worker_g, &mut g);
        } else {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for i in 0..n {
                for j in 0..d {
                    delta[j] = grads_new[i][j] - grads_prev[i][j];
                }
                let ctx = RoundContext {
                    master_seed: seed,
                    round,
                    worker_id: i as u32,
                    n: n as u32,
                    d: d as u32,
                };
                let msg = spec.compress(&delta, &ctx)?;
                worker_g[i].copy_from_slice(&g);
                msg.add_into(&mut worker_g[i], 1.0);
                msg.add_into(&mut acc, 1.0);
                let payload = msg.payload_coords as u64;
                tape.floats[i] += payload;
                tape.bits[i] += payload * (bpc + idx_bits);
            }
            for j in 0..d {
                g[j] += acc[j] / n as f64;
            }
        }
        tape.push(round, theta, gns, f_new);
        observer.after_round(&RoundInfo {
            round,
            theta,
            x_prev: &x,
            x: &x_new,
            server_g: &g,
            worker_g: &worker_g,
            grads: &grads_new,
        });
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut grads_prev, &mut grads_new);
    }

    let meta = RunMeta {
        method: "marina".into(),
        compressor: spec.label(),
        n: n as u32,
        d: d as u32,
        master_seed: seed,
        gamma,
        p: Some(p),
        rounds: settings.rounds,
    };
    Ok(finish(meta, tape, diverged, xhat, x, n))
}

/// Error-feedback method with greedy contractive compression.
///
/// Per round: `x^{t+1} = x^t − γ·(1/n)Σ g_i^t`; each worker uploads
/// `C_i(∇f_i(x^{t+1}) − g_i^t)` and folds it into its memory `g_i`. Requires
/// the greedy top-k compressor.
pub fn run_ef21(
    task: &dyn DistributedTask,
    spec: &CompressorSpec,
    gamma: f64,
    settings: &RunSettings,
) -> Result<RunTrace, EngineError> {
    run_ef21_observed(task, spec, gamma, settings, &mut NoObserver)
}

/// [`run_ef21`] with a per-round observer.
pub fn run_ef21_observed(
    task: &dyn DistributedTask,
    spec: &CompressorSpec,
    gamma: f64,
    settings: &RunSettings,
    observer: &mut dyn RunObserver,
) -> Result<RunTrace, EngineError> {
    check_gamma(gamma)?;
    if !matches!(spec, CompressorSpec::TopK { .. }) {
        return Err(EngineError::NeedsContractive(spec.label()));
    }
    let n = task.workers();
    let d = task.dim();
    spec.validate(n as u32, d as u32)?;
    let seed = settings.master_seed;
    let idx_bits = if settings.meter.count_selection_indices {
        index_bits(d)
    } else {
        0
    };
    let bpc = settings.meter.bits_per_coord as u64;

    let mut x = task.x0().to_vec();
    let mut x_new = vec![0.0; d];
    let mut worker_g = vec![vec![0.0; d]; n];
    task.grad_all(&x, &mut worker_g);
    let mut grads_new = vec![vec![0.0; d]; n];
    let mut g = vec![0.0; d];
    mean_ascending(&worker_g, &mut g);
    let mut mean_grad = vec![0.0; d];
    let mut delta = vec![0.0; d];

    let mut tape = Tape::new(n, settings.f_star);
    tape.push(0, true, norm_sq(&g), task.value(&x));

    let xhat_target = draw_output_round(seed, settings.rounds);
    let mut xhat: Option<(Vec<f64>, u64)> = None;
    let mut diverged = None;

    for t in 0..settings.rounds {
        if t == xhat_target {
            xhat = Some((x.clone(), t));
        }
        for j in 0..d {
            x_new[j] = x[j] - gamma * g[j];
        }
        let f_new = task.value(&x_new);
        task.grad_all(&x_new, &mut grads_new);
        mean_ascending(&grads_new, &mut mean_grad);
        let gns = norm_sq(&mean_grad);
        if let Some(reason) = divergence_reason(&x_new, f_new, gns) {
            diverged = Some(Divergence {
                round: t + 1,
                reason,
            });
            break;
        }
        let round = t + 1;
        for i in 0..n {
            for j in 0..d {
                delta[j] = grads_new[i][j] - worker_g[i][j];
            }
            let ctx = RoundContext {
                master_seed: seed,
                round,
                worker_id: i as u32,
                n: n as u32,
                d: d as u32,
            };
            let msg = spec.compress(&delta, &ctx)?;
            msg.add_into(&mut worker_g[i], 1.0);
            let payload = msg.payload_coords as u64;
            tape.floats[i] += payload;
            tape.bits[i] += payload * (bpc + idx_bits);
        }
        // The server applies each message to its replica of that worker's
        // memory (the same arithmetic the worker performed) and aggregates
        // the replicas fresh: x^{t+1} = x^t − γ·(1/n)Σᵢ gᵢ^t. Unlike an
        // incremental running sum, this keeps no rounding history, so the
        // identity compressor (k = d) retraces plain descent to round-off.
        mean_ascending(&worker_g, &mut g);
        tape.push(round, false, gns, f_new);
        observer.after_round(&RoundInfo {
            round,
            theta: false,
            x_prev: &x,
            x: &x_new,
            server_g: &g,
            worker_g: &worker_g,
            grads: &grads_new,
        });
        std::mem::swap(&mut x, &mut x_new);
    }

    let meta = RunMeta {
        method: "ef21".into(),
        compressor: spec.label(),
        n: n as u32,
        d: d as u32,
        master_seed: seed,
        gamma,
        p: None,
        rounds: settings.rounds,
    };
    Ok(finish(meta, tape, diverged, xhat, x, n))
}

/// Uncompressed distributed gradient descent baseline. Every worker uploads
/// its full gradient every round.
pub fn run_gd(
    task: &dyn DistributedTask,
    gamma: f64,
    settings: &RunSettings,
) -> Result<RunTrace, EngineError> {
    run_gd_observed(task, gamma, settings, &mut NoObserver)
}

/// [`run_gd`] with a per-round observer.
pub fn run_gd_observed(
    task: &dyn DistributedTask,
    gamma: f64,
    settings: &RunSettings,
    observer: &mut dyn RunObserver,
) -> Result<RunTrace, EngineError> {
    check_gamma(gamma)?;
    let n = task.workers();
    let d = task.dim();
    let seed = settings.master_seed;
    let bpc = settings.meter.bits_per_coord as u64;

    let mut x = task.x0().to_vec();
    let mut x_new = vec![0.0; d];
    let mut grads = vec![vec![0.0; d]; n];
    task.grad_all(&x, &mut grads);
    let mut grads_new = vec![vec![0.0; d]; n];
    let mut g = vec![0.0; d];
    mean_ascending(&grads, &mut g);
    let mut g_new = vec![0.0; d];

    let mut tape = Tape::new(n, settings.f_star);
    tape.push(0, true, norm_sq(&g), task.value(&x));

    let xhat_target = draw_output_round(seed, settings.rounds);
    let mut xhat: Option<(Vec<f64>, u64)> = None;
    let mut diverged = None;

    for t in 0..settings.rounds {
        if t == xhat_target {
            xhat = Some((x.clone(), t));
        }
        for j in 0..d {
            x_new[j] = x[j] - gamma * g[j];
        }
        let f_new = task.value(&x_new);
        task.grad_all(&x_new, &mut grads_new);
        mean_ascending(&grads_new, &mut g_new);
        let gns = norm_sq(&g_new);
        if let Some(reason) = divergence_reason(&x_new, f_new, gns) {
            diverged = Some(Divergence {
                round: t + 1,
                reason,
            });
            break;
        }
        let round = t + 1;
        for i in 0..n {
            tape.floats[i] += d as u64;
            tape.bits[i] += d as u64 * bpc;
        }
        tape.push(round, true, gns, f_new);
        observer.after_round(&RoundInfo {
            round,
            theta: true,
            x_prev: &x,
            x: &x_new,
            server_g: &g_new,
            worker_g: &grads_new,
            grads: &grads_new,
        });
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut grads, &mut grads_new);
        std::mem::swap(&mut g, &mut g_new);
    }

    let meta = RunMeta {
        method: "gd".into(),
        compressor: "none".into(),
        n: n as u32,
        d: d as u32,
        master_seed: seed,
        gamma,
        p: None,
        rounds: settings.rounds,
    };
    Ok(finish(meta, tape, diverged, xhat, x, n))
}

/// Verdict of a convergence-rate check.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    pub objective: Objective,
    /// Measured side: smallest squared gradient norm (stationarity mode) or
    /// the worst per-round gap/bound ratio (gradient-dominated mode).
    pub lhs: f64,
    /// Guaranteed side: `2Δ⁰/(γT)` (stationarity) or `1` (ratio form).
    pub rhs: f64,
    pub holds: bool,
}

/// Failure to evaluate a rate bound.
#[derive(Debug, thiserror::Error)]
pub enum TheoryCheckError {
    #[error("rate check needs the optimum value f*")]
    MissingFStar,
    #[error("rate check needs a strong-convexity constant mu")]
    MissingMu,
    #[error("run diverged at round {0}; no rate applies")]
    Diverged(u64),
    #[error("run has no completed rounds")]
    EmptyTrace,
    #[error("decay rate gamma*mu = {0} escapes (0, 1)")]
    BadRate(f64),
}

/// Checks a finished trace against the method's convergence guarantee.
///
/// Stationarity mode compares `min_t ‖∇f(x^t)‖²` over `t < T` against
/// `2Δ⁰/(γT)`. Gradient-dominated mode (`mu` required) checks the per-round
/// bound `f(x^t) − f* ≤ (1 − γμ)^t·Δ⁰` and reports the worst ratio.
pub fn theory_check(
    trace: &RunTrace,
    objective: Objective,
    mu: Option<f64>,
) -> Result<TheoryReport, TheoryCheckError> {
    if let Some(divergence) = &trace.diverged {
        return Err(TheoryCheckError::Diverged(divergence.round));
    }
    let t_total = trace.completed_rounds();
    if t_total == 0 {
        return Err(TheoryCheckError::EmptyTrace);
    }
    let delta0 = trace.records[0]
        .f_gap
        .ok_or(TheoryCheckError::MissingFStar)?;
    let gamma = trace.meta.gamma;
    match objective {
        Objective::Nonconvex => {
            let lhs = trace.records[..t_total as usize]
                .iter()
                .map(|r| r.grad_norm_sq)
                .fold(f64::INFINITY, f64::min);
            let rhs = 2.0 * delta0 / (gamma * t_total as f64);
            Ok(TheoryReport {
                objective,
                lhs,
                rhs,
                holds: lhs <= rhs * (1.0 + 1e-12),
            })
        }
        Objective::Pl => {
            let mu = mu.ok_or(TheoryCheckError::MissingMu)?;
            let rate = 1.0 - gamma * mu;
            if !(0.0..1.0).contains(&rate) {
                return Err(TheoryCheckError::BadRate(gamma * mu));
            }
            let mut bound = delta0;
            let mut worst = 0.0_f64;
            for record in &trace.records {
                if record.round > 0 {
                    bound *= rate;
                }
                // Ratios collapse into fp noise once both sides underflow.
                if bound < 1e-250 {
                    break;
                }
                let gap = record.f_gap.ok_or(TheoryCheckError::MissingFStar)?;
                worst = worst.max(gap / bound);
            }
            Ok(TheoryReport {
                objective,
                lhs: worst,
                rhs: 1.0,
                holds: worst <= 1.0 + 1e-9,
            })
        }
    }
}
