//! Smoothness constants, theoretical stepsizes, and communication-complexity
//! predictions.
//!
//! Three constants describe a distributed family `f = (1/n) Σ f_i`:
//!
//! * `L−` — smoothness of the mean: `‖∇f(x) − ∇f(y)‖ ≤ L−‖x − y‖`;
//! * `L+` — root-mean-square worker smoothness:
//!   `(1/n)Σ‖∇f_i(x) − ∇f_i(y)‖² ≤ L+²‖x − y‖²`;
//! * `L±` — *gradient dissimilarity*: the smallest constant with
//!   `(1/n)Σ‖∇f_i(x) − ∇f_i(y)‖² − ‖∇f(x) − ∇f(y)‖² ≤ L±²‖x − y‖²`.
//!
//! They always satisfy `L− ≤ L+` and `L+² − L−² ≤ L±² ≤ L+²`; identical
//! workers (up to linear terms) have `L± = 0`, which is exactly the setting
//! where permutation compressors shine. The stepsize and complexity rules
//! here combine these constants with the compressor's aggregate variance
//! constants `(A, B)`.

use crate::compressors::ABConstants;
use crate::linalg::{eig_extreme, Extreme, SymOp};
use crate::rng::{KeyedStream, StreamDomain};
use thiserror::Error;

/// Which convergence guarantee a stepsize or complexity targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Drive the squared gradient norm below a target (general smooth case).
    Nonconvex,
    /// Geometric decay of the function gap under a Polyak–Łojasiewicz
    /// constant `μ`.
    Pl,
}

/// Smoothness description of a distributed objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessConstants {
    /// Smoothness of the mean objective.
    pub l_minus: f64,
    /// Root-mean-square worker smoothness.
    pub l_plus: f64,
    /// Gradient-dissimilarity constant.
    pub l_pm: f64,
    /// Polyak–Łojasiewicz constant, when known.
    pub mu: Option<f64>,
    /// Whether the values are exact (closed form) or conservative estimates.
    pub exact: bool,
}

impl SmoothnessConstants {
    /// Check internal consistency: nonnegativity, `L− ≤ L+`,
    /// `L+² − L−² ≤ L±² ≤ L+²`, and `μ ≤ L−` when present, up to `tol`.
    pub fn validate(&self, tol: f64) -> Result<(), AnalysisError> {
        let bad = |why: String| Err(AnalysisError::InconsistentConstants { why });
        for (name, v) in [
            ("l_minus", self.l_minus),
            ("l_plus", self.l_plus),
            ("l_pm", self.l_pm),
        ] {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("{name} = {v} is not a finite nonnegative value"));
            }
        }
        if self.l_minus > self.l_plus + tol {
            return bad(format!(
                "l_minus {} exceeds l_plus {}",
                self.l_minus, self.l_plus
            ));
        }
        let (lm2, lp2, lpm2) = (
            self.l_minus * self.l_minus,
            self.l_plus * self.l_plus,
            self.l_pm * self.l_pm,
        );
        if lp2 - lm2 > lpm2 + tol {
            return bad(format!("l_plus² − l_minus² = {} exceeds l_pm² = {lpm2}", lp2 - lm2));
        }
        if lpm2 > lp2 + tol {
            return bad(format!("l_pm² = {lpm2} exceeds l_plus² = {lp2}"));
        }
        if let Some(mu) = self.mu {
            if !(mu.is_finite() && mu >= 0.0) {
                return bad(format!("mu = {mu} is not a finite nonnegative value"));
            }
            if mu > self.l_minus + tol {
                return bad(format!("mu {} exceeds l_minus {}", mu, self.l_minus));
            }
        }
        Ok(())
    }
}

/// Analysis-layer failures.
#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("probability p = {p} must lie in (0, 1]")]
    InvalidProbability { p: f64 },
    #[error("constants are inconsistent: {why}")]
    InconsistentConstants { why: String },
    #[error("this objective requires a PL constant mu > 0")]
    MuRequired,
    #[error("stepsize denominator is zero: all constants vanish")]
    DegenerateConstants,
    #[error("regime {regime} does not match d = {d}, n = {n}")]
    RegimeMismatch {
        regime: &'static str,
        d: u32,
        n: u32,
    },
    #[error("k = {k} must lie in 1..={d}")]
    BadK { k: u32, d: u32 },
    #[error("initial gap {delta0} and target {eps} must be positive{extra}")]
    BadGap {
        delta0: f64,
        eps: f64,
        extra: &'static str,
    },
    #[error("eigensolver failed: {0}")]
    Eigen(#[from] crate::linalg::EigError),
    #[error("empty operator family")]
    EmptyFamily,
    #[error("group specification invalid: {why}")]
    BadGroups { why: String },
}

// ---------------------------------------------------------------------------
// Constants of quadratic families
// ---------------------------------------------------------------------------

/// `(1/n) Σ A_i² x` as a matrix-free operator.
struct MeanSqOp<'a, M: SymOp>(&'a [M]);

impl<M: SymOp> SymOp for MeanSqOp<'_, M> {
    fn dim(&self) -> usize {
        self.0[0].dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let d = x.len();
        let n = self.0.len() as f64;
        let mut t1 = vec![0.0; d];
        let mut t2 = vec![0.0; d];
        y.iter_mut().for_each(|v| *v = 0.0);
        for op in self.0 {
            op.apply(x, &mut t1);
            op.apply(&t1, &mut t2);
            for (yi, ti) in y.iter_mut().zip(&t2) {
                *yi += ti / n;
            }
        }
    }
    fn norm_upper(&self) -> f64 {
        let n = self.0.len() as f64;
        self.0.iter().map(|op| op.norm_upper().powi(2)).sum::<f64>() / n
    }
}

/// `Ā² x` where `Ā = (1/n) Σ A_i`, as a matrix-free operator.
struct SqMeanOp<'a, M: SymOp>(&'a [M]);

impl<M: SymOp> SqMeanOp<'_, M> {
    fn apply_mean(&self, x: &[f64], y: &mut [f64]) {
        let d = x.len();
        let n = self.0.len() as f64;
        let mut t = vec![0.0; d];
        y.iter_mut().for_each(|v| *v = 0.0);
        for op in self.0 {
            op.apply(x, &mut t);
            for (yi, ti) in y.iter_mut().zip(&t) {
                *yi += ti / n;
            }
        }
    }
}

impl<M: SymOp> SymOp for SqMeanOp<'_, M> {
    fn dim(&self) -> usize {
        self.0[0].dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut mid = vec![0.0; x.len()];
        self.apply_mean(x, &mut mid);
        self.apply_mean(&mid, y);
    }
    fn norm_upper(&self) -> f64 {
        let n = self.0.len() as f64;
        (self.0.iter().map(|op| op.norm_upper()).sum::<f64>() / n).powi(2)
    }
}

/// `(1/n) Σ A_i² − Ā²`, the positive-semidefinite dissimilarity operator.
struct VarianceOp<'a, M: SymOp>(MeanSqOp<'a, M>, SqMeanOp<'a, M>);

impl<M: SymOp> SymOp for VarianceOp<'_, M> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut t = vec![0.0; x.len()];
        self.0.apply(x, y);
        self.1.apply(x, &mut t);
        for (yi, ti) in y.iter_mut().zip(&t) {
            *yi -= ti;
        }
    }
    fn norm_upper(&self) -> f64 {
        self.0.norm_upper() + self.1.norm_upper()
    }
}

const EIG_TOL: f64 = 1e-11;
const EIG_MAX_ITER: usize = 200_000;

/// Exact smoothness constants of the quadratic family `f_i = ½xᵀA_i x − bᵀx`
/// from the symmetric operators `A_i` (linear terms never enter):
/// `L+² = λ_max((1/n)ΣA_i²)`, `L−² = λ_max(Ā²)`, and
/// `L±² = λ_max((1/n)ΣA_i² − Ā²)`.
pub fn quadratic_constants<M: SymOp>(ops: &[M]) -> Result<SmoothnessConstants, AnalysisError> {
    if ops.is_empty() {
        return Err(AnalysisError::EmptyFamily);
    }
    let mean_sq = MeanSqOp(ops);
    let sq_mean = SqMeanOp(ops);
    let l_plus_sq = eig_extreme(&mean_sq, Extreme::Max, EIG_TOL, EIG_MAX_ITER, 101)?.max(0.0);
    let l_minus_sq = eig_extreme(&sq_mean, Extreme::Max, EIG_TOL, EIG_MAX_ITER, 102)?.max(0.0);
    let variance = VarianceOp(MeanSqOp(ops), SqMeanOp(ops));
    let l_pm_sq = eig_extreme(&variance, Extreme::Max, EIG_TOL, EIG_MAX_ITER, 103)?.max(0.0);
    Ok(SmoothnessConstants {
        l_minus: l_minus_sq.sqrt(),
        l_plus: l_plus_sq.sqrt(),
        l_pm: l_pm_sq.sqrt(),
        mu: None,
        exact: true,
    })
}

// ---------------------------------------------------------------------------
// Empirical dissimilarity measurement
// ---------------------------------------------------------------------------

/// A family of per-worker gradient oracles.
pub trait GradFamily {
    /// Number of workers `n`.
    fn workers(&self) -> usize;
    /// Parameter dimension `d`.
    fn dim(&self) -> usize;
    /// `out = ∇f_i(x)`.
    fn grad(&self, worker: usize, x: &[f64], out: &mut [f64]);
}

/// Dissimilarity quotient of a single pair:
/// `[(1/n)Σ‖∇f_i(x) − ∇f_i(y)‖² − ‖∇f(x) − ∇f(y)‖²] / ‖x − y‖²`,
/// clamped at zero (the numerator is a variance and only dips below zero by
/// round-off). Returns 0 for coincident points.
pub fn hessian_variance_ratio<F: GradFamily + ?Sized>(family: &F, x: &[f64], y: &[f64]) -> f64 {
    let d = family.dim();
    let n = family.workers();
    let dist_sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    if dist_sq == 0.0 {
        return 0.0;
    }
    let mut gx = vec![0.0; d];
    let mut gy = vec![0.0; d];
    let mut mean_diff = vec![0.0; d];
    let mut mean_sq = 0.0;
    for i in 0..n {
        family.grad(i, x, &mut gx);
        family.grad(i, y, &mut gy);
        let mut sq = 0.0;
        for j in 0..d {
            let diff = gx[j] - gy[j];
            sq += diff * diff;
            mean_diff[j] += diff / n as f64;
        }
        mean_sq += sq / n as f64;
    }
    let mean_diff_sq: f64 = mean_diff.iter().map(|v| v * v).sum();
    ((mean_sq - mean_diff_sq) / dist_sq).max(0.0)
}

/// Empirical lower estimate of `L±²`: the largest dissimilarity quotient
/// over `samples` random pairs around `x0` (Gaussian perturbation pairs plus
/// coordinate-direction pairs). Always a lower bound on the true constant,
/// so closed-form values must dominate it.
pub fn empirical_hessian_variance<F: GradFamily + ?Sized>(
    family: &F,
    x0: &[f64],
    samples: u32,
    seed: u64,
) -> f64 {
    let d = family.dim();
    let mut stream = KeyedStream::derive(seed, StreamDomain::Empirical, 0, 0);
    let mut best = 0.0_f64;
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    for _ in 0..samples {
        for j in 0..d {
            x[j] = x0[j] + stream.gauss();
            y[j] = x0[j] + stream.gauss();
        }
        best = best.max(hessian_variance_ratio(family, &x, &y));
    }
    // Axis-aligned probes catch coordinate-concentrated dissimilarity.
    for j in 0..d.min(samples as usize) {
        x.copy_from_slice(x0);
        y.copy_from_slice(x0);
        y[j] += 1.0;
        best = best.max(hessian_variance_ratio(family, &x, &y));
    }
    best
}

// ---------------------------------------------------------------------------
// Stepsizes
// ---------------------------------------------------------------------------

fn check_probability(p: f64) -> Result<(), AnalysisError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(AnalysisError::InvalidProbability { p });
    }
    Ok(())
}

/// Theoretical stepsize for the sync-probability-`p` compressed-difference
/// method with an `(A, B)` compressor family:
/// `γ = 1 / (L− + √(c·(1−p)/p·((A−B)L+² + B·L±²)))` with `c = 1` for the
/// nonconvex guarantee and `c = 2` (capped by `p/(2μ)`) for the PL one.
pub fn marina_stepsize(
    c: &SmoothnessConstants,
    ab: &ABConstants,
    p: f64,
    objective: Objective,
) -> Result<f64, AnalysisError> {
    check_probability(p)?;
    if !(ab.a.is_finite() && ab.b.is_finite()) || ab.b < 0.0 || ab.a < ab.b - 1e-12 {
        return Err(AnalysisError::InconsistentConstants {
            why: format!("variance constants A = {}, B = {} violate A ≥ B ≥ 0", ab.a, ab.b),
        });
    }
    let leverage = (1.0 - p) / p;
    let noise_sq =
        ((ab.a - ab.b) * c.l_plus * c.l_plus + ab.b * c.l_pm * c.l_pm).max(0.0);
    match objective {
        Objective::Nonconvex => {
            let denom = c.l_minus + (leverage * noise_sq).sqrt();
            if denom <= 0.0 {
                return Err(AnalysisError::DegenerateConstants);
            }
            Ok(1.0 / denom)
        }
        Objective::Pl => {
            let mu = c.mu.ok_or(AnalysisError::MuRequired)?;
            if !(mu > 0.0) {
                return Err(AnalysisError::MuRequired);
            }
            let denom = c.l_minus + (2.0 * leverage * noise_sq).sqrt();
            let cap = p / (2.0 * mu);
            let gamma = if denom > 0.0 {
                (1.0 / denom).min(cap)
            } else {
                cap
            };
            Ok(gamma)
        }
    }
}

/// Control parameters of the error-feedback method for a contraction
/// constant `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ef21Params {
    /// Per-round contraction of the memory error.
    pub theta: f64,
    /// Weight of the fresh-drift term in the memory recursion.
    pub beta: f64,
    /// Theoretical stepsize.
    pub gamma: f64,
}

/// Memory-recursion coefficients for a free balance parameter `s > 0`:
/// `θ(s) = 1 − (1 − α)(1 + s)` and `β(s) = (1 − α)(1 + 1/s)`.
pub fn ef21_theta_beta(alpha: f64, s: f64) -> (f64, f64) {
    let r = 1.0 - alpha;
    (1.0 - r * (1.0 + s), r * (1.0 + 1.0 / s))
}

/// Optimal error-feedback parameters for contraction `α ∈ (0, 1]`:
/// the balance `s* = 1/√(1−α) − 1` gives `θ = 1 − √(1−α)` and
/// `β = (1−α)/θ`, and the stepsize is
/// `γ = 1/(L− + L+·√(c·β/θ))` with `c = 1` (nonconvex) or `c = 2` capped by
/// `θ/(2μ)` (PL).
pub fn ef21_params(
    alpha: f64,
    c: &SmoothnessConstants,
    objective: Objective,
) -> Result<Ef21Params, AnalysisError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(AnalysisError::InconsistentConstants {
            why: format!("contraction alpha = {alpha} must lie in (0, 1]"),
        });
    }
    let theta = 1.0 - (1.0 - alpha).sqrt();
    let beta = (1.0 - alpha) / theta;
    let ratio = beta / theta;
    let gamma = match objective {
        Objective::Nonconvex => {
            let denom = c.l_minus + c.l_plus * ratio.sqrt();
            if denom <= 0.0 {
                return Err(AnalysisError::DegenerateConstants);
            }
            1.0 / denom
        }
        Objective::Pl => {
            let mu = c.mu.ok_or(AnalysisError::MuRequired)?;
            if !(mu > 0.0) {
                return Err(AnalysisError::MuRequired);
            }
            let denom = c.l_minus + c.l_plus * (2.0 * ratio).sqrt();
            let cap = theta / (2.0 * mu);
            if denom > 0.0 {
                (1.0 / denom).min(cap)
            } else {
                cap
            }
        }
    };
    Ok(Ef21Params { theta, beta, gamma })
}

// ---------------------------------------------------------------------------
// Communication complexity
// ---------------------------------------------------------------------------

/// Which dimension/worker regime the closed-form predictions assume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// More coordinates than workers (`d ≥ n`).
    DGeN,
    /// More workers than coordinates (`n ≥ d`).
    DLeN,
}

/// Inputs of a communication-complexity prediction.
#[derive(Debug, Clone)]
pub struct ComplexityQuery {
    pub regime: Regime,
    pub objective: Objective,
    pub constants: SmoothnessConstants,
    pub d: u32,
    pub n: u32,
    /// Initial objective gap `f(x⁰) − f*`.
    pub delta0: f64,
    /// Target accuracy (`E‖∇f‖² ≤ ε` or `E[f − f*] ≤ ε`).
    pub eps: f64,
}

/// Method and parameters a prediction is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodChoice {
    MarinaPermK { p: f64 },
    MarinaRandK { p: f64, k: u32 },
    Ef21TopK { k: u32 },
}

/// A predicted per-node communication cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complexity {
    /// Expected floats sent per node to reach the target.
    pub floats_per_node: f64,
    /// True when the closed form assumes a divisibility (`n | d` or `d | n`)
    /// the query does not satisfy; the value is then the divisible-case
    /// approximation.
    pub approximate: bool,
}

fn check_query(q: &ComplexityQuery) -> Result<(), AnalysisError> {
    match q.regime {
        Regime::DGeN if q.d < q.n => {
            return Err(AnalysisError::RegimeMismatch {
                regime: "d >= n",
                d: q.d,
                n: q.n,
            })
        }
        Regime::DLeN if q.n < q.d => {
            return Err(AnalysisError::RegimeMismatch {
                regime: "n >= d",
                d: q.d,
                n: q.n,
            })
        }
        _ => {}
    }
    if !(q.delta0 > 0.0 && q.eps > 0.0) {
        return Err(AnalysisError::BadGap {
            delta0: q.delta0,
            eps: q.eps,
            extra: "",
        });
    }
    if matches!(q.objective, Objective::Pl) && q.delta0 <= q.eps {
        return Err(AnalysisError::BadGap {
            delta0: q.delta0,
            eps: q.eps,
            extra: " with delta0 > eps for geometric-decay predictions",
        });
    }
    Ok(())
}

fn pl_mu(q: &ComplexityQuery) -> Result<f64, AnalysisError> {
    let mu = q.constants.mu.ok_or(AnalysisError::MuRequired)?;
    if !(mu > 0.0) {
        return Err(AnalysisError::MuRequired);
    }
    Ok(mu)
}

/// Closed-form expected per-node communication (in floats) to reach the
/// target, with all absolute constants normalized to 1 and natural
/// logarithms in the geometric-decay case.
pub fn comm_complexity(
    q: &ComplexityQuery,
    method: &MethodChoice,
) -> Result<Complexity, AnalysisError> {
    check_query(q)?;
    let df = q.d as f64;
    let nf = q.n as f64;
    let lm = q.constants.l_minus;
    let lp = q.constants.l_plus;
    let lpm = q.constants.l_pm;
    match *method {
        MethodChoice::MarinaPermK { p } => {
            check_probability(p)?;
            let (payload, noise_ratio, approximate) = match q.regime {
                Regime::DGeN => (p * df + (1.0 - p) * (df / nf), 1.0, q.d % q.n != 0),
                Regime::DLeN => {
                    let ratio = if q.d > 1 {
                        (df - 1.0) / (nf - 1.0)
                    } else {
                        0.0
                    };
                    (p * df + (1.0 - p) * 1.0, ratio, q.n % q.d != 0)
                }
            };
            let floats = match q.objective {
                Objective::Nonconvex => {
                    let rate = lm + ((1.0 - p) / p * noise_ratio).sqrt() * lpm;
                    (q.delta0 / q.eps) * payload * rate
                }
                Objective::Pl => {
                    let mu = pl_mu(q)?;
                    let rate = (lm / mu + (2.0 * (1.0 - p) / p * noise_ratio).sqrt() * lpm / mu)
                        .max(1.0 / p);
                    (q.delta0 / q.eps).ln() * payload * rate
                }
            };
            Ok(Complexity {
                floats_per_node: floats,
                approximate,
            })
        }
        MethodChoice::MarinaRandK { p, k } => {
            check_probability(p)?;
            if k == 0 || k > q.d {
                return Err(AnalysisError::BadK { k, d: q.d });
            }
            let kf = k as f64;
            let payload = p * df + (1.0 - p) * kf;
            let omega_over_n = (df / kf - 1.0) / nf;
            let floats = match q.objective {
                Objective::Nonconvex => {
                    let rate = lm + ((1.0 - p) / p * omega_over_n).sqrt() * lp;
                    (q.delta0 / q.eps) * payload * rate
                }
                Objective::Pl => {
                    let mu = pl_mu(q)?;
                    let rate = (lm / mu + (2.0 * (1.0 - p) / p * omega_over_n).sqrt() * lp / mu)
                        .max(1.0 / p);
                    (q.delta0 / q.eps).ln() * payload * rate
                }
            };
            Ok(Complexity {
                floats_per_node: floats,
                approximate: false,
            })
        }
        MethodChoice::Ef21TopK { k } => {
            if k == 0 || k > q.d {
                return Err(AnalysisError::BadK { k, d: q.d });
            }
            let kf = k as f64;
            // (d − k + √(d² − dk))/k equals √(β/θ) for α = k/d.
            let drift = ((df - kf) + (df * df - df * kf).sqrt()) / kf;
            let floats = match q.objective {
                Objective::Nonconvex => {
                    let rate = lm + lp * drift;
                    (q.delta0 / q.eps) * kf * rate
                }
                Objective::Pl => {
                    let mu = pl_mu(q)?;
                    let theta = 1.0 - (1.0 - kf / df).sqrt();
                    let rate = (lm / mu + lp * drift / mu).max(1.0 / theta);
                    (q.delta0 / q.eps).ln() * kf * rate
                }
            };
            Ok(Complexity {
                floats_per_node: floats,
                approximate: false,
            })
        }
    }
}

/// A method family whose free parameters can be optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodFamily {
    MarinaPermK,
    MarinaRandK,
    Ef21TopK,
}

/// Optimizer output: the chosen parameters and their predicted cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalChoice {
    pub p: Option<f64>,
    pub k: Option<u32>,
    pub complexity: Complexity,
}

/// Minimize the predicted communication over the family's parameter grid:
/// permutation compression over `p ∈ {1/n or 1/d, 1}`, random sparsification
/// over `p = k/d` for every `k` plus the uncompressed `p = 1`, and greedy
/// sparsification over `k ∈ 1..=d`. Ties prefer the later (cheaper-per-round
/// or less-compressed) candidate, so degenerate families resolve to `k = d`.
pub fn optimal_params(
    q: &ComplexityQuery,
    family: MethodFamily,
) -> Result<OptimalChoice, AnalysisError> {
    check_query(q)?;
    let mut best: Option<OptimalChoice> = None;
    let mut consider = |p: Option<f64>, k: Option<u32>, c: Complexity| {
        let better = match &best {
            None => true,
            Some(b) => c.floats_per_node <= b.complexity.floats_per_node,
        };
        if better {
            best = Some(OptimalChoice { p, k, complexity: c });
        }
    };
    match family {
        MethodFamily::MarinaPermK => {
            let p_small = match q.regime {
                Regime::DGeN => 1.0 / q.n as f64,
                Regime::DLeN => 1.0 / q.d as f64,
            };
            for p in [p_small, 1.0] {
                let c = comm_complexity(q, &MethodChoice::MarinaPermK { p })?;
                consider(Some(p), None, c);
            }
        }
        MethodFamily::MarinaRandK => {
            for k in 1..=q.d {
                let p = k as f64 / q.d as f64;
                let c = comm_complexity(q, &MethodChoice::MarinaRandK { p, k })?;
                consider(Some(p), Some(k), c);
            }
            let c = comm_complexity(q, &MethodChoice::MarinaRandK { p: 1.0, k: q.d })?;
            consider(Some(1.0), Some(q.d), c);
        }
        MethodFamily::Ef21TopK => {
            for k in 1..=q.d {
                let c = comm_complexity(q, &MethodChoice::Ef21TopK { k })?;
                consider(None, Some(k), c);
            }
        }
    }
    Ok(best.expect("at least one candidate is always evaluated"))
}

// ---------------------------------------------------------------------------
// Heterogeneous compressor groups
// ---------------------------------------------------------------------------

/// One group of workers sharing a compressor family and smoothness profile.
#[derive(Debug, Clone, Copy)]
pub struct GroupSpec {
    /// Number of workers in the group.
    pub size: u32,
    /// Aggregate variance constants of the group's compressors (over the
    /// group's own average).
    pub a: f64,
    pub b: f64,
    /// Root-mean-square smoothness within the group.
    pub l_plus: f64,
    /// Dissimilarity constant within the group.
    pub l_pm: f64,
}

/// Stepsize when different worker groups use different compressors: the
/// single-family noise term is replaced by
/// `L̂² = Σ_g (A_g − B_g)·(n_g/n)²·L+g² + Σ_g B_g·(n_g/n)²·L±g²`.
pub fn group_stepsize(
    groups: &[GroupSpec],
    l_minus: f64,
    p: f64,
    mu: Option<f64>,
    objective: Objective,
) -> Result<f64, AnalysisError> {
    check_probability(p)?;
    if groups.is_empty() {
        return Err(AnalysisError::BadGroups {
            why: "no groups".into(),
        });
    }
    let n: u64 = groups.iter().map(|g| g.size as u64).sum();
    if n == 0 {
        return Err(AnalysisError::BadGroups {
            why: "zero workers".into(),
        });
    }
    let mut l_hat_sq = 0.0;
    for (idx, g) in groups.iter().enumerate() {
        if g.size == 0 {
            return Err(AnalysisError::BadGroups {
                why: format!("group {idx} is empty"),
            });
        }
        if g.b < 0.0 || g.a < g.b - 1e-12 {
            return Err(AnalysisError::BadGroups {
                why: format!("group {idx} violates A ≥ B ≥ 0"),
            });
        }
        let w = (g.size as f64 / n as f64).powi(2);
        l_hat_sq += (g.a - g.b) * w * g.l_plus * g.l_plus + g.b * w * g.l_pm * g.l_pm;
    }
    let leverage = (1.0 - p) / p;
    match objective {
        Objective::Nonconvex => {
            let denom = l_minus + (leverage * l_hat_sq).sqrt();
            if denom <= 0.0 {
                return Err(AnalysisError::DegenerateConstants);
            }
            Ok(1.0 / denom)
        }
        Objective::Pl => {
            let mu = mu.ok_or(AnalysisError::MuRequired)?;
            if !(mu > 0.0) {
                return Err(AnalysisError::MuRequired);
            }
            let denom = l_minus + (2.0 * leverage * l_hat_sq).sqrt();
            let cap = p / (2.0 * mu);
            Ok(if denom > 0.0 {
                (1.0 / denom).min(cap)
            } else {
                cap
            })
        }
    }
}
