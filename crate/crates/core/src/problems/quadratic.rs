//! Synthetic distributed quadratics with controllable worker dissimilarity.
//!
//! Worker `i` minimizes `f_i(x) = ½ xᵀA_i x − b_iᵀx` where
//! `A_i = σ_i·T + δ·I` shares one tridiagonal second-difference stencil
//! `T = tridiag(−1, 2, −1)` across workers, scaled per worker by
//! `σ_i = (1 + s·ξ_i)/4` with standard normal `ξ_i`. The knob `s ≥ 0`
//! interpolates from identical workers (`s = 0`, zero gradient
//! dissimilarity) to wildly heterogeneous ones; individual `A_i` may be
//! indefinite while the mean stays positive definite. The common diagonal
//! shift `δ` is chosen so the mean Hessian's smallest eigenvalue equals a
//! prescribed `λ > 0`, making the average objective `λ`-strongly convex with
//! condition number driven by `λ`.
//!
//! Because every Hessian is a polynomial in the same stencil, all smoothness
//! constants reduce to scans over the stencil's exact eigenvalues
//! `t_k = 2 − 2cos(kπ/(d+1))` — no iterative eigensolver is involved.

use super::{write_f64_slice, DistributedTask, PayloadReader, TaskArtifact, TaskError};
use crate::analysis::{GradFamily, SmoothnessConstants};
use crate::linalg::{cg_solve, DenseSym, SymOp};
use crate::rng::{KeyedStream, StreamDomain};

/// A generated distributed quadratic family.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTask {
    n: u32,
    d: u32,
    lambda: f64,
    noise_scale: f64,
    seed: u64,
    /// Per-worker stencil scales σ_i.
    scales: Vec<f64>,
    /// Per-worker linear terms: `b_i = b_first[i] · e_0`.
    b_first: Vec<f64>,
    /// Common diagonal shift δ.
    shift: f64,
    x0: Vec<f64>,
}

/// Second-difference stencil times `scale`, plus `shift·I`, applied to `x`.
fn stencil_apply(scale: f64, shift: f64, x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for i in 0..d {
        let left = if i > 0 { x[i - 1] } else { 0.0 };
        let right = if i + 1 < d { x[i + 1] } else { 0.0 };
        out[i] = scale * (2.0 * x[i] - left - right) + shift * x[i];
    }
}

/// `xᵀ T x` for the second-difference stencil.
fn stencil_quad_form(x: &[f64]) -> f64 {
    let d = x.len();
    let mut acc = 0.0;
    for i in 0..d {
        let left = if i > 0 { x[i - 1] } else { 0.0 };
        let right = if i + 1 < d { x[i + 1] } else { 0.0 };
        acc += x[i] * (2.0 * x[i] - left - right);
    }
    acc
}

/// Exact stencil eigenvalue `t_k = 2 − 2cos(kπ/(d+1))`, `k = 1..=d`.
fn stencil_eig(k: u32, d: u32) -> f64 {
    2.0 - 2.0 * ((k as f64) * std::f64::consts::PI / (d as f64 + 1.0)).cos()
}

impl QuadraticTask {
    /// Generate an `n`-worker, `d`-dimensional family with dissimilarity
    /// knob `noise_scale` and mean-Hessian smallest eigenvalue `lambda`.
    pub fn generate(
        n: u32,
        d: u32,
        lambda: f64,
        noise_scale: f64,
        seed: u64,
    ) -> Result<Self, TaskError> {
        if n == 0 {
            return Err(TaskError::Invalid {
                why: "need at least one worker".into(),
            });
        }
        if d < 2 {
            return Err(TaskError::Invalid {
                why: format!("dimension {d} must be at least 2"),
            });
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(TaskError::Invalid {
                why: format!("lambda {lambda} must be positive"),
            });
        }
        if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
            return Err(TaskError::Invalid {
                why: format!("noise scale {noise_scale} must be nonnegative"),
            });
        }
        let mut gen = KeyedStream::derive(seed, StreamDomain::TaskGen, 0, 0);
        let mut scales = Vec::with_capacity(n as usize);
        let mut b_first = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let xi_scale = gen.gauss();
            let xi_linear = gen.gauss();
            let sigma = (1.0 + noise_scale * xi_scale) / 4.0;
            scales.push(sigma);
            b_first.push(sigma * (-1.0 + noise_scale * xi_linear));
        }
        let mean_scale = scales.iter().sum::<f64>() / n as f64;
        // Smallest eigenvalue of σ̄·T over the exact stencil spectrum; the
        // sign of σ̄ decides which end of the spectrum attains it.
        let lam_min_unshifted = if mean_scale >= 0.0 {
            mean_scale * stencil_eig(1, d)
        } else {
            mean_scale * stencil_eig(d, d)
        };
        let shift = lambda - lam_min_unshifted;
        let mut x0 = vec![0.0; d as usize];
        x0[0] = (d as f64).sqrt();
        Ok(QuadraticTask {
            n,
            d,
            lambda,
            noise_scale,
            seed,
            scales,
            b_first,
            shift,
            x0,
        })
    }

    /// Assemble a task from raw parts (tests and tooling).
    pub fn from_parts(
        noise_scale: f64,
        seed: u64,
        scales: Vec<f64>,
        b_first: Vec<f64>,
        shift: f64,
        x0: Vec<f64>,
    ) -> Result<Self, TaskError> {
        if scales.is_empty() || scales.len() != b_first.len() {
            return Err(TaskError::Invalid {
                why: "scales and linear terms must be equal-length and nonempty".into(),
            });
        }
        if x0.len() < 2 {
            return Err(TaskError::Invalid {
                why: "dimension must be at least 2".into(),
            });
        }
        let n = scales.len() as u32;
        let d = x0.len() as u32;
        let mut task = QuadraticTask {
            n,
            d,
            lambda: 0.0,
            noise_scale,
            seed,
            scales,
            b_first,
            shift,
            x0,
        };
        task.lambda = task.mean_hessian_min_eig();
        Ok(task)
    }

    /// Smallest eigenvalue of the mean Hessian `σ̄T + δI` (exact).
    pub fn mean_hessian_min_eig(&self) -> f64 {
        let mean_scale = self.mean_scale();
        (1..=self.d)
            .map(|k| mean_scale * stencil_eig(k, self.d) + self.shift)
            .fold(f64::INFINITY, f64::min)
    }

    fn mean_scale(&self) -> f64 {
        self.scales.iter().sum::<f64>() / self.n as f64
    }

    fn mean_b_first(&self) -> f64 {
        self.b_first.iter().sum::<f64>() / self.n as f64
    }

    /// Target smallest eigenvalue of the mean Hessian.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Dissimilarity knob used at generation time.
    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    /// Generation seed.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Per-worker stencil scales.
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Common diagonal shift δ.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Dense `A_i` for cross-checks at small dimension.
    pub fn worker_matrix(&self, worker: usize) -> DenseSym {
        let d = self.d as usize;
        let mut m = DenseSym::zeros(d);
        for i in 0..d {
            m.set_sym(i, i, 2.0 * self.scales[worker] + self.shift);
            if i + 1 < d {
                m.set_sym(i, i + 1, -self.scales[worker]);
            }
        }
        m
    }

    /// Minimize `f` by conjugate gradients on the mean Hessian; returns
    /// `(f*, x*)` with `‖∇f(x*)‖ ≤ tol·max(‖b̄‖, tiny)`.
    pub fn minimize(&self, tol: f64) -> Result<(f64, Vec<f64>), TaskError> {
        let mean_op = MeanHessian {
            scale: self.mean_scale(),
            shift: self.shift,
            d: self.d as usize,
        };
        let mut rhs = vec![0.0; self.d as usize];
        rhs[0] = self.mean_b_first();
        let max_iter = 60 * self.d as usize + 200;
        let x_star = cg_solve(&mean_op, &rhs, tol, max_iter).map_err(|e| TaskError::Solver {
            why: e.to_string(),
        })?;
        Ok((self.value(&x_star), x_star))
    }
}

/// The mean Hessian `σ̄T + δI` as an operator.
struct MeanHessian {
    scale: f64,
    shift: f64,
    d: usize,
}

impl SymOp for MeanHessian {
    fn dim(&self) -> usize {
        self.d
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        stencil_apply(self.scale, self.shift, x, y);
    }
    fn norm_upper(&self) -> f64 {
        4.0 * self.scale.abs() + self.shift.abs()
    }
}

impl GradFamily for QuadraticTask {
    fn workers(&self) -> usize {
        self.n as usize
    }

    fn dim(&self) -> usize {
        self.d as usize
    }

    fn grad(&self, worker: usize, x: &[f64], out: &mut [f64]) {
        stencil_apply(self.scales[worker], self.shift, x, out);
        out[0] -= self.b_first[worker];
    }
}

impl DistributedTask for QuadraticTask {
    fn x0(&self) -> &[f64] {
        &self.x0
    }

    fn value(&self, x: &[f64]) -> f64 {
        // f(x) = ½σ̄·xᵀTx + ½δ‖x‖² − b̄·x₀; exact because f is the mean of
        // functions linear in (σ_i, b_i).
        let quad = stencil_quad_form(x);
        let norm_sq: f64 = x.iter().map(|v| v * v).sum();
        0.5 * self.mean_scale() * quad + 0.5 * self.shift * norm_sq
            - self.mean_b_first() * x[0]
    }

    fn grad_all(&self, x: &[f64], out: &mut [Vec<f64>]) {
        // One stencil pass shared by all workers: ∇f_i = σ_i·(Tx) + δx − b_i.
        let d = self.d as usize;
        let mut tx = vec![0.0; d];
        stencil_apply(1.0, 0.0, x, &mut tx);
        for (i, g) in out.iter_mut().enumerate() {
            let sigma = self.scales[i];
            for j in 0..d {
                g[j] = sigma * tx[j] + self.shift * x[j];
            }
            g[0] -= self.b_first[i];
        }
    }

    fn smoothness(&self) -> SmoothnessConstants {
        let n = self.n as f64;
        let mean_scale = self.mean_scale();
        let mean_scale_sq = self.scales.iter().map(|s| s * s).sum::<f64>() / n;
        let scale_var = (mean_scale_sq - mean_scale * mean_scale).max(0.0);
        let mut l_plus_sq = 0.0_f64;
        let mut l_minus_sq = 0.0_f64;
        let mut t_max = 0.0_f64;
        for k in 1..=self.d {
            let t = stencil_eig(k, self.d);
            t_max = t_max.max(t);
            // Eigenvalue of (1/n)ΣA_i² = m₂T² + 2σ̄δT + δ²I along mode k.
            l_plus_sq = l_plus_sq
                .max(mean_scale_sq * t * t + 2.0 * mean_scale * self.shift * t + self.shift * self.shift);
            let mean_mode = mean_scale * t + self.shift;
            l_minus_sq = l_minus_sq.max(mean_mode * mean_mode);
        }
        // (1/n)ΣA_i² − Ā² = Var(σ)·T², maximized on the top stencil mode.
        let l_pm_sq = scale_var * t_max * t_max;
        let lam_min = self.mean_hessian_min_eig();
        SmoothnessConstants {
            l_minus: l_minus_sq.sqrt(),
            l_plus: l_plus_sq.sqrt(),
            l_pm: l_pm_sq.sqrt(),
            mu: if lam_min > 0.0 { Some(lam_min) } else { None },
            exact: true,
        }
    }

    fn f_star(&self, tol: f64) -> Option<f64> {
        self.minimize(tol).ok().map(|(f, _)| f)
    }

    fn kind_label(&self) -> &'static str {
        "quadratic"
    }

    fn fingerprint(&self) -> String {
        TaskArtifact::Quadratic(self.clone()).fingerprint()
    }
}

impl QuadraticTask {
    pub(super) fn write_payload(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&self.d.to_le_bytes());
        out.extend_from_slice(&self.lambda.to_le_bytes());
        out.extend_from_slice(&self.noise_scale.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.shift.to_le_bytes());
        write_f64_slice(out, &self.scales);
        write_f64_slice(out, &self.b_first);
        write_f64_slice(out, &self.x0);
    }

    pub(super) fn read_payload(r: &mut PayloadReader<'_>) -> Result<Self, TaskError> {
        let n = r.read_u32()?;
        let d = r.read_u32()?;
        if n == 0 || d < 2 {
            return Err(TaskError::Corrupt {
                why: format!("bad shape n = {n}, d = {d}"),
            });
        }
        let lambda = r.read_f64()?;
        let noise_scale = r.read_f64()?;
        let seed = r.read_u64()?;
        let shift = r.read_f64()?;
        let scales = r.read_f64_vec(n as usize)?;
        let b_first = r.read_f64_vec(n as usize)?;
        let x0 = r.read_f64_vec(d as usize)?;
        Ok(QuadraticTask {
            n,
            d,
            lambda,
            noise_scale,
            seed,
            scales,
            b_first,
            shift,
            x0,
        })
    }
}
