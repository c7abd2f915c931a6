//! Small symmetric linear-algebra toolbox: matrix-free operators, extreme
//! eigenvalues (dense or power iteration), and conjugate gradients.
//!
//! The analysis layer needs extreme eigenvalues of symmetric operators that
//! are sometimes only available as matrix-vector products (averaged squared
//! Hessians, finite-difference Hessians). Small operators are materialized
//! and solved densely; large ones go through shifted power iteration, which
//! only needs `apply` and a spectral-norm upper bound.

use crate::rng::{KeyedStream, StreamDomain};
use thiserror::Error;

/// Dimension at or below which extreme eigenvalues are computed by a dense
/// symmetric eigensolve of the materialized operator.
pub const DENSE_EIG_LIMIT: usize = 4096;

/// A symmetric linear operator exposed as a matrix-vector product.
pub trait SymOp {
    /// Operator dimension.
    fn dim(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Any finite upper bound on the spectral radius; used to shift the
    /// operator positive-definite before power iteration. Looser bounds only
    /// slow convergence, they never change the answer.
    fn norm_upper(&self) -> f64;
}

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone)]
pub struct DenseSym {
    dim: usize,
    data: Vec<f64>,
}

impl DenseSym {
    /// Build from a row-major buffer; symmetrizes `(M + Mᵀ)/2` defensively.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim * dim, "buffer does not match dimension");
        let mut m = DenseSym { dim, data };
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (m.data[i * dim + j] + m.data[j * dim + i]);
                m.data[i * dim + j] = avg;
                m.data[j * dim + i] = avg;
            }
        }
        m
    }

    /// Entry accessor.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Mutable entry accessor (keeps symmetry up to the caller).
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    /// Zero matrix.
    pub fn zeros(dim: usize) -> Self {
        DenseSym {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    /// `self += w * other`.
    pub fn add_scaled(&mut self, other: &DenseSym, w: f64) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += w * *b;
        }
    }

    /// Dense product `A * B` (both symmetric in our uses; result symmetrized
    /// by the caller when needed).
    pub fn matmul(&self, other: &DenseSym) -> DenseSym {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let aik = self.data[i * d + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out[i * d + j] += aik * other.data[k * d + j];
                }
            }
        }
        DenseSym { dim: d, data: out }
    }

    /// Row-major view of the entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl SymOp for DenseSym {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            let row = &self.data[i * d..(i + 1) * d];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn norm_upper(&self) -> f64 {
        // Max absolute row sum bounds the spectral radius.
        let d = self.dim;
        (0..d)
            .map(|i| self.data[i * d..(i + 1) * d].iter().map(|v| v.abs()).sum())
            .fold(0.0, f64::max)
    }
}

/// Which end of the spectrum to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Max,
    Min,
}

/// Eigensolver failures.
#[derive(Debug, Error)]
pub enum EigError {
    #[error("power iteration did not reach tolerance {tol} in {iters} iterations")]
    NoConvergence { tol: f64, iters: usize },
    #[error("operator has dimension zero")]
    EmptyOperator,
}

/// Extreme eigenvalue of a symmetric operator.
///
/// Dimensions up to [`DENSE_EIG_LIMIT`] are materialized column-by-column and
/// handed to a dense symmetric eigensolver; larger operators use power
/// iteration on a positive shift of the operator, started from a seeded
/// random vector, stopping when the eigen-residual `‖Av − λv‖` drops below
/// `tol · max(|λ|, 1)`.
pub fn eig_extreme(
    op: &dyn SymOp,
    which: Extreme,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<f64, EigError> {
    let d = op.dim();
    if d == 0 {
        return Err(EigError::EmptyOperator);
    }
    if d <= DENSE_EIG_LIMIT {
        let m = materialize(op);
        let sym = nalgebra::SymmetricEigen::new(m);
        let vals = sym.eigenvalues;
        let ext = match which {
            Extreme::Max => vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Extreme::Min => vals.iter().copied().fold(f64::INFINITY, f64::min),
        };
        return Ok(ext);
    }
    // Shift so the wanted end becomes the dominant eigenvalue of a PSD
    // operator: λ_max(A) = λ_max(A + cI) − c, λ_min(A) = c − λ_max(cI − A).
    let c = op.norm_upper().max(1e-300);
    let lam = shifted_power_max(op, c, which, tol, max_iter, seed)?;
    Ok(match which {
        Extreme::Max => lam - c,
        Extreme::Min => c - lam,
    })
}

fn materialize(op: &dyn SymOp) -> nalgebra::DMatrix<f64> {
    let d = op.dim();
    let mut basis = vec![0.0; d];
    let mut col = vec![0.0; d];
    let mut m = nalgebra::DMatrix::<f64>::zeros(d, d);
    for j in 0..d {
        basis[j] = 1.0;
        op.apply(&basis, &mut col);
        basis[j] = 0.0;
        for i in 0..d {
            m[(i, j)] = col[i];
        }
    }
    // Symmetrize to wash out round-off asymmetry in matrix-free operators.
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    m
}

/// Power iteration for the largest eigenvalue of the PSD operator
/// `A + cI` (for `Max`) or `cI − A` (for `Min`).
fn shifted_power_max(
    op: &dyn SymOp,
    c: f64,
    which: Extreme,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<f64, EigError> {
    let d = op.dim();
    let mut stream = KeyedStream::derive(seed, StreamDomain::EigenStart, 0, 0);
    let mut v = vec![0.0; d];
    stream.fill_gauss(&mut v);
    normalize(&mut v);
    let mut av = vec![0.0; d];
    let mut bv = vec![0.0; d];
    for _ in 0..max_iter {
        op.apply(&v, &mut av);
        for i in 0..d {
            bv[i] = match which {
                Extreme::Max => av[i] + c * v[i],
                Extreme::Min => c * v[i] - av[i],
            };
        }
        let lambda = dot(&v, &bv);
        // Residual ‖Bv − λv‖ against the Rayleigh quotient.
        let res: f64 = bv
            .iter()
            .zip(&v)
            .map(|(b, vi)| (b - lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        if res <= tol * lambda.abs().max(1.0) {
            return Ok(lambda);
        }
        let norm = norm2(&bv);
        if norm == 0.0 {
            // Exactly annihilated: the shifted operator is zero on v.
            return Ok(0.0);
        }
        for i in 0..d {
            v[i] = bv[i] / norm;
        }
    }
    Err(EigError::NoConvergence {
        tol,
        iters: max_iter,
    })
}

/// Conjugate-gradient failures.
#[derive(Debug, Error)]
pub enum CgError {
    #[error("conjugate gradients stalled at relative residual {residual} after {iters} iterations")]
    Stalled { residual: f64, iters: usize },
}

/// Solve `A x = b` for symmetric positive-definite `A` by conjugate
/// gradients, stopping at `‖Ax − b‖ ≤ tol · max(‖b‖, tiny)`.
pub fn cg_solve(op: &dyn SymOp, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>, CgError> {
    let d = op.dim();
    assert_eq!(b.len(), d);
    let bnorm = norm2(b).max(f64::MIN_POSITIVE);
    let mut x = vec![0.0; d];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; d];
    let mut rs = dot(&r, &r);
    if rs.sqrt() <= tol * bnorm {
        return Ok(x);
    }
    for iter in 0..max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(CgError::Stalled {
                residual: rs.sqrt() / bnorm,
                iters: iter,
            });
        }
        let alpha = rs / pap;
        for i in 0..d {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        if rs_new.sqrt() <= tol * bnorm {
            return Ok(x);
        }
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..d {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(CgError::Stalled {
        residual: rs.sqrt() / bnorm,
        iters: max_iter,
    })
}

/// Euclidean inner product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Squared Euclidean norm.
pub fn norm2_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        for x in v {
            *x /= n;
        }
    } else if !v.is_empty() {
        v[0] = 1.0;
    }
}
