//! Distributed optimization tasks: synthetic quadratics, linear
//! autoencoders, and the dataset plumbing they need.
//!
//! A task owns per-worker objectives `f_i` and exposes gradients, values,
//! smoothness constants, and a stable binary artifact whose hash
//! fingerprints the problem instance across runs and tools.

mod autoencoder;
mod idx;
mod quadratic;

pub use autoencoder::{split_heterogeneous, AutoencoderTask, DatasetSplit};
pub use idx::{load_idx_images, load_idx_labels, IdxError, IdxImages};
pub use quadratic::QuadraticTask;

use crate::analysis::{GradFamily, SmoothnessConstants};
use sha2::{Digest, Sha256};
use std::io::Read;
use std::path::Path;
use thiserror::Error;

/// Task-layer failures.
#[derive(Debug, Error)]
pub enum TaskError {
    #[error("invalid task parameters: {why}")]
    Invalid { why: String },
    #[error("task artifact is corrupt: {why}")]
    Corrupt { why: String },
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset failure: {0}")]
    Idx(#[from] IdxError),
    #[error("solver failure: {why}")]
    Solver { why: String },
}

/// A distributed objective `f = (1/n) Σ f_i` with everything the simulation
/// engine and the reporting tools need.
pub trait DistributedTask: GradFamily {
    /// Starting point of every run.
    fn x0(&self) -> &[f64];
    /// Mean objective value `f(x)`.
    fn value(&self, x: &[f64]) -> f64;
    /// Gradients of all workers at one point. The default loops over
    /// [`GradFamily::grad`]; tasks with shared per-point work override it.
    fn grad_all(&self, x: &[f64], out: &mut [Vec<f64>]) {
        for (i, g) in out.iter_mut().enumerate() {
            self.grad(i, x, g);
        }
    }
    /// Smoothness description (closed-form or estimated; see `exact`).
    fn smoothness(&self) -> SmoothnessConstants;
    /// Minimum value of `f`, when the task can compute one to tolerance
    /// `tol`.
    fn f_star(&self, tol: f64) -> Option<f64>;
    /// Short kind label for file names and CSV columns.
    fn kind_label(&self) -> &'static str;
    /// Hex hash of the task's artifact bytes; two tasks compare equal
    /// exactly when their fingerprints do.
    fn fingerprint(&self) -> String;
}

/// A serializable task instance.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskArtifact {
    Quadratic(QuadraticTask),
    Autoencoder(AutoencoderTask),
}

const ARTIFACT_MAGIC: &[u8; 6] = b"PLTASK";
const ARTIFACT_VERSION: u16 = 1;
const KIND_QUADRATIC: u8 = 1;
const KIND_AUTOENCODER: u8 = 2;

impl TaskArtifact {
    /// View as the common task interface.
    pub fn as_task(&self) -> &dyn DistributedTask {
        match self {
            TaskArtifact::Quadratic(t) => t,
            TaskArtifact::Autoencoder(t) => t,
        }
    }

    /// Serialized artifact bytes (versioned, little-endian).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(ARTIFACT_MAGIC);
        out.extend_from_slice(&ARTIFACT_VERSION.to_le_bytes());
        match self {
            TaskArtifact::Quadratic(t) => {
                out.push(KIND_QUADRATIC);
                t.write_payload(&mut out);
            }
            TaskArtifact::Autoencoder(t) => {
                out.push(KIND_AUTOENCODER);
                t.write_payload(&mut out);
            }
        }
        out
    }

    /// Parse artifact bytes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TaskError> {
        let mut r = PayloadReader::new(bytes);
        let magic = r.take(6)?;
        if magic != ARTIFACT_MAGIC {
            return Err(TaskError::Corrupt {
                why: format!("bad magic {magic:02x?}"),
            });
        }
        let version = r.read_u16()?;
        if version != ARTIFACT_VERSION {
            return Err(TaskError::Corrupt {
                why: format!("unsupported artifact version {version}"),
            });
        }
        let kind = r.read_u8()?;
        let artifact = match kind {
            KIND_QUADRATIC => TaskArtifact::Quadratic(QuadraticTask::read_payload(&mut r)?),
            KIND_AUTOENCODER => TaskArtifact::Autoencoder(AutoencoderTask::read_payload(&mut r)?),
            other => {
                return Err(TaskError::Corrupt {
                    why: format!("unknown task kind {other}"),
                })
            }
        };
        if !r.is_empty() {
            return Err(TaskError::Corrupt {
                why: format!("{} trailing bytes", r.remaining()),
            });
        }
        Ok(artifact)
    }

    /// Write the artifact to disk.
    pub fn save(&self, path: &Path) -> Result<(), TaskError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Load an artifact from disk.
    pub fn load(path: &Path) -> Result<Self, TaskError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        TaskArtifact::from_bytes(&bytes)
    }

    /// Hex hash of the artifact bytes (16 hex characters).
    pub fn fingerprint(&self) -> String {
        fingerprint_bytes(&self.to_bytes())
    }
}

/// First 16 hex characters of the SHA-256 of `bytes`.
pub fn fingerprint_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Sequential little-endian reader over artifact payload bytes.
pub(crate) struct PayloadReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PayloadReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        PayloadReader { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, len: usize) -> Result<&'a [u8], TaskError> {
        if self.pos + len > self.bytes.len() {
            return Err(TaskError::Corrupt {
                why: format!(
                    "truncated: wanted {len} bytes at offset {}, have {}",
                    self.pos,
                    self.bytes.len() - self.pos
                ),
            });
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    pub(crate) fn read_u8(&mut self) -> Result<u8, TaskError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn read_u16(&mut self) -> Result<u16, TaskError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn read_u32(&mut self) -> Result<u32, TaskError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn read_u64(&mut self) -> Result<u64, TaskError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn read_f64(&mut self) -> Result<f64, TaskError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn read_f64_vec(&mut self, len: usize) -> Result<Vec<f64>, TaskError> {
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(self.read_f64()?);
        }
        Ok(out)
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos == self.bytes.len()
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub(crate) fn write_f64_slice(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}
