//! Desk-scale laboratory for communication-compressed distributed optimization.
//!
//! The crate is organized bottom-up:
//!
//! * [`rng`] — deterministic, domain-separated random streams shared between
//!   a coordinator and workers without any message exchange;
//! * [`linalg`] — the small dense/matrix-free symmetric eigenvalue and CG
//!   toolbox the analysis layer is built on;
//! * [`compressors`] — permutation-based, sparsification, and quantization
//!   message compressors together with their variance constants and
//!   enumeration/Monte-Carlo verifiers;
//! * [`analysis`] — smoothness and gradient-dissimilarity constants,
//!   theoretical stepsizes, and communication-complexity predictions;
//! * [`problems`] — synthetic quadratic and linear-autoencoder distributed
//!   tasks plus dataset plumbing (IDX loading, heterogeneous splits);
//! * [`engine`] — the single-threaded, bit-reproducible simulation loop for
//!   MARINA, EF21, and plain gradient descent with per-node communication
//!   metering.

pub mod analysis;
pub mod compressors;
pub mod engine;
pub mod linalg;
pub mod problems;
pub mod rng;

pub use analysis::{Objective, SmoothnessConstants};
pub use compressors::{ABConstants, CompressorSpec, Quantizer, RoundContext, SparseMessage};
pub use engine::{RunRecord, RunSettings, RunTrace};
pub use problems::{AutoencoderTask, DistributedTask, QuadraticTask, TaskArtifact};
