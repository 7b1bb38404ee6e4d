//! Optimal unambiguous discrimination of nonorthogonal pure states, and
//! unambiguous filtering of one state from a subset, realized as
//! single-photon multirail linear optics.
//!
//! The pipeline runs in four stages, each in its own module:
//!
//! - [`states`]: pure states, ensembles, Gram matrices, dual bases and the
//!   three-state benchmark families.
//! - [`discrimination`]: optimal success probabilities (POVM) and the best
//!   projective (PVM) baselines, plus the POVM elements themselves.
//! - [`dilation`]: output states in the system + ancilla space and the
//!   Neumark unitary that maps embedded inputs onto them.
//! - [`mesh`]: triangular beam-splitter meshes realizing a unitary, and the
//!   waveplate/phase-shifter settings for each stage.
//! - [`simulator`]: ideal and noisy propagation of single photons through a
//!   mesh, with per-detector reports and outcome summaries.
//!
//! [`cli`] glues these into the `optical-povm` command-line tool.

pub mod cli;
pub mod dilation;
pub mod discrimination;
mod error;
pub mod linalg;
pub mod mesh;
pub mod simulator;
pub mod states;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
