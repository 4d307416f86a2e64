//! Measurement matrix design for phase retrieval.
//!
//! The observation model is `y = |A u|² + w`. Lifting `x = u ⊗ u*` makes it
//! linear, `y = Ã x + w` with `Ã` the row-wise Khatri-Rao product of `A`
//! and `A*`. Designs waterfill the lifted matrix over the eigenmodes of
//! `cov(x)` and then alternate between projecting onto matrices with
//! Khatri-Rao structure and a unitary Procrustes alignment.

pub mod analysis;
pub mod design;
pub mod error;
pub mod harness;
pub mod kron;
pub mod linalg;
pub mod retrieval;
pub mod rng;
pub mod soi;

pub use design::{
    alternating_design, Constraint, DesignBudget, DesignOptions, DesignOutput, MeasurementMatrix,
};
pub use error::{Error, Result};
pub use kron::{lift_signal, row_wise_krp, LiftedMatrix};
pub use linalg::{CMatrix, CVector};
pub use num_complex::Complex64;
pub use retrieval::{phase_aligned_error, Observation, RecoveryResult};
pub use rng::RngStream;
pub use soi::{CovariancePair, SoiModel};
