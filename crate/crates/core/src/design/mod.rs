//! Measurement matrix design.

mod alternating;
mod baselines;
mod krp;
mod matrix;
mod procrustes;
mod waterfill;
mod whiten;

pub use alternating::{
    align_to_target, alternating_design, design_from_waterfill, design_objective, finalize_norm, Constraint, DesignOptions, DesignOutput,
    Termination,
};
pub use baselines::{
    coded_diffraction_matrix, low_snr_lifted_target, low_snr_optimal_matrix,
    random_gaussian_matrix, top_eigenpair_strict, OCTANARY_HIGH, OCTANARY_LOW,
};
pub use krp::{
    assemble_masked_fourier, dft_matrix, is_masked_fourier, masked_fourier_masks,
    nearest_krp_rows, MaskSet,
};
pub use matrix::MeasurementMatrix;
pub use procrustes::procrustes_align;
pub use waterfill::{
    waterfill_allocations, waterfill_from_eigen, waterfill_lifted, WaterfillResult,
    ZERO_EIGEN_REL_TOL,
};
pub use whiten::{design_colored, whiten_for_colored_noise, Whitened};

use crate::error::{Error, Result};

/// Design constraints: Frobenius budget `P = ‖A‖²`, `m` observations, SOI
/// dimension `n`, noise variance `σ_W²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignBudget {
    pub p: f64,
    pub m: usize,
    pub n: usize,
    pub sigma_w_sq: f64,
}

impl DesignBudget {
    pub fn new(p: f64, m: usize, n: usize, sigma_w_sq: f64) -> Result<Self> {
        let b = DesignBudget {
            p,
            m,
            n,
            sigma_w_sq,
        };
        b.validate()?;
        Ok(b)
    }

    /// `P = m`, i.e. unit average row energy.
    pub fn unit_rows(m: usize, n: usize, sigma_w_sq: f64) -> Result<Self> {
        Self::new(m as f64, m, n, sigma_w_sq)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p > 0.0) {
            return Err(Error::InvalidBudget(format!("P must be positive, got {}", self.p)));
        }
        if !(self.sigma_w_sq.is_finite() && self.sigma_w_sq > 0.0) {
            return Err(Error::InvalidBudget(format!(
                "noise variance must be positive, got {}",
                self.sigma_w_sq
            )));
        }
        if self.n == 0 || self.m < self.n || self.m > self.n * self.n {
            return Err(Error::InvalidBudget(format!(
                "need n <= m <= n^2, got m={} n={}",
                self.m, self.n
            )));
        }
        Ok(())
    }

    /// Budget `P²/m` for the lifted matrix.
    pub fn lifted_budget(&self) -> f64 {
        self.p * self.p / self.m as f64
    }

    /// Same budget at `SNR = 1/σ²` given in dB.
    pub fn with_snr_db(self, snr_db: f64) -> Self {
        DesignBudget {
            sigma_w_sq: snr_db_to_sigma_sq(snr_db),
            ..self
        }
    }
}

/// `σ² = 10^(−SNR/10)`.
pub fn snr_db_to_sigma_sq(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}
