use crate::design::alternating::{align_to_target, Constraint, DesignOptions, DesignOutput};
use crate::design::waterfill::waterfill_lifted;
use crate::design::DesignBudget;
use crate::error::{Error, Result};
use crate::kron::LiftedMatrix;
use crate::linalg::{check_psd, CMatrix};

const HERMITIAN_TOL: f64 = 1e-10;
const PD_REL_TOL: f64 = 1e-12;

/// Lifted target mapped back through the noise colouring.
#[derive(Debug, Clone)]
pub struct Whitened {
    /// `C_W^{1/2}·target`.
    pub target: LiftedMatrix,
    pub sqrt_cw: CMatrix,
    /// `C_W^{−1/2}`, applied to observations to whiten them.
    pub inv_sqrt_cw: CMatrix,
}

/// Map a lifted target designed for whitened observations back to the
/// coloured-noise domain.
pub fn whiten_for_colored_noise(c_w: &CMatrix, target: &LiftedMatrix) -> Result<Whitened> {
    let m = target.m();
    if c_w.shape() != (m, m) {
        return Err(Error::Dimension(format!("c_w is {:?}, need {m}x{m}", c_w.shape())));
    }
    let eig = check_psd(c_w, HERMITIAN_TOL, 0.0).map_err(|e| match e {
        Error::NotPsd { min_eigenvalue } => Error::NotPositiveDefinite { min_eigenvalue },
        other => other,
    })?;
    if eig.min_value() <= PD_REL_TOL * eig.max_value() {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: eig.min_value(),
        });
    }
    let sqrt_cw = eig.map_values(f64::sqrt);
    let inv_sqrt_cw = eig.map_values(|l| 1.0 / l.sqrt());
    Ok(Whitened {
        target: LiftedMatrix::new(&sqrt_cw * target.entries(), target.n())?,
        sqrt_cw,
        inv_sqrt_cw,
    })
}

/// Design under noise covariance `c_w`.
///
/// The whitened problem has unit noise and lifted budget `P²/(m·λ̄)` with
/// `λ̄ = tr(C_W)/m`, so `C_W = σ²I` reproduces the white-noise design.
pub fn design_colored(
    c_x: &CMatrix,
    c_w: &CMatrix,
    p: f64,
    n: usize,
    constraint: Constraint,
    opts: &DesignOptions,
) -> Result<DesignOutput> {
    let m = c_w.nrows();
    let mean_level = (0..m).map(|i| c_w[(i, i)].re).sum::<f64>() / m as f64;
    if !(mean_level > 0.0) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: mean_level,
        });
    }
    let whitened_budget = DesignBudget::new(p / mean_level.sqrt(), m, n, 1.0)?;
    let wf = waterfill_lifted(c_x, &whitened_budget)?;
    let w = whiten_for_colored_noise(c_w, &wf.lifted_target)?;
    align_to_target(&w.target, p, constraint, opts, CMatrix::identity(m, m))
}
