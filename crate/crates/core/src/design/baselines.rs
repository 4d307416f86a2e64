use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;

use crate::design::krp::{assemble_masked_fourier, MaskSet};
use crate::design::DesignBudget;
use crate::error::{Error, Result};
use crate::kron::{kron_vec, LiftedMatrix};
use crate::linalg::{c64, check_psd, random_complex_matrix, vec_norm_sq, CMatrix, CVector, J, ONE};

/// Relative eigen-gap below which the top eigenvector is ambiguous.
const TIE_REL_TOL: f64 = 1e-10;

/// Octanary mask magnitudes and the probability of the low one.
pub const OCTANARY_LOW: f64 = FRAC_1_SQRT_2;
pub const OCTANARY_HIGH: f64 = 1.732_050_807_568_877_2;
const OCTANARY_LOW_PROB: f64 = 0.8;

/// Largest eigenvalue and its unit eigenvector, rejecting near-ties.
pub fn top_eigenpair_strict(c_u: &CMatrix) -> Result<(f64, CVector)> {
    let eig = check_psd(c_u, 1e-10, 1e-10)?;
    let largest = eig.max_value();
    let second = eig.values.get(1).copied().unwrap_or(f64::NEG_INFINITY);
    if largest <= 0.0 || largest - second < TIE_REL_TOL * largest {
        return Err(Error::EigenvalueTie { largest, second });
    }
    Ok((largest, eig.vector(0)))
}

/// Rank-one lifted target `(P/√m)·i₁·(v_max ⊗ v_max*)ᴴ`.
pub fn low_snr_lifted_target(c_u: &CMatrix, budget: &DesignBudget) -> Result<LiftedMatrix> {
    budget.validate()?;
    check_dim(c_u, budget.n)?;
    let (_, v) = top_eigenpair_strict(c_u)?;
    let row = kron_vec(&v, &v.conjugate());
    let scale = budget.p / (budget.m as f64).sqrt();
    let n2 = budget.n * budget.n;
    let mut t = CMatrix::zeros(budget.m, n2);
    for j in 0..n2 {
        t[(0, j)] = row[j].conj() * scale;
    }
    LiftedMatrix::new(t, budget.n)
}

/// Rank-one matrix `c·v_maxᴴ`; `c` defaults to `√(P/m)·e^{j2πk/m}`, `k = 0..m−1`.
pub fn low_snr_optimal_matrix(
    c_u: &CMatrix,
    budget: &DesignBudget,
    c: Option<&CVector>,
) -> Result<CMatrix> {
    budget.validate()?;
    check_dim(c_u, budget.n)?;
    let m = budget.m;
    let coeffs = match c {
        Some(c) => {
            if c.len() != m {
                return Err(Error::Dimension(format!("c has length {}, need {m}", c.len())));
            }
            let norm = vec_norm_sq(c);
            if (norm - budget.p).abs() > 1e-9 * budget.p {
                return Err(Error::InvalidBudget(format!(
                    "‖c‖² = {norm}, need P = {}",
                    budget.p
                )));
            }
            c.clone()
        }
        None => {
            let s = (budget.p / m as f64).sqrt();
            CVector::from_fn(m, |k, _| c64(0.0, 2.0 * PI * k as f64 / m as f64).exp() * s)
        }
    };
    let (_, v) = top_eigenpair_strict(c_u)?;
    Ok(&coeffs * v.adjoint())
}

/// i.i.d. proper complex Gaussian entries with variance `1/n`.
pub fn random_gaussian_matrix<R: Rng + ?Sized>(budget: &DesignBudget, rng: &mut R) -> CMatrix {
    random_complex_matrix(rng, budget.m, budget.n, 1.0 / budget.n as f64)
}

fn octanary<R: Rng + ?Sized>(rng: &mut R) -> crate::linalg::Complex64 {
    let unit = [ONE, -ONE, J, -J][rng.random_range(0..4)];
    let mag = if rng.random::<f64>() < OCTANARY_LOW_PROB {
        OCTANARY_LOW
    } else {
        OCTANARY_HIGH
    };
    unit * mag
}

/// Coded diffraction matrix: `b` masked DFT blocks with i.i.d. octanary masks.
pub fn coded_diffraction_matrix<R: Rng + ?Sized>(b: usize, n: usize, rng: &mut R) -> CMatrix {
    let masks = (0..b)
        .map(|_| CVector::from_fn(n, |_, _| octanary(rng)))
        .collect();
    assemble_masked_fourier(&MaskSet { masks, n })
}

fn check_dim(c_u: &CMatrix, n: usize) -> Result<()> {
    if c_u.shape() != (n, n) {
        return Err(Error::Dimension(format!("c_u is {:?}, need {n}x{n}", c_u.shape())));
    }
    Ok(())
}
