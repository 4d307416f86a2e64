use crate::design::DesignBudget;
use crate::error::{Error, Result};
use crate::kron::LiftedMatrix;
use crate::linalg::{check_psd, CMatrix, HermitianEigen};

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const ZERO_EIGEN_REL_TOL: f64 = 1e-12;

const HERMITIAN_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-9;

/// Waterfilled lifted target `Ã_sub = D̃_A V_Xᴴ`.
#[derive(Debug, Clone)]
pub struct WaterfillResult {
    pub lifted_target: LiftedMatrix,
    /// Per-row powers `(D̃_A)²_{k,k}`, nonincreasing.
    pub allocations: Vec<f64>,
    pub water_level: f64,
    pub eigen_basis: CMatrix,
    pub eigenvalues: Vec<f64>,
}

/// Allocate `total` over modes with gains `eigenvalues` (descending):
/// `a_k = (η̃ − 2σ²/d_k)⁺`, `Σ a_k = total`. Returns `(allocations, η̃)`.
pub fn waterfill_allocations(
    eigenvalues: &[f64],
    total: f64,
    sigma_w_sq: f64,
) -> Result<(Vec<f64>, f64)> {
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::InvalidBudget(format!("total power {total}")));
    }
    if !(sigma_w_sq.is_finite() && sigma_w_sq > 0.0) {
        return Err(Error::InvalidBudget(format!("noise variance {sigma_w_sq}")));
    }
    if eigenvalues.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("waterfill eigenvalues"));
    }
    if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument(
            "eigenvalues must be sorted in descending order".into(),
        ));
    }
    let largest = eigenvalues.first().copied().unwrap_or(0.0);
    let cutoff = ZERO_EIGEN_REL_TOL * largest;
    let usable = eigenvalues.iter().take_while(|&&d| d > 0.0 && d > cutoff).count();
    if usable == 0 {
        return Err(Error::NoActiveModes(eigenvalues.len()));
    }
    let floors: Vec<f64> = eigenvalues[..usable].iter().map(|d| 2.0 * sigma_w_sq / d).collect();
    // floors are nondecreasing, so the active set is a prefix
    let mut prefix = 0.0;
    let mut level = total + floors[0];
    for k in 1..=usable {
        prefix += floors[k - 1];
        let candidate = (total + prefix) / k as f64;
        if candidate > floors[k - 1] {
            level = candidate;
        } else {
            break;
        }
    }
    let allocations = eigenvalues
        .iter()
        .enumerate()
        .map(|(k, _)| if k < usable { (level - floors[k]).max(0.0) } else { 0.0 })
        .collect();
    Ok((allocations, level))
}

/// Waterfilling over the top `m` eigenmodes of `c_x` with lifted budget `P²/m`.
pub fn waterfill_lifted(c_x: &CMatrix, budget: &DesignBudget) -> Result<WaterfillResult> {
    budget.validate()?;
    let n2 = budget.n * budget.n;
    if c_x.shape() != (n2, n2) {
        return Err(Error::Dimension(format!(
            "c_x is {:?}, expected {n2}x{n2}",
            c_x.shape()
        )));
    }
    let eig = check_psd(c_x, HERMITIAN_TOL, PSD_TOL)?;
    waterfill_from_eigen(&eig, budget)
}

/// As [`waterfill_lifted`] with a precomputed eigendecomposition.
pub fn waterfill_from_eigen(eig: &HermitianEigen, budget: &DesignBudget) -> Result<WaterfillResult> {
    budget.validate()?;
    let m = budget.m;
    let n2 = budget.n * budget.n;
    if eig.values.len() != n2 {
        return Err(Error::Dimension(format!(
            "{} eigenvalues for n^2 = {n2}",
            eig.values.len()
        )));
    }
    let top: Vec<f64> = eig.values[..m].iter().map(|&d| d.max(0.0)).collect();
    let (allocations, water_level) =
        waterfill_allocations(&top, budget.lifted_budget(), budget.sigma_w_sq)?;
    let mut target = CMatrix::zeros(m, n2);
    for (k, &a) in allocations.iter().enumerate() {
        if a > 0.0 {
            let s = a.sqrt();
            for j in 0..n2 {
                target[(k, j)] = eig.vectors[(j, k)].conj() * s;
            }
        }
    }
    Ok(WaterfillResult {
        lifted_target: LiftedMatrix::new(target, budget.n)?,
        allocations,
        water_level,
        eigen_basis: eig.vectors.clone(),
        eigenvalues: eig.values.clone(),
    })
}
