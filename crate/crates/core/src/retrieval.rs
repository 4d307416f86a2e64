//! Forward observation model and phase retrieval solvers.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, frob_sq, svd, vec_norm_sq, CMatrix, CVector, Complex64, ZERO};

/// Noisy squared-magnitude observations `y = |A u|² + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: Vec<f64>,
    pub matrix_label: String,
    pub sigma_w_sq: f64,
    pub truth: Option<CVector>,
}

impl Observation {
    /// Amplitudes `ψ = sqrt(max(y, 0))`.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.y.iter().map(|&v| v.max(0.0).sqrt()).collect()
    }
}

/// Draw `y = |A u|² + w` with `w ~ N(0, σ² I)` real.
pub fn forward_observe<R: Rng + ?Sized>(
    a: &CMatrix,
    u: &CVector,
    sigma_w_sq: f64,
    label: &str,
    rng: &mut R,
) -> Result<Observation> {
    if a.ncols() != u.len() {
        return Err(Error::Dimension(format!("a is {:?}, u has length {}", a.shape(), u.len())));
    }
    if !(sigma_w_sq >= 0.0 && sigma_w_sq.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise variance {sigma_w_sq}")));
    }
    let std = sigma_w_sq.sqrt();
    let y = (a * u)
        .iter()
        .map(|z| {
            let w: f64 = rng.sample(StandardNormal);
            z.norm_sqr() + std * w
        })
        .collect();
    Ok(Observation {
        y,
        matrix_label: label.to_string(),
        sigma_w_sq,
        truth: Some(u.clone()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Taf,
    Altmin,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "taf" => Ok(Algorithm::Taf),
            "altmin" => Ok(Algorithm::Altmin),
            other => Err(Error::InvalidArgument(format!("unknown recovery algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub estimate: CVector,
    pub iterations: usize,
    pub final_objective: f64,
    pub algorithm: Algorithm,
    /// Size of the truncation set at the first gradient step (TAF only).
    pub initial_truncation_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TafOptions {
    pub max_iters: usize,
    pub step: f64,
    /// Summand `i` is kept when `|(A z)_i| ≥ ψ_i/(1 + γ)`.
    pub gamma: f64,
}

impl Default for TafOptions {
    fn default() -> Self {
        TafOptions {
            max_iters: 600,
            step: 1.0,
            gamma: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AltminOptions {
    pub max_iters: usize,
    /// Stop when the amplitude residual decreases by less than this (relative).
    pub tol: f64,
}

impl Default for AltminOptions {
    fn default() -> Self {
        AltminOptions {
            max_iters: 1000,
            tol: 1e-12,
        }
    }
}

pub const POWER_ITERATIONS: usize = 100;
/// The initializer uses the `⌈m/INIT_FRACTION⌉` rows with largest normalized amplitude.
pub const INIT_FRACTION: usize = 6;

fn unit_phase(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r > 0.0 {
        z / r
    } else {
        ZERO
    }
}

fn check_recovery_input(a: &CMatrix, obs: &Observation) -> Result<()> {
    let (m, n) = a.shape();
    if obs.y.len() != m {
        return Err(Error::Dimension(format!("{} observations for {m} rows", obs.y.len())));
    }
    if m < n {
        return Err(Error::InvalidArgument(format!("recovery needs m >= n, got m={m} n={n}")));
    }
    if obs.y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observations"));
    }
    Ok(())
}

/// Orthogonality-promoting initialization: top eigenvector of
/// `Σ_{i∈I₀} r_iᴴ r_i / ‖r_i‖²` over the rows `r_i` with the largest
/// `ψ_i/‖r_i‖`, found by power iteration from the normalized all-ones
/// vector, scaled by the least-squares amplitude fit.
pub fn orthogonality_promoting_init(a: &CMatrix, psi: &[f64]) -> CVector {
    let (m, n) = a.shape();
    let row_norms: Vec<f64> = (0..m).map(|i| a.row(i).norm()).collect();
    let mut order: Vec<usize> = (0..m).filter(|&i| row_norms[i] > 0.0).collect();
    let score = |i: usize| psi[i] / row_norms[i];
    order.sort_by(|&i, &j| score(j).total_cmp(&score(i)).then(i.cmp(&j)));
    order.truncate(m.div_ceil(INIT_FRACTION));
    let mut y = CMatrix::zeros(n, n);
    for &i in &order {
        let r = a.row(i);
        y += r.adjoint() * r * c64(1.0 / (row_norms[i] * row_norms[i]), 0.0);
    }
    let mut v = CVector::from_element(n, c64(1.0 / (n as f64).sqrt(), 0.0));
    for _ in 0..POWER_ITERATIONS {
        let next = &y * &v;
        let norm = next.norm();
        if norm == 0.0 {
            break;
        }
        v = next.unscale(norm);
    }
    let av = a * &v;
    let num: f64 = av.iter().zip(psi).map(|(z, p)| p * z.norm()).sum();
    let den: f64 = av.iter().map(|z| z.norm_sqr()).sum();
    if den == 0.0 {
        return CVector::zeros(n);
    }
    v * c64(num / den, 0.0)
}

fn amplitude_loss(az: &CVector, psi: &[f64]) -> f64 {
    az.iter().zip(psi).map(|(z, p)| (z.norm() - p).powi(2)).sum::<f64>() / (2.0 * psi.len() as f64)
}

/// Truncated amplitude flow.
///
/// Gradient steps `z ← z − (μ/‖A‖²) Σ_{i∈I} ((Az)_i − ψ_i·phase((Az)_i))·r_iᴴ`
/// over the truncation set `I = {i : |(Az)_i| ≥ ψ_i/(1+γ)}`. The best iterate
/// by amplitude loss is returned.
pub fn taf_recover(a: &CMatrix, obs: &Observation, opts: &TafOptions) -> Result<RecoveryResult> {
    check_recovery_input(a, obs)?;
    let z = orthogonality_promoting_init(a, &obs.amplitudes());
    taf_refine(a, obs, opts, z)
}

/// The gradient stage of [`taf_recover`] started from `z0`.
pub fn taf_refine(a: &CMatrix, obs: &Observation, opts: &TafOptions, z0: CVector) -> Result<RecoveryResult> {
    check_recovery_input(a, obs)?;
    if z0.len() != a.ncols() {
        return Err(Error::Dimension(format!("start has length {} for {} columns", z0.len(), a.ncols())));
    }
    let psi = obs.amplitudes();
    let energy = frob_sq(a);
    let mut z = z0;
    let mut az = a * &z;
    let mut best = (amplitude_loss(&az, &psi), z.clone());
    let mut initial_truncation_size = None;
    let mut iterations = 0;
    if energy > 0.0 {
        let scale = c64(opts.step / energy, 0.0);
        let ratio = 1.0 / (1.0 + opts.gamma);
        let ah = a.adjoint();
        for it in 1..=opts.max_iters {
            let mut residual = CVector::zeros(az.len());
            let mut kept = 0;
            for (i, (&zi, &p)) in az.iter().zip(&psi).enumerate() {
                if zi.norm() >= ratio * p {
                    residual[i] = zi - unit_phase(zi) * p;
                    kept += 1;
                }
            }
            initial_truncation_size.get_or_insert(kept);
            let step = &ah * residual * scale;
            z -= &step;
            az = a * &z;
            iterations = it;
            let loss = amplitude_loss(&az, &psi);
            if loss < best.0 {
                best = (loss, z.clone());
            }
            if step.norm() <= 1e-15 * z.norm() || !loss.is_finite() {
                break;
            }
        }
    }
    Ok(RecoveryResult {
        estimate: best.1,
        iterations,
        final_objective: best.0,
        algorithm: Algorithm::Taf,
        initial_truncation_size,
    })
}

/// Amplitude residual `‖ψ − |A û|‖` after every iteration, alongside the estimate.
pub fn altmin_trace(
    a: &CMatrix,
    obs: &Observation,
    opts: &AltminOptions,
) -> Result<(RecoveryResult, Vec<f64>)> {
    check_recovery_input(a, obs)?;
    let psi = obs.amplitudes();
    let residual = |az: &CVector| -> f64 {
        az.iter().zip(&psi).map(|(z, p)| (z.norm() - p).powi(2)).sum::<f64>().sqrt()
    };
    let dec = svd(a)?;
    let cutoff = dec.singular_values.first().copied().unwrap_or(0.0) * 1e-12 * a.nrows().max(a.ncols()) as f64;
    // pinv(A) = W diag(1/σ) Uᴴ over the numerically nonzero singular values
    let mut pinv = CMatrix::zeros(a.ncols(), a.nrows());
    for (k, &s) in dec.singular_values.iter().enumerate() {
        if s > cutoff {
            pinv += dec.w.column(k) * dec.u.column(k).adjoint() * c64(1.0 / s, 0.0);
        }
    }
    let mut u = orthogonality_promoting_init(a, &psi);
    let mut az = a * &u;
    let mut trace = vec![residual(&az)];
    let mut iterations = 0;
    for it in 1..=opts.max_iters {
        let target = CVector::from_iterator(az.len(), az.iter().zip(&psi).map(|(z, p)| {
            let ph = unit_phase(*z);
            // zero entries carry no phase; take a fixed one
            if ph == ZERO { c64(*p, 0.0) } else { ph * *p }
        }));
        u = &pinv * target;
        az = a * &u;
        let r = residual(&az);
        let prev = *trace.last().unwrap();
        trace.push(r);
        iterations = it;
        if prev == 0.0 || (prev - r) <= opts.tol * prev {
            break;
        }
    }
    let final_objective = *trace.last().unwrap();
    Ok((
        RecoveryResult {
            estimate: u,
            iterations,
            final_objective,
            algorithm: Algorithm::Altmin,
            initial_truncation_size: None,
        },
        trace,
    ))
}

/// Error-reduction alternating projections, `û ← pinv(A)(ψ ⊙ phase(A û))`.
pub fn altmin_recover(a: &CMatrix, obs: &Observation, opts: &AltminOptions) -> Result<RecoveryResult> {
    altmin_trace(a, obs, opts).map(|(r, _)| r)
}

/// `min_{|c|=1} ‖u − c·û‖/‖u‖`.
pub fn phase_aligned_error(u: &CVector, u_hat: &CVector) -> Result<f64> {
    if u.len() != u_hat.len() {
        return Err(Error::Dimension(format!("lengths {} and {}", u.len(), u_hat.len())));
    }
    let nu = vec_norm_sq(u);
    if nu == 0.0 {
        return Err(Error::ZeroDenominator("phase_aligned_error"));
    }
    let cross = u_hat.dotc(u).norm();
    let sq = (nu + vec_norm_sq(u_hat) - 2.0 * cross).max(0.0);
    Ok((sq / nu).sqrt())
}
