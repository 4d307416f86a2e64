//! Diagnostics: LMMSE error matrix, low-SNR MI proxy, the Kronecker-symmetric
//! trace identity, stationarity residuals and a small-scale MMSE oracle.

use rayon::prelude::*;
use serde::Serialize;

use crate::design::{waterfill_from_eigen, DesignBudget, WaterfillResult};
use crate::error::{Error, Result};
use crate::kron::{kron, lift_signal, row_wise_krp, LiftedMatrix};
use crate::linalg::{
    c64, ensure_square, frob, hermitian_eigen, hermitian_part, CMatrix, CVector, HermitianEigen,
};
use crate::rng::RngStream;
use crate::soi::SoiModel;

fn check_lifted_cov(lifted: &LiftedMatrix, c_x: &CMatrix) -> Result<()> {
    let n2 = lifted.n() * lifted.n();
    if c_x.shape() != (n2, n2) {
        return Err(Error::Dimension(format!(
            "c_x is {:?}, lifted matrix has {n2} columns",
            c_x.shape()
        )));
    }
    Ok(())
}

/// `E_L = C_X − C_X Ãᴴ (2σ²I + Ã C_X Ãᴴ)⁻¹ Ã C_X`.
pub fn lmmse_matrix(lifted: &LiftedMatrix, c_x: &CMatrix, sigma_w_sq: f64) -> Result<CMatrix> {
    check_lifted_cov(lifted, c_x)?;
    if !(sigma_w_sq > 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance {sigma_w_sq}")));
    }
    let a = lifted.entries();
    let m = lifted.m();
    let ac = a * c_x;
    let inner = hermitian_part(&(&ac * a.adjoint()))?
        + CMatrix::identity(m, m) * c64(2.0 * sigma_w_sq, 0.0);
    let chol = inner
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { min_eigenvalue: f64::NAN })?;
    let solved = chol.solve(&ac);
    hermitian_part(&(c_x - ac.adjoint() * solved))
}

/// `Tr(Ã C_X Ãᴴ)/(2σ²)`.
pub fn mi_low_snr_proxy(lifted: &LiftedMatrix, c_x: &CMatrix, sigma_w_sq: f64) -> Result<f64> {
    check_lifted_cov(lifted, c_x)?;
    let a = lifted.entries();
    let tr = (a * c_x * a.adjoint()).trace().re;
    Ok(tr.max(0.0) / (2.0 * sigma_w_sq))
}

/// `Σ_k (a_kᴴ C_U* a_k)²`, equal to `Tr(Ã (C_U ⊗ C_U*) Ãᴴ)`.
pub fn kron_sym_trace(a: &CMatrix, c_u: &CMatrix) -> Result<f64> {
    let n = ensure_square(c_u)?;
    if a.ncols() != n {
        return Err(Error::Dimension(format!("a is {:?}, c_u is {n}x{n}", a.shape())));
    }
    let cc = c_u.conjugate();
    Ok((0..a.nrows())
        .map(|k| {
            let row = a.row(k).transpose();
            let q = row.dotc(&(&cc * &row)).re;
            q * q
        })
        .sum())
}

/// Rayleigh quotients and eigen-residuals of the rows of `A` against their
/// stationarity matrices `H_k`.
#[derive(Debug, Clone, Serialize)]
pub struct NecessaryConditionReport {
    /// Indices of the nonzero rows the other fields refer to.
    pub rows: Vec<usize>,
    pub per_row_lambda: Vec<f64>,
    pub per_row_residual: Vec<f64>,
    pub lambda_dispersion: f64,
    pub zero_rows: Vec<usize>,
}

/// `H_k = (I ⊗ a_kᵀ) Eᵀ (I ⊗ a_k*) + (a_kᵀ ⊗ I) E (a_k* ⊗ I)` with `a_k` row `k`
/// of `A` as a column.
pub fn stationarity_matrix(row: &CVector, e: &CMatrix) -> CMatrix {
    let n = row.len();
    let eye = CMatrix::identity(n, n);
    let at = CMatrix::from_row_slice(1, n, row.as_slice());
    let ac = CMatrix::from_column_slice(n, 1, row.conjugate().as_slice());
    kron(&eye, &at) * e.transpose() * kron(&eye, &ac) + kron(&at, &eye) * e * kron(&ac, &eye)
}

pub fn necessary_condition_residual(a: &CMatrix, e: &CMatrix) -> Result<NecessaryConditionReport> {
    let n = a.ncols();
    if e.shape() != (n * n, n * n) {
        return Err(Error::Dimension(format!("e is {:?}, need {0}x{0}", n * n)));
    }
    let mut report = NecessaryConditionReport {
        rows: vec![],
        per_row_lambda: vec![],
        per_row_residual: vec![],
        lambda_dispersion: 0.0,
        zero_rows: vec![],
    };
    for k in 0..a.nrows() {
        let row = a.row(k).transpose();
        let norm_sq = row.norm_squared();
        if norm_sq == 0.0 {
            report.zero_rows.push(k);
            continue;
        }
        let h = stationarity_matrix(&row, e);
        let hr = &h * &row;
        let lambda = row.dotc(&hr).re / norm_sq;
        let residual = (hr - &row * c64(lambda, 0.0)).norm() / norm_sq.sqrt();
        report.rows.push(k);
        report.per_row_lambda.push(lambda);
        report.per_row_residual.push(residual);
    }
    if !report.per_row_lambda.is_empty() {
        let max = report.per_row_lambda.iter().cloned().fold(f64::MIN, f64::max);
        let min = report.per_row_lambda.iter().cloned().fold(f64::MAX, f64::min);
        report.lambda_dispersion = max - min;
    }
    Ok(report)
}

/// Fixed-point check for the generalised mercury-waterfilling form: how far
/// `E` is from diagonal in the basis spanned by the lifted rows' eigenmodes,
/// and the error levels on active modes.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorModeReport {
    /// `‖offdiag(Vᴴ E V)‖ / ‖E‖`.
    pub offdiag_defect: f64,
    /// Diagonal of `Vᴴ E V` on modes with nonzero allocation.
    pub active_levels: Vec<f64>,
    /// Diagonal of `Vᴴ E V` on the top-`m` modes left without power.
    pub inactive_levels: Vec<f64>,
    /// Diagonal of `Vᴴ E V` on modes outside the top `m`.
    pub excluded_levels: Vec<f64>,
}

pub fn error_mode_report(wf: &WaterfillResult, e: &CMatrix) -> Result<ErrorModeReport> {
    let v = &wf.eigen_basis;
    if e.shape() != v.shape() {
        return Err(Error::Dimension(format!("e is {:?}, basis {:?}", e.shape(), v.shape())));
    }
    let rotated = v.adjoint() * e * v;
    let mut off = rotated.clone();
    for i in 0..off.nrows() {
        off[(i, i)] = c64(0.0, 0.0);
    }
    let norm = frob(e);
    let mut active_levels = vec![];
    let mut inactive_levels = vec![];
    let mut excluded_levels = vec![];
    for i in 0..rotated.nrows() {
        let level = rotated[(i, i)].re;
        match wf.allocations.get(i) {
            Some(&a) if a > 0.0 => active_levels.push(level),
            Some(_) => inactive_levels.push(level),
            None => excluded_levels.push(level),
        }
    }
    Ok(ErrorModeReport {
        offdiag_defect: if norm == 0.0 { 0.0 } else { frob(&off) / norm },
        active_levels,
        inactive_levels,
        excluded_levels,
    })
}

/// Experimental: re-waterfill along the eigenbasis of an error-covariance
/// oracle, using the prior variance of `x` along each mode as its gain.
/// With the LMMSE oracle the waterfilled target is a fixed point.
pub fn iterate_error_waterfill(
    c_x: &CMatrix,
    budget: &DesignBudget,
    oracle: impl Fn(&LiftedMatrix) -> Result<CMatrix>,
    iterations: usize,
) -> Result<Vec<WaterfillResult>> {
    let mut current = waterfill_from_eigen(&hermitian_eigen(c_x)?, budget)?;
    let mut history = vec![current.clone()];
    for _ in 0..iterations {
        let e = oracle(&current.lifted_target)?;
        let basis = split_degenerate_modes(&hermitian_eigen(&e)?, c_x)?;
        let gains: Vec<f64> = (0..basis.ncols())
            .map(|k| {
                let v = basis.column(k);
                v.dotc(&(c_x * v)).re
            })
            .collect();
        let mut order: Vec<usize> = (0..gains.len()).collect();
        order.sort_by(|&i, &j| gains[j].total_cmp(&gains[i]).then(i.cmp(&j)));
        let mut vectors = CMatrix::zeros(basis.nrows(), basis.ncols());
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &basis.column(src));
        }
        let eig = HermitianEigen {
            values: order.iter().map(|&i| gains[i].max(0.0)).collect(),
            vectors,
        };
        current = waterfill_from_eigen(&eig, budget)?;
        history.push(current.clone());
    }
    Ok(history)
}

/// Eigenvalue clusters of `E` closer than this (relative) share an eigenspace.
const CLUSTER_REL_TOL: f64 = 1e-9;

/// Eigenbasis of `E` in which each degenerate eigenspace is further
/// diagonalised by `c_x`.
fn split_degenerate_modes(eig: &HermitianEigen, c_x: &CMatrix) -> Result<CMatrix> {
    let values = &eig.values;
    let scale = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let mut basis = eig.vectors.clone();
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && values[start] - values[end] <= CLUSTER_REL_TOL * scale {
            end += 1;
        }
        if end - start > 1 {
            let q = eig.vectors.columns(start, end - start).into_owned();
            let inner = hermitian_eigen(&(q.adjoint() * c_x * &q))?;
            basis.columns_mut(start, end - start).copy_from(&(&q * &inner.vectors));
        }
        start = end;
    }
    Ok(basis)
}

/// Monte Carlo estimate of the MMSE error covariance of `x = u ⊗ u*` given
/// `y = |A u|² + w`.
#[derive(Debug, Clone)]
pub struct MmseEstimate {
    pub matrix: CMatrix,
    pub num_samples: usize,
    /// Frobenius norm of the standard error of the outer average.
    pub std_error_proxy: f64,
    /// Smallest effective sample size among the importance-weighted inner averages.
    pub min_effective_sample_size: f64,
    /// Set when some inner average had an effective sample size below
    /// [`MIN_EFFECTIVE_SAMPLES`].
    pub low_ess_warning: bool,
}

pub const MAX_ORACLE_N: usize = 4;
pub const MAX_ORACLE_M: usize = 6;
pub const MIN_OUTER: usize = 100;
pub const MIN_INNER: usize = 100;
pub const MIN_EFFECTIVE_SAMPLES: f64 = 10.0;

/// Importance-sampling MMSE oracle: for each outer draw `(u, y)`, estimate
/// `E{x|y}` by prior samples weighted with the Gaussian likelihood, then
/// average the outer products of the estimation errors.
pub fn mmse_matrix_importance_sampling(
    a: &CMatrix,
    model: &SoiModel,
    sigma_w_sq: f64,
    num_outer: usize,
    num_inner: usize,
    stream: RngStream,
) -> Result<MmseEstimate> {
    let (m, n) = a.shape();
    if n != model.n() {
        return Err(Error::Dimension(format!("a has {n} columns, model n = {}", model.n())));
    }
    if n > MAX_ORACLE_N || m > MAX_ORACLE_M {
        return Err(Error::InvalidArgument(format!(
            "importance-sampling oracle limited to n <= {MAX_ORACLE_N}, m <= {MAX_ORACLE_M}"
        )));
    }
    if num_outer < MIN_OUTER {
        return Err(Error::TooFewSamples { required: MIN_OUTER, got: num_outer });
    }
    if num_inner < MIN_INNER {
        return Err(Error::TooFewSamples { required: MIN_INNER, got: num_inner });
    }
    if !(sigma_w_sq > 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance {sigma_w_sq}")));
    }
    let sampler = model.sampler()?;
    let n2 = n * n;
    let noise_std = sigma_w_sq.sqrt();
    let draws: Vec<(CVector, f64)> = (0..num_outer)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.with_index(stream.stream_index.wrapping_add(i as u64)).generator();
            let u = sampler.sample(&mut rng);
            let y: Vec<f64> = (a * &u)
                .iter()
                .map(|z| z.norm_sqr() + noise_std * rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng))
                .collect();
            let mut log_w = Vec::with_capacity(num_inner);
            let mut xs = Vec::with_capacity(num_inner);
            for _ in 0..num_inner {
                let ui = sampler.sample(&mut rng);
                let dist: f64 = (a * &ui)
                    .iter()
                    .zip(&y)
                    .map(|(z, yi)| (yi - z.norm_sqr()).powi(2))
                    .sum();
                log_w.push(-dist / (2.0 * sigma_w_sq));
                xs.push(lift_signal(&ui));
            }
            let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
            let sw: f64 = w.iter().sum();
            let sw2: f64 = w.iter().map(|x| x * x).sum();
            let mut mean = CVector::zeros(n2);
            for (wi, xi) in w.iter().zip(&xs) {
                mean += xi * c64(wi / sw, 0.0);
            }
            (lift_signal(&u) - mean, sw * sw / sw2)
        })
        .collect();
    let mut sum = CMatrix::zeros(n2, n2);
    let mut sum_sq = vec![0.0; n2 * n2];
    let mut min_ess = f64::INFINITY;
    for (err, ess) in &draws {
        let outer = err * err.adjoint();
        for (s, o) in sum_sq.iter_mut().zip(outer.iter()) {
            *s += o.norm_sqr();
        }
        sum += outer;
        min_ess = min_ess.min(*ess);
    }
    let count = num_outer as f64;
    let matrix = hermitian_part(&sum.unscale(count))?;
    let variance: f64 = sum_sq
        .iter()
        .zip(matrix.iter())
        .map(|(s, mu)| (s / count - mu.norm_sqr()).max(0.0))
        .sum();
    Ok(MmseEstimate {
        matrix,
        num_samples: num_outer * num_inner,
        std_error_proxy: (variance / count).sqrt(),
        min_effective_sample_size: min_ess,
        low_ess_warning: min_ess < MIN_EFFECTIVE_SAMPLES,
    })
}

/// Dense `Tr(row_wise_krp(a)·c_x·row_wise_krp(a)ᴴ)`.
pub fn lifted_trace(a: &CMatrix, c_x: &CMatrix) -> Result<f64> {
    let lifted = row_wise_krp(a);
    check_lifted_cov(&lifted, c_x)?;
    let t = lifted.entries();
    Ok((t * c_x * t.adjoint()).trace().re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{low_snr_optimal_matrix, waterfill_lifted};
    use crate::linalg::{random_complex_matrix, random_psd};
    use crate::soi::{gaussian_covariance_expdecay, lifted_covariance_kron_symmetric};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn diag(values: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(values.len(), values.iter().map(|&x| c64(x, 0.0))))
    }

    #[test]
    fn lmmse_cases() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let c_x = random_psd(&mut rng, 4, 4);
        let zero = LiftedMatrix::zeros(3, 2);
        assert!(frob(&(lmmse_matrix(&zero, &c_x, 1.0).unwrap() - &c_x)) < 1e-12);
        let a = row_wise_krp(&random_complex_matrix(&mut rng, 3, 2, 1.0));
        let e = lmmse_matrix(&a, &c_x, 1e9).unwrap();
        assert!(frob(&(e - &c_x)) < 1e-6 * frob(&c_x));
        let scalar = LiftedMatrix::new(CMatrix::from_element(1, 1, c64(1.0, 0.0)), 1).unwrap();
        let e = lmmse_matrix(&scalar, &diag(&[2.0]), 1.0).unwrap();
        assert!((e[(0, 0)].re - 1.0).abs() < 1e-14);
        let e = lmmse_matrix(&a, &c_x, 0.3).unwrap();
        let gap = hermitian_eigen(&(&c_x - &e)).unwrap();
        assert!(gap.min_value() >= -1e-8);
        assert!(hermitian_eigen(&e).unwrap().min_value() >= -1e-8);
    }

    #[test]
    fn proxy_and_trace_identity() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        assert_eq!(mi_low_snr_proxy(&LiftedMatrix::zeros(2, 2), &CMatrix::identity(4, 4), 1.0).unwrap(), 0.0);
        assert_eq!(kron_sym_trace(&CMatrix::identity(2, 2), &diag(&[2.0, 1.0])).unwrap(), 5.0);
        assert_eq!(kron_sym_trace(&CMatrix::zeros(3, 2), &diag(&[2.0, 1.0])).unwrap(), 0.0);
        for _ in 0..50 {
            let a = random_complex_matrix(&mut rng, 5, 3, 1.0);
            let c_u = random_psd(&mut rng, 3, 3);
            let c_x = lifted_covariance_kron_symmetric(&c_u);
            let fast = kron_sym_trace(&a, &c_u).unwrap();
            let dense = lifted_trace(&a, &c_x).unwrap();
            assert!((fast - dense).abs() <= 1e-10 * dense);
            let p1 = mi_low_snr_proxy(&row_wise_krp(&a), &c_x, 0.5).unwrap();
            let p2 = mi_low_snr_proxy(&row_wise_krp(&a), &c_x, 1.0).unwrap();
            assert!((p1 - 2.0 * p2).abs() <= 1e-12 * p1);
            assert!((p2 - fast / 2.0).abs() <= 1e-10 * p2);
        }
    }

    #[test]
    fn residual_identity_error() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let a = random_complex_matrix(&mut rng, 4, 3, 1.0);
        let rep = necessary_condition_residual(&a, &CMatrix::identity(9, 9)).unwrap();
        for (k, (&l, &r)) in rep.per_row_lambda.iter().zip(&rep.per_row_residual).enumerate() {
            assert!(r < 1e-12);
            assert!((l - 2.0 * a.row(k).norm_squared()).abs() < 1e-12 * l);
        }
        let empty = necessary_condition_residual(&CMatrix::zeros(3, 3), &CMatrix::identity(9, 9)).unwrap();
        assert!(empty.rows.is_empty() && empty.zero_rows.len() == 3);
    }

    #[test]
    fn residual_low_snr_optimum() {
        let c_u = gaussian_covariance_expdecay(3);
        let budget = DesignBudget::unit_rows(5, 3, 1.0).unwrap();
        let a = low_snr_optimal_matrix(&c_u, &budget, None).unwrap();
        let rep = necessary_condition_residual(&a, &lifted_covariance_kron_symmetric(&c_u)).unwrap();
        assert!(rep.per_row_residual.iter().all(|&r| r < 1e-8));
        assert!(rep.lambda_dispersion < 1e-8);
    }

    #[test]
    fn lmmse_is_diagonal_in_prior_basis() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let c_x = random_psd(&mut rng, 9, 9);
        let s2 = 20.0;
        let budget = DesignBudget::unit_rows(6, 3, s2).unwrap();
        let wf = waterfill_lifted(&c_x, &budget).unwrap();
        assert!(wf.allocations.iter().any(|&a| a == 0.0));
        let e = lmmse_matrix(&wf.lifted_target, &c_x, s2).unwrap();
        let rep = error_mode_report(&wf, &e).unwrap();
        assert!(rep.offdiag_defect < 1e-10);
        let eta = 2.0 * s2 / wf.water_level;
        for l in &rep.active_levels {
            assert!((l - eta).abs() < 1e-8 * eta);
        }
        for l in &rep.inactive_levels {
            assert!(*l <= eta * (1.0 + 1e-8));
        }
        let hist = iterate_error_waterfill(&c_x, &budget, |t| lmmse_matrix(t, &c_x, s2), 2).unwrap();
        for h in &hist[1..] {
            for (x, y) in h.allocations.iter().zip(&wf.allocations) {
                assert!((x - y).abs() < 1e-8 * wf.allocations[0]);
            }
        }
    }

    #[test]
    fn mmse_oracle_limits() {
        let model = SoiModel::gaussian_expdecay(2);
        let c_x = lifted_covariance_kron_symmetric(model.analytic_covariance().unwrap());
        let zero = CMatrix::zeros(3, 2);
        let est = mmse_matrix_importance_sampling(&zero, &model, 1.0, 4000, 200, RngStream::new(1, 0)).unwrap();
        assert!(frob(&(&est.matrix - &c_x)) / frob(&c_x) < 0.1);
        assert!(crate::linalg::hermitian_defect(&est.matrix) < 1e-8);
        assert!(!est.low_ess_warning);
        assert!(mmse_matrix_importance_sampling(&CMatrix::zeros(7, 2), &model, 1.0, 200, 200, RngStream::new(1, 0)).is_err());
        assert!(matches!(
            mmse_matrix_importance_sampling(&zero, &model, 1.0, 10, 200, RngStream::new(1, 0)),
            Err(Error::TooFewSamples { .. })
        ));
    }
}
