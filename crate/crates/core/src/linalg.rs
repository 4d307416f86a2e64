//! Dense complex linear algebra helpers shared by every other module.
//!
//! Hermitian eigendecomposition and SVD come from `nalgebra`; this module
//! pins the conventions the rest of the crate relies on: eigenvalues sorted
//! in descending order and every eigen/singular vector rotated so that its
//! largest-magnitude entry is real and positive (ties go to the lowest
//! index).

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const J: Complex64 = Complex64::new(0.0, 1.0);

/// Relative slack used when deciding that two magnitudes tie.
const TIE_TOL: f64 = 1e-12;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn ensure_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn ensure_finite_matrix(m: &CMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn ensure_finite_vector(v: &CVector, what: &'static str) -> Result<()> {
    if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Squared Frobenius norm.
pub fn frob_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn frob(m: &CMatrix) -> f64 {
    frob_sq(m).sqrt()
}

pub fn vec_norm_sq(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Index of the largest-magnitude entry, lowest index on ties.
pub fn dominant_index<'a>(entries: impl Iterator<Item = &'a Complex64>) -> Option<usize> {
    let mags: Vec<f64> = entries.map(|z| z.norm()).collect();
    let max = mags.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return None;
    }
    mags.iter().position(|&m| m >= max * (1.0 - TIE_TOL))
}

/// Rotate a vector so its dominant entry is real and positive.
pub fn fix_phase(v: &mut CVector) {
    if let Some(i) = dominant_index(v.iter()) {
        let rot = v[i].conj() / v[i].norm();
        v.iter_mut().for_each(|z| *z *= rot);
    }
}

fn fix_phase_column(m: &mut CMatrix, col: usize) {
    if let Some(i) = dominant_index(m.column(col).iter()) {
        let z = m[(i, col)];
        let rot = z.conj() / z.norm();
        m.column_mut(col).iter_mut().for_each(|e| *e *= rot);
    }
}

/// `(M + Mᴴ)/2`.
pub fn hermitian_part(m: &CMatrix) -> Result<CMatrix> {
    ensure_square(m)?;
    Ok((m + m.adjoint()).scale(0.5))
}

/// Relative deviation from Hermitian symmetry, `‖M − Mᴴ‖ / ‖M‖`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let norm = frob(m);
    if norm == 0.0 {
        return 0.0;
    }
    frob(&(m - m.adjoint())) / norm
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Unit eigenvectors as columns, matching `values`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn max_value(&self) -> f64 {
        self.values[0]
    }

    pub fn min_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }

    /// Rebuild `V diag(f(λ)) Vᴴ`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let s = f(self.values[k]);
            scaled.column_mut(k).iter_mut().for_each(|z| *z *= s);
        }
        scaled * self.vectors.adjoint()
    }
}

/// Eigendecomposition of the Hermitian part of `m`.
pub fn hermitian_eigen(m: &CMatrix) -> Result<HermitianEigen> {
    let n = ensure_square(m)?;
    ensure_finite_matrix(m, "hermitian_eigen input")?;
    let h = hermitian_part(m)?;
    let eig = nalgebra::SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
        fix_phase_column(&mut vectors, dst);
    }
    Ok(HermitianEigen { values, vectors })
}

/// Check that `m` is Hermitian PSD: Hermitian defect below `herm_tol` and
/// smallest eigenvalue at least `-psd_tol * trace`.
pub fn check_psd(m: &CMatrix, herm_tol: f64, psd_tol: f64) -> Result<HermitianEigen> {
    ensure_square(m)?;
    let defect = hermitian_defect(m);
    let eig = hermitian_eigen(m)?;
    if defect > herm_tol {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.min_value(),
        });
    }
    let trace: f64 = (0..m.nrows()).map(|i| m[(i, i)].re).sum();
    if eig.min_value() < -psd_tol * trace.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.min_value(),
        });
    }
    Ok(eig)
}

/// Singular value decomposition `M = U diag(σ) Wᴴ`, singular values descending,
/// each left singular vector phase-fixed (the paired right vector follows).
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub w: CMatrix,
}

pub fn svd(m: &CMatrix) -> Result<Svd> {
    ensure_finite_matrix(m, "svd input")?;
    let (u0, sv, w0) = if m.nrows() >= m.ncols() {
        jacobi_svd(m)
    } else {
        let (u, s, w) = jacobi_svd(&m.adjoint());
        (w, s, u)
    };
    let k = sv.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let mut u = CMatrix::zeros(u0.nrows(), k);
    let mut w = CMatrix::zeros(w0.nrows(), k);
    let mut singular_values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let mut uc = u0.column(src).into_owned();
        let mut wc = w0.column(src).into_owned();
        if let Some(i) = dominant_index(uc.iter()) {
            let rot = uc[i].conj() / uc[i].norm();
            uc *= rot;
            wc *= rot;
        }
        u.set_column(dst, &uc);
        w.set_column(dst, &wc);
        singular_values.push(sv[src]);
    }
    Ok(Svd {
        u,
        singular_values,
        w,
    })
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD of a tall matrix, `m = U diag(σ) Wᴴ` with
/// `U` having orthonormal columns (zero singular values get completed columns).
fn jacobi_svd(m: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let (rows, cols) = m.shape();
    let mut g = m.clone();
    let mut w = CMatrix::identity(cols, cols);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = g.column(p).norm_squared();
                let beta = g.column(q).norm_squared();
                let gamma = g.column(p).dotc(&g.column(q));
                let mag = gamma.norm();
                if mag == 0.0 || mag <= f64::EPSILON * rows as f64 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / mag;
                let zeta = (beta - alpha) / (2.0 * mag);
                let t = if zeta >= 0.0 { 1.0 } else { -1.0 } / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut g, p, q, c, s, phase);
                rotate_columns(&mut w, p, q, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }
    let sv: Vec<f64> = (0..cols).map(|k| g.column(k).norm()).collect();
    let largest = sv.iter().cloned().fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    // Normalised columns of small singular values carry rotation error of
    // order eps·σ_max/σ_k, so U is re-orthogonalised in descending order.
    let mut u = CMatrix::zeros(rows, cols);
    let mut done: Vec<usize> = Vec::with_capacity(cols);
    let mut missing = vec![];
    for &k in &order {
        if sv[k] > largest * f64::EPSILON * rows as f64 && sv[k] > 0.0 {
            let mut col = g.column(k).unscale(sv[k]);
            orthogonalise(&mut col, &u, &done);
            let norm = col.norm();
            if norm > 0.5 {
                u.set_column(k, &col.unscale(norm));
                done.push(k);
                continue;
            }
        }
        missing.push(k);
    }
    // complete U with the standard basis vector of largest residual
    for k in missing {
        let mut best = CVector::zeros(rows);
        for i in 0..rows {
            let mut e = CVector::zeros(rows);
            e[i] = ONE;
            orthogonalise(&mut e, &u, &done);
            if e.norm() > best.norm() {
                best = e;
            }
        }
        let norm = best.norm();
        u.set_column(k, &best.unscale(norm));
        done.push(k);
    }
    (u, sv, w)
}

/// Two passes of Gram-Schmidt of `v` against the listed columns of `u`.
fn orthogonalise(v: &mut CVector, u: &CMatrix, cols: &[usize]) {
    for _ in 0..2 {
        for &j in cols {
            let proj = u.column(j).dotc(v);
            *v -= u.column(j) * proj;
        }
    }
}

/// `[x_p, x_q] ← [x_p, φ̄ x_q]·[[c, s], [−s, c]]`.
fn rotate_columns(x: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    let pc = phase.conj();
    for i in 0..x.nrows() {
        let a = x[(i, p)];
        let b = x[(i, q)] * pc;
        x[(i, p)] = a * c - b * s;
        x[(i, q)] = a * s + b * c;
    }
}

/// Principal square root of a Hermitian PSD matrix.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let eig = check_psd(m, 1e-10, 1e-10)?;
    Ok(eig.map_values(|l| l.max(0.0).sqrt()))
}

/// Deviation from unitarity, `‖VᴴV − I‖`.
pub fn unitary_defect(v: &CMatrix) -> f64 {
    let n = v.ncols();
    frob(&(v.adjoint() * v - CMatrix::identity(n, n)))
}

pub fn is_unitary(v: &CMatrix, tol: f64) -> bool {
    v.nrows() == v.ncols() && unitary_defect(v) <= tol
}

/// Proper complex Gaussian sample with `E|z|² = variance`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(s * re, s * im)
}

pub fn random_complex_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng, variance))
}

pub fn random_complex_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> CVector {
    CVector::from_fn(len, |_, _| complex_normal(rng, variance))
}

/// Haar-distributed unitary via QR of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = random_complex_matrix(rng, n, n, 1.0);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..n {
        let d = r[(k, k)];
        if d.norm() > 0.0 {
            let ph = d / d.norm();
            q.column_mut(k).iter_mut().for_each(|z| *z *= ph);
        }
    }
    q
}

/// Random Hermitian PSD matrix `G Gᴴ` with `G` of size n×rank.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> CMatrix {
    let g = random_complex_matrix(rng, n, rank, 1.0);
    let m = &g * g.adjoint();
    (m.clone() + m.adjoint()).scale(0.5)
}
