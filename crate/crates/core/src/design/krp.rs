use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kron::{unvec, LiftedMatrix};
use crate::linalg::{c64, hermitian_eigen, hermitian_part, is_unitary, CMatrix, CVector};

const UNITARY_TOL: f64 = 1e-10;

/// Unitary DFT, `F[k, p] = e^{−j2πkp/n}/√n` with 0-based `k, p`.
pub fn dft_matrix(n: usize) -> CMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |k, p| {
        let angle = -2.0 * PI * ((k * p) % n) as f64 / n as f64;
        c64(0.0, angle).exp() * scale
    })
}

fn check_alignment(target: &LiftedMatrix, v: &CMatrix) -> Result<()> {
    let m = target.m();
    if v.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "alignment is {:?}, target has {m} rows",
            v.shape()
        )));
    }
    if !is_unitary(v, UNITARY_TOL * m as f64) {
        return Err(Error::InvalidArgument("alignment matrix is not unitary".into()));
    }
    Ok(())
}

/// Hermitian parts of `unvec` of each row of `V·target`.
fn row_hermitians(target: &LiftedMatrix, v: &CMatrix) -> Result<Vec<CMatrix>> {
    let rotated = v * target.entries();
    let n = target.n();
    (0..target.m())
        .map(|k| {
            let row = CVector::from_iterator(n * n, rotated.row(k).iter().copied());
            hermitian_part(&unvec(&row, n)?)
        })
        .collect()
}

/// Top eigenvalues at or below this fraction of the spectral radius count as zero.
const NONPOSITIVE_REL_TOL: f64 = 1e-12;

/// `sqrt(scale·max(μ_max, 0))·conj(v_max)` for a Hermitian `h`.
fn dominant_conj(h: &CMatrix, scale: f64) -> Result<CVector> {
    let eig = hermitian_eigen(h)?;
    let mu = eig.max_value();
    let radius = mu.abs().max(eig.min_value().abs());
    if mu <= NONPOSITIVE_REL_TOL * radius {
        return Ok(CVector::zeros(h.nrows()));
    }
    Ok(eig.vector(0).conjugate() * c64((scale * mu).sqrt(), 0.0))
}

/// Closest matrix `Â` (row by row) whose row-wise Khatri-Rao product
/// approximates `V·target`.
pub fn nearest_krp_rows(target: &LiftedMatrix, v: &CMatrix) -> Result<CMatrix> {
    check_alignment(target, v)?;
    let n = target.n();
    let mut a = CMatrix::zeros(target.m(), n);
    for (k, h) in row_hermitians(target, v)?.iter().enumerate() {
        let row = dominant_conj(h, 1.0)?;
        for p in 0..n {
            a[(k, p)] = row[p];
        }
    }
    Ok(a)
}

/// Diagonal masks `g_1..g_b` of a masked-Fourier measurement matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    pub masks: Vec<CVector>,
    pub n: usize,
}

impl MaskSet {
    pub fn new(masks: Vec<CVector>, n: usize) -> Result<Self> {
        if masks.iter().any(|g| g.len() != n) {
            return Err(Error::Dimension(format!("every mask must have length {n}")));
        }
        Ok(MaskSet { masks, n })
    }

    pub fn b(&self) -> usize {
        self.masks.len()
    }

    pub fn m(&self) -> usize {
        self.masks.len() * self.n
    }
}

/// Masks whose masked-Fourier matrix best matches `V·target`.
pub fn masked_fourier_masks(
    target: &LiftedMatrix,
    v: &CMatrix,
    b: usize,
    n: usize,
) -> Result<MaskSet> {
    if target.n() != n || target.m() != b * n {
        return Err(Error::Dimension(format!(
            "masked Fourier needs m = b*n, got m={} b={b} n={n}",
            target.m()
        )));
    }
    check_alignment(target, v)?;
    let f = dft_matrix(n);
    let herms = row_hermitians(target, v)?;
    let mut masks = Vec::with_capacity(b);
    for l in 0..b {
        let mut h = CMatrix::zeros(n, n);
        for k in 0..n {
            let mk = &herms[l * n + k];
            // F̃_k M F̃_k* with F̃_k = diag(row k of F)
            for i in 0..n {
                for j in 0..n {
                    h[(i, j)] += f[(k, i)] * mk[(i, j)] * f[(k, j)].conj();
                }
            }
        }
        masks.push(dominant_conj(&h, n as f64)?);
    }
    MaskSet::new(masks, n)
}

/// `A[l·n + k, p] = g_l[p]·F[k, p]`.
pub fn assemble_masked_fourier(masks: &MaskSet) -> CMatrix {
    let n = masks.n;
    let f = dft_matrix(n);
    let mut a = CMatrix::zeros(masks.m(), n);
    for (l, g) in masks.masks.iter().enumerate() {
        for k in 0..n {
            for p in 0..n {
                a[(l * n + k, p)] = g[p] * f[(k, p)];
            }
        }
    }
    a
}

/// Whether every `n`-row block of `a` equals `F_n·diag(g)` for some `g`.
pub fn is_masked_fourier(a: &CMatrix, n: usize, tol: f64) -> bool {
    if n == 0 || a.ncols() != n || a.nrows() % n != 0 {
        return false;
    }
    let f = dft_matrix(n);
    let scale = (n as f64).sqrt();
    (0..a.nrows() / n).all(|l| {
        // row 0 of F is uniform, so it exposes g directly
        let g: Vec<_> = (0..n).map(|p| a[(l * n, p)] * scale).collect();
        (0..n).all(|k| (0..n).all(|p| (a[(l * n + k, p)] - g[p] * f[(k, p)]).norm() <= tol))
    })
}
