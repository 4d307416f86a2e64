//! Lifting machinery: vec/unvec, Kronecker and row-wise Khatri-Rao
//! products, the selection matrix, and the maps `u ↦ u ⊗ u*` and back.
//!
//! Indices follow column-major stacking: `vec(M)[j*n + i] = M[(i, j)]`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{ensure_square, svd, CMatrix, CVector, ZERO};

pub use crate::linalg::hermitian_part;

/// Complex m×n² matrix acting on lifted signals `u ⊗ u*`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedMatrix {
    entries: CMatrix,
    n: usize,
}

impl LiftedMatrix {
    pub fn new(entries: CMatrix, n: usize) -> Result<Self> {
        if n == 0 || entries.ncols() != n * n || entries.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "lifted matrix needs n² = {} columns, got {}x{}",
                n * n,
                entries.nrows(),
                entries.ncols()
            )));
        }
        crate::linalg::ensure_finite_matrix(&entries, "lifted matrix")?;
        Ok(LiftedMatrix { entries, n })
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        LiftedMatrix {
            entries: CMatrix::zeros(m, n * n),
            n,
        }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    /// SOI dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of observations.
    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    /// Row `k` as an n²-vector (no conjugation).
    pub fn row_vector(&self, k: usize) -> CVector {
        self.entries.row(k).transpose()
    }

    /// `V · self` for an m×m matrix `V`.
    pub fn left_multiply(&self, v: &CMatrix) -> Result<LiftedMatrix> {
        if v.ncols() != self.m() {
            return Err(Error::Dimension(format!(
                "left factor has {} columns, lifted matrix has {} rows",
                v.ncols(),
                self.m()
            )));
        }
        LiftedMatrix::new(v * &self.entries, self.n)
    }

    pub fn frobenius(&self) -> f64 {
        crate::linalg::frob(&self.entries)
    }
}

/// The m×m² 0/1 matrix with a one at `(k, k*m + k)` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionMatrix {
    m: usize,
}

impl SelectionMatrix {
    pub fn new(m: usize) -> Self {
        SelectionMatrix { m }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    /// Column index of the single one in row `k`.
    pub fn column_of(&self, k: usize) -> usize {
        k * self.m + k
    }

    pub fn to_dense(&self) -> CMatrix {
        let m = self.m;
        let mut s = CMatrix::zeros(m, m * m);
        for k in 0..m {
            s[(k, self.column_of(k))] = Complex64::new(1.0, 0.0);
        }
        s
    }

    /// `S · M` without materialising `S`.
    pub fn apply(&self, m: &CMatrix) -> Result<CMatrix> {
        if m.nrows() != self.m * self.m {
            return Err(Error::Dimension(format!(
                "selection of size {} needs {} rows, got {}",
                self.m,
                self.m * self.m,
                m.nrows()
            )));
        }
        Ok(CMatrix::from_fn(self.m, m.ncols(), |k, j| {
            m[(self.column_of(k), j)]
        }))
    }
}

/// Stack the columns of a square matrix.
pub fn vec(m: &CMatrix) -> Result<CVector> {
    ensure_square(m)?;
    Ok(CVector::from_column_slice(m.as_slice()))
}

/// Inverse of [`vec`].
pub fn unvec(x: &CVector, n: usize) -> Result<CMatrix> {
    if x.len() != n * n {
        return Err(Error::Dimension(format!(
            "unvec expects {} entries for n = {}, got {}",
            n * n,
            n,
            x.len()
        )));
    }
    Ok(CMatrix::from_column_slice(n, n, x.as_slice()))
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let mut out = CVector::zeros(a.len() * b.len());
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// Row-wise Khatri-Rao product of `A` with `conj(A)`:
/// `Ã[p, k*n + l] = A[p,k] · conj(A[p,l])`.
pub fn row_wise_krp(a: &CMatrix) -> LiftedMatrix {
    let (m, n) = a.shape();
    let entries = CMatrix::from_fn(m, n * n, |p, col| {
        let (k, l) = (col / n, col % n);
        a[(p, k)] * a[(p, l)].conj()
    });
    LiftedMatrix { entries, n }
}

/// `u ⊗ conj(u)`.
pub fn lift_signal(u: &CVector) -> CVector {
    kron_vec(u, &u.conjugate())
}

/// Default relative tolerance on the second singular value in [`unlift_signal`].
pub const RANK_ONE_TOL: f64 = 1e-8;

/// Recover `u` (up to global phase) from `x = u ⊗ u*`.
///
/// `unvec(x)ᵀ = u uᴴ` must be numerically rank-one PSD; the returned vector
/// has its largest-magnitude entry real and positive.
pub fn unlift_signal(x: &CVector) -> Result<CVector> {
    let n = (x.len() as f64).sqrt().round() as usize;
    if n * n != x.len() || n == 0 {
        return Err(Error::Dimension(format!(
            "lifted vector length {} is not a perfect square",
            x.len()
        )));
    }
    let outer = unvec(x, n)?.transpose();
    let dec = svd(&outer)?;
    let s1 = dec.singular_values[0];
    let s2 = dec.singular_values.get(1).copied().unwrap_or(0.0);
    if s1 == 0.0 || s2 > RANK_ONE_TOL * s1 {
        return Err(Error::NotRankOne {
            first_singular_value: s1,
            second_singular_value: s2,
        });
    }
    let w = dec.u.column(0).into_owned();
    // M ≈ σ₁ w zᴴ; PSD rank one needs z = w.
    let align = dec.w.column(0).dotc(&w);
    if align.re < 1.0 - 1e-6 {
        return Err(Error::NotRankOne {
            first_singular_value: s1,
            second_singular_value: s2,
        });
    }
    let mut u = w.scale(s1.sqrt());
    crate::linalg::fix_phase(&mut u);
    Ok(u)
}

/// `row_wise_krp(A) · q` without forming the m×n² matrix.
///
/// With `Q = unvec(q)`, entry p equals `Σ_{k,l} A[p,k] Q[l,k] conj(A[p,l])`.
pub fn apply_lifted_fast(a: &CMatrix, q: &CVector) -> Result<CVector> {
    let (m, n) = a.shape();
    let qm = unvec(q, n)?;
    let b = a * qm.transpose();
    Ok(CVector::from_fn(m, |p, _| {
        (0..n).fold(ZERO, |acc, l| acc + b[(p, l)] * a[(p, l)].conj())
    }))
}
