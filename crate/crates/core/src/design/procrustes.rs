use crate::error::{Error, Result};
use crate::kron::{row_wise_krp, LiftedMatrix};
use crate::linalg::{svd, CMatrix};

/// Unitary `V` minimising `‖V·target − row_wise_krp(a)‖`.
pub fn procrustes_align(a: &CMatrix, target: &LiftedMatrix) -> Result<CMatrix> {
    if a.nrows() != target.m() || a.ncols() != target.n() {
        return Err(Error::Dimension(format!(
            "matrix is {:?}, target is {}x{}^2",
            a.shape(),
            target.m(),
            target.n()
        )));
    }
    let cross = row_wise_krp(a).entries() * target.entries().adjoint();
    let dec = svd(&cross)?;
    Ok(&dec.u * dec.w.adjoint())
}
