//! Small dense kernels used by oracles and trace-space norms.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{invalid, Result};
use crate::C64;

fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// `sup ‖T x‖_{M_dst} / ‖x‖_{M_src}` for real SPD Gram matrices, via SVD.
///
/// With `M = L Lᵀ` this is the largest singular value of `L_dstᵀ T L_src⁻ᵀ`.
pub fn weighted_operator_norm(
    op: &DMatrix<C64>,
    m_src: &DMatrix<f64>,
    m_dst: &DMatrix<f64>,
) -> Result<f64> {
    if op.ncols() != m_src.nrows() || op.nrows() != m_dst.nrows() {
        return Err(invalid(format!(
            "operator is {}x{} but Gram matrices are {} and {}",
            op.nrows(),
            op.ncols(),
            m_dst.nrows(),
            m_src.nrows()
        )));
    }
    let ls = Cholesky::new(m_src.clone())
        .ok_or_else(|| invalid("source Gram matrix is not positive definite"))?
        .l();
    let ld = Cholesky::new(m_dst.clone())
        .ok_or_else(|| invalid("target Gram matrix is not positive definite"))?
        .l();
    let ls_inv_t = ls
        .transpose()
        .try_inverse()
        .ok_or_else(|| invalid("singular Cholesky factor"))?;
    let b = to_complex(&ld.transpose()) * op * to_complex(&ls_inv_t);
    if b.is_empty() {
        return Ok(0.0);
    }
    let sv = b.singular_values();
    Ok(sv.iter().cloned().fold(0.0, f64::max))
}

/// Largest eigenvalue magnitude of a Hermitian matrix.
pub fn hermitian_spectral_radius(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
}
