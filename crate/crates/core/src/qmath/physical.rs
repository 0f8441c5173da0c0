use super::{hermitian_eigen, hermiticity_error, ComplexMatrix, DensityMatrix, HERMITIAN_TOL};
use crate::error::{Error, Result};

/// Outcome of [`project_to_physical`].
#[derive(Debug, Clone)]
pub struct PhysicalProjection {
    pub rho: DensityMatrix,
    /// Set when no eigenvalue was positive; `rho` is then maximally mixed.
    pub degenerate: bool,
}

/// Clips negative eigenvalues of a Hermitian matrix and renormalizes the
/// trace, producing a valid density matrix.
pub fn project_to_physical(m: &ComplexMatrix) -> Result<PhysicalProjection> {
    if !m.is_square() {
        return Err(Error::Shape(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    let herm = hermiticity_error(m);
    if herm > HERMITIAN_TOL {
        return Err(Error::NotHermitian(herm));
    }
    let n = m.nrows();
    let (values, vectors) = hermitian_eigen(m);
    let clipped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        log::warn!("projection input has no positive eigenvalue; returning the maximally mixed state");
        return Ok(PhysicalProjection { rho: DensityMatrix::maximally_mixed(n), degenerate: true });
    }
    let mut scaled = vectors.clone();
    for (k, &v) in clipped.iter().enumerate() {
        for i in 0..n {
            scaled[(i, k)] *= v / total;
        }
    }
    let out = scaled * vectors.adjoint();
    let out = (&out + out.adjoint()).scale(0.5);
    Ok(PhysicalProjection { rho: DensityMatrix::from_matrix_unchecked(out), degenerate: false })
}
