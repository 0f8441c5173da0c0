//! Dense complex linear algebra on small Hilbert spaces.
//!
//! Everything here is sized for a handful of qubits (dimension at most 16),
//! so all operators are stored as dense `nalgebra` matrices.

mod cholesky;
mod metrics;
mod pauli;
mod physical;
mod state;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use cholesky::{params_from_rho, rho_from_params, CholeskyParams};
pub(crate) use cholesky::{lower_from_slice, pack_lower_gradient};
pub use metrics::{concurrence, fidelity, general_fidelity, trace_distance};
pub use pauli::{pauli, pauli_string, pauli_string_from_index, PAULI_LABELS};
pub use physical::{project_to_physical, PhysicalProjection};
pub use state::{DensityMatrix, MatrixRepr, StateVector};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Tolerance below which a matrix is accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-8;

pub(crate) const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub(crate) const C1: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub(crate) const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Maximum entrywise deviation `max |M - M^dagger|`.
pub fn hermiticity_error(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `max |a_ij - b_ij|`.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Unitarity defect `max |U^dagger U - I|`.
pub fn unitarity_error(u: &ComplexMatrix) -> f64 {
    let n = u.nrows();
    max_abs_diff(&(u.adjoint() * u), &ComplexMatrix::identity(n, n))
}

/// Number of qubits for a power-of-two dimension.
pub fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::UnsupportedDimension(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Eigen-decomposition of a Hermitian matrix.
///
/// Eigenvalues come back in ascending order with eigenvectors as the
/// matching columns. The input is symmetrized first; callers are expected to
/// have checked Hermiticity.
pub fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n = m.nrows();
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Rebuild `V diag(f(lambda)) V^dagger` from a Hermitian eigen-decomposition.
pub(crate) fn hermitian_function(m: &ComplexMatrix, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let n = m.nrows();
    let mut scaled = vectors.clone();
    for (k, &v) in values.iter().enumerate() {
        let s = f(v);
        for i in 0..n {
            scaled[(i, k)] *= s;
        }
    }
    scaled * vectors.adjoint()
}

/// Real part of `v^dagger M v`.
pub fn quadratic_form(m: &ComplexMatrix, v: &ComplexVector) -> Complex64 {
    (v.adjoint() * m * v)[(0, 0)]
}
