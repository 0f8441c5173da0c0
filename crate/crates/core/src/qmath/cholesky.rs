//! Unconstrained real parametrization of density matrices.
//!
//! A lower-triangular complex `T` is packed into `4^n` reals: the `2^n` real
//! diagonal entries first, then the strictly-lower entries in row-major order
//! as interleaved (real, imaginary) pairs. The state is
//! `rho = T^dagger T / Tr(T^dagger T)`, which is positive semidefinite with
//! unit trace for every nonzero parameter vector.

use nalgebra::Cholesky;
use num_complex::Complex64;

use super::{qubits_for_dim, ComplexMatrix, DensityMatrix};
use crate::error::{Error, Result};

const RANK_REGULARIZER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyParams {
    dim: usize,
    values: Vec<f64>,
}

impl CholeskyParams {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        qubits_for_dim(dim)?;
        if values.len() != dim * dim {
            return Err(Error::Shape(format!(
                "{} parameters for dimension {dim}, expected {}",
                values.len(),
                dim * dim
            )));
        }
        Ok(Self { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Unpacks the lower-triangular factor `T`.
    pub fn lower_factor(&self) -> ComplexMatrix {
        lower_from_slice(self.dim, &self.values)
    }

    pub fn from_lower(t: &ComplexMatrix) -> Self {
        let dim = t.nrows();
        let mut values = Vec::with_capacity(dim * dim);
        values.extend((0..dim).map(|i| t[(i, i)].re));
        for i in 0..dim {
            for j in 0..i {
                values.push(t[(i, j)].re);
                values.push(t[(i, j)].im);
            }
        }
        Self { dim, values }
    }
}

pub(crate) fn lower_from_slice(dim: usize, values: &[f64]) -> ComplexMatrix {
    let mut t = ComplexMatrix::zeros(dim, dim);
    for i in 0..dim {
        t[(i, i)] = Complex64::new(values[i], 0.0);
    }
    let mut k = dim;
    for i in 0..dim {
        for j in 0..i {
            t[(i, j)] = Complex64::new(values[k], values[k + 1]);
            k += 2;
        }
    }
    t
}

/// Packs a complex gradient `G` (real part = d/dRe T, imaginary part =
/// d/dIm T) into the parameter layout, keeping only the lower triangle.
pub(crate) fn pack_lower_gradient(g: &ComplexMatrix, out: &mut [f64]) {
    let dim = g.nrows();
    for i in 0..dim {
        out[i] = g[(i, i)].re;
    }
    let mut k = dim;
    for i in 0..dim {
        for j in 0..i {
            out[k] = g[(i, j)].re;
            out[k + 1] = g[(i, j)].im;
            k += 2;
        }
    }
}

/// `T^dagger T / Tr(T^dagger T)`.
pub fn rho_from_params(p: &CholeskyParams) -> Result<DensityMatrix> {
    let norm2: f64 = p.values.iter().map(|v| v * v).sum();
    if !(norm2 > 0.0) {
        return Err(Error::DegenerateParams);
    }
    let t = p.lower_factor();
    let rho = t.adjoint() * &t;
    let rho = (&rho + rho.adjoint()).scale(0.5 / norm2);
    Ok(DensityMatrix::from_matrix_unchecked(rho))
}

/// Inverse of [`rho_from_params`] up to the rank regularization.
///
/// Rank-deficient inputs are regularized by `1e-12 * I` and renormalized
/// before factorizing.
pub fn params_from_rho(rho: &DensityMatrix) -> Result<CholeskyParams> {
    let dim = rho.dim();
    let reg = (rho.matrix() + ComplexMatrix::identity(dim, dim).scale(RANK_REGULARIZER))
        .unscale(1.0 + dim as f64 * RANK_REGULARIZER);
    // rho = T^dagger T with T lower triangular is the Cholesky factorization
    // of the index-reversed matrix: J rho J = L L^dagger gives T = (J L J)^dagger.
    let reversed = ComplexMatrix::from_fn(dim, dim, |i, j| reg[(dim - 1 - i, dim - 1 - j)]);
    let chol = Cholesky::new(reversed)
        .ok_or_else(|| Error::InvalidDensityMatrix("Cholesky factorization failed".into()))?;
    let l = chol.l();
    let t = ComplexMatrix::from_fn(dim, dim, |i, j| l[(dim - 1 - j, dim - 1 - i)].conj());
    Ok(CholeskyParams::from_lower(&t))
}
