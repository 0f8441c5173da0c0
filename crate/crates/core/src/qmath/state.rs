use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{hermitian_eigen, hermiticity_error, qubits_for_dim, ComplexMatrix, ComplexVector, C1};
use crate::error::{Error, Result};

const DENSITY_TOL: f64 = 1e-10;

/// Normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: ComplexVector,
}

impl StateVector {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        Self::from_vector(ComplexVector::from_vec(amplitudes))
    }

    pub fn from_vector(v: ComplexVector) -> Result<Self> {
        qubits_for_dim(v.len())?;
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(Self { amplitudes: v.unscale(norm) })
    }

    /// Real amplitudes, normalized.
    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// Computational basis state `|k>`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        qubits_for_dim(dim)?;
        if k >= dim {
            return Err(Error::Shape(format!("basis index {k} out of range for dimension {dim}")));
        }
        let mut v = ComplexVector::zeros(dim);
        v[k] = C1;
        Ok(Self { amplitudes: v })
    }

    /// `|g...g>` on `n_qubits` qubits.
    pub fn ground(n_qubits: usize) -> Self {
        Self::basis(1 << n_qubits, 0).expect("power-of-two dimension")
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    pub fn into_vector(self) -> ComplexVector {
        self.amplitudes
    }

    pub fn projector(&self) -> ComplexMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    /// Applies a unitary and renormalizes away rounding drift.
    pub fn evolve(&self, u: &ComplexMatrix) -> Result<Self> {
        if u.ncols() != self.dim() {
            return Err(Error::Shape(format!(
                "operator of size {} applied to state of dimension {}",
                u.ncols(),
                self.dim()
            )));
        }
        Self::from_vector(u * &self.amplitudes)
    }

    /// Multiplies by `exp(i theta)`.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let phase = Complex64::from_polar(1.0, theta);
        Self { amplitudes: self.amplitudes.map(|a| a * phase) }
    }
}

/// Hermitian, positive-semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity to 1e-10.
    pub fn from_matrix(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Shape(format!("{}x{} is not square", matrix.nrows(), matrix.ncols())));
        }
        qubits_for_dim(matrix.nrows())?;
        let herm = hermiticity_error(&matrix);
        if herm >= DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!("Hermiticity defect {herm:.3e}")));
        }
        let trace = matrix.trace();
        if (trace - C1).norm() > DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {trace}")));
        }
        let (values, _) = hermitian_eigen(&matrix);
        if values[0] < -DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!("eigenvalue {:.3e}", values[0])));
        }
        Ok(Self { matrix })
    }

    /// Skips validation. Callers must guarantee the invariants.
    pub(crate) fn from_matrix_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn from_pure(state: &StateVector) -> Self {
        Self { matrix: state.projector() }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(dim, dim).unscale(dim as f64) }
    }

    /// Convex combination of density matrices. Weights must be nonnegative
    /// and are renormalized to sum to one.
    pub fn mixture(components: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidDensityMatrix("empty mixture".into()))?;
        let dim = first.1.dim();
        let total: f64 = components.iter().map(|(w, _)| *w).sum();
        if components.iter().any(|(w, _)| *w < 0.0) || !(total > 0.0) {
            return Err(Error::InvalidDensityMatrix("mixture weights must be nonnegative".into()));
        }
        let mut acc = ComplexMatrix::zeros(dim, dim);
        for (w, rho) in components {
            if rho.dim() != dim {
                return Err(Error::Shape("mixture components differ in dimension".into()));
            }
            acc += rho.matrix.scale(*w / total);
        }
        Ok(Self { matrix: acc })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    /// `<v|rho|v>`; real for Hermitian rho.
    pub fn expectation(&self, v: &ComplexVector) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let n = self.dim();
        for i in 0..n {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..n {
                row += self.matrix[(i, j)] * v[j];
            }
            acc += v[i].conj() * row;
        }
        acc.re
    }

    /// `Tr(rho O)`.
    pub fn expectation_of(&self, op: &ComplexMatrix) -> Complex64 {
        (&self.matrix * op).trace()
    }

    /// Unitary conjugation `U rho U^dagger`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        Self { matrix: u * &self.matrix * u.adjoint() }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.matrix).0
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }
}

/// JSON form of a complex matrix: parallel real and imaginary row arrays.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixRepr {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&ComplexMatrix> for MatrixRepr {
    fn from(m: &ComplexMatrix) -> Self {
        let rows = |f: fn(&Complex64) -> f64| {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
        };
        Self { re: rows(|c| c.re), im: rows(|c| c.im) }
    }
}

impl TryFrom<&MatrixRepr> for ComplexMatrix {
    type Error = Error;

    fn try_from(r: &MatrixRepr) -> Result<Self> {
        let n = r.re.len();
        let cols = r.re.first().map_or(0, Vec::len);
        if r.im.len() != n
            || r.re.iter().chain(r.im.iter()).any(|row| row.len() != cols)
        {
            return Err(Error::Shape("ragged matrix in JSON".into()));
        }
        Ok(ComplexMatrix::from_fn(n, cols, |i, j| Complex64::new(r.re[i][j], r.im[i][j])))
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRepr::from(&self.matrix).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(d)?;
        let m = ComplexMatrix::try_from(&repr).map_err(serde::de::Error::custom)?;
        DensityMatrix::from_matrix(m).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_on_construction() {
        let s = StateVector::from_real(&[3.0, 4.0]).unwrap();
        assert!((s.amplitudes().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_vector_rejected() {
        assert!(matches!(StateVector::from_real(&[0.0, 0.0]), Err(Error::ZeroNorm)));
    }

    #[test]
    fn non_power_of_two_rejected() {
        assert!(StateVector::from_real(&[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn validates_density_invariants() {
        let mut m = ComplexMatrix::identity(2, 2).scale(0.5);
        assert!(DensityMatrix::from_matrix(m.clone()).is_ok());
        m[(0, 0)] = Complex64::new(1.2, 0.0);
        m[(1, 1)] = Complex64::new(-0.2, 0.0);
        assert!(DensityMatrix::from_matrix(m).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let s = StateVector::new(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]).unwrap();
        let rho = DensityMatrix::from_pure(&s);
        let text = serde_json::to_string(&rho).unwrap();
        let back: DensityMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rho);
    }
}
