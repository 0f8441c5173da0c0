use super::{hermitian_eigen, hermitian_function, pauli_string, ComplexMatrix, DensityMatrix, StateVector};
use crate::error::{Error, Result};

const SPECTRAL_FLOOR: f64 = 1e-14;

/// Overlap `<psi|rho|psi>` with a pure target, clamped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, target: &StateVector) -> Result<f64> {
    if rho.dim() != target.dim() {
        return Err(Error::Shape(format!(
            "density matrix of dimension {} against target of dimension {}",
            rho.dim(),
            target.dim()
        )));
    }
    Ok(rho.expectation(target.amplitudes()).clamp(0.0, 1.0))
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
///
/// Reduces to [`fidelity`] when either argument is pure.
pub fn general_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Shape("fidelity between matrices of different dimension".into()));
    }
    let root = hermitian_function(rho.matrix(), |l| l.max(0.0).sqrt());
    let inner = &root * sigma.matrix() * &root;
    let (values, _) = hermitian_eigen(&inner);
    // Rounding noise on null eigenvalues would otherwise contribute ~1e-8 each.
    let tr: f64 = values.iter().filter(|&&l| l > SPECTRAL_FLOOR).map(|l| l.sqrt()).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// Trace distance `||rho - sigma||_1 / 2`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Shape("trace distance between matrices of different dimension".into()));
    }
    let diff: ComplexMatrix = rho.matrix() - sigma.matrix();
    let (values, _) = hermitian_eigen(&diff);
    Ok(0.5 * values.iter().map(|l| l.abs()).sum::<f64>())
}

/// Wootters concurrence of a two-qubit state.
///
/// The square roots of the eigenvalues of `rho (Y (x) Y) rho^* (Y (x) Y)` are
/// obtained from the Hermitian matrix `sqrt(rho) rho~ sqrt(rho)`, which has
/// the same spectrum.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::UnsupportedDimension(rho.dim()));
    }
    let yy = pauli_string(&[2, 2])?;
    let flipped = &yy * rho.matrix().map(|c| c.conj()) * &yy;
    let root = hermitian_function(rho.matrix(), |l| l.max(0.0).sqrt());
    let (values, _) = hermitian_eigen(&(&root * flipped * &root));
    let mut lambdas: Vec<f64> = values.iter().map(|l| l.max(0.0).sqrt()).collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0))
}
