use super::{kron, ComplexMatrix, C0, C1, I};
use crate::error::{Error, Result};

pub const PAULI_LABELS: [char; 4] = ['I', 'X', 'Y', 'Z'];

/// Single-qubit Pauli matrix: 0 = identity, 1 = X, 2 = Y, 3 = Z.
pub fn pauli(k: u8) -> Result<ComplexMatrix> {
    let entries = match k {
        0 => [C1, C0, C0, C1],
        1 => [C0, C1, C1, C0],
        2 => [C0, -I, I, C0],
        3 => [C1, C0, C0, -C1],
        other => return Err(Error::InvalidPauliIndex(other)),
    };
    Ok(ComplexMatrix::from_row_slice(2, 2, &entries))
}

/// Tensor product `sigma_{k0} (x) sigma_{k1} (x) ...` with qubit 0 leftmost.
pub fn pauli_string(indices: &[u8]) -> Result<ComplexMatrix> {
    let mut out = ComplexMatrix::identity(1, 1);
    for &k in indices {
        out = kron(&out, &pauli(k)?);
    }
    Ok(out)
}

/// Pauli string for a flat index in `0..4^n`, read as base-4 digits with
/// qubit 0 most significant.
pub fn pauli_string_from_index(index: usize, n_qubits: usize) -> Result<ComplexMatrix> {
    pauli_string(&pauli_digits(index, n_qubits))
}

pub(crate) fn pauli_digits(index: usize, n_qubits: usize) -> Vec<u8> {
    (0..n_qubits)
        .map(|q| ((index >> (2 * (n_qubits - 1 - q))) & 3) as u8)
        .collect()
}
