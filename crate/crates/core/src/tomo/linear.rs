use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{single_qubit_rotation, SettingToken};
use crate::measure::CountsTensor;
use crate::model::{X_AXIS_PHASE, Y_AXIS_PHASE};
use crate::qmath::{pauli, pauli_string_from_index, ComplexMatrix};

const EXPECTATION_SLACK: f64 = 1e-6;

/// Pauli expectation values `r_m`, indexed by base-4 string index with
/// qubit 0 most significant. The identity entry is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationVector {
    n_qubits: usize,
    values: Vec<f64>,
}

impl ExpectationVector {
    pub fn new(n_qubits: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != 1 << (2 * n_qubits) {
            return Err(Error::Shape(format!("{} expectation values for {n_qubits} qubits", values.len())));
        }
        if (values[0] - 1.0).abs() > 1e-12 {
            return Err(Error::Shape(format!("identity expectation is {}, expected 1", values[0])));
        }
        if let Some(v) = values.iter().find(|v| !(v.abs() <= 1.0 + EXPECTATION_SLACK)) {
            return Err(Error::Shape(format!("expectation value {v} outside [-1, 1]")));
        }
        Ok(Self { n_qubits, values })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }
}

/// Pauli label (1..=3) and sign measured by a Z readout after the nominal
/// pre-rotation for `token`.
fn assumed_local_observable(token: SettingToken) -> (u8, f64) {
    let u = match token {
        SettingToken::I => return (3, 1.0),
        SettingToken::A1 => single_qubit_rotation(FRAC_PI_2, X_AXIS_PHASE),
        SettingToken::A2 => single_qubit_rotation(FRAC_PI_2, Y_AXIS_PHASE),
    };
    let z = pauli(3).expect("valid index");
    let observed = u.adjoint() * z * u;
    (1..=3u8)
        .map(|k| (k, (observed.clone() * pauli(k).expect("valid index")).trace().re / 2.0))
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(k, c)| (k, c.signum()))
        .expect("three candidates")
}

/// Pauli expectation values read off the counts as if every pre-rotation
/// were the ideal coupling-free pi/2 rotation about x (token `A1`) or y
/// (token `A2`).
///
/// Each outcome contributes `+-1` per measured qubit. A string measured by
/// several settings gets the average over them. Strings no setting covers
/// are set to 0 and values are clipped to `[-1, 1]`.
pub fn expectations_from_counts(counts: &CountsTensor) -> Result<ExpectationVector> {
    let n = counts.n_qubits();
    let size = 1usize << (2 * n);
    let mut sums = vec![0.0; size];
    let mut hits = vec![0usize; size];
    for (j, setting) in counts.settings().iter().enumerate() {
        let local: Vec<(u8, f64)> = setting.0.iter().map(|&t| assumed_local_observable(t)).collect();
        let freq = counts.frequencies(j);
        for subset in 1usize..(1 << n) {
            let mut index = 0;
            let mut sign = 1.0;
            for (q, &(label, s)) in local.iter().enumerate() {
                let on = subset >> (n - 1 - q) & 1 == 1;
                index = index * 4 + if on { label as usize } else { 0 };
                if on {
                    sign *= s;
                }
            }
            let value: f64 = freq
                .iter()
                .enumerate()
                .map(|(k, f)| if (k & subset).count_ones() % 2 == 0 { *f } else { -*f })
                .sum();
            sums[index] += sign * value;
            hits[index] += 1;
        }
    }
    let mut values: Vec<f64> =
        sums.iter().zip(&hits).map(|(s, &h)| if h == 0 { 0.0 } else { (s / h as f64).clamp(-1.0, 1.0) }).collect();
    values[0] = 1.0;
    ExpectationVector::new(n, values)
}

/// `rho = 2^-n sum_m r_m mu_m`. Hermitian with unit trace, not necessarily
/// positive.
pub fn linear_inversion(r: &ExpectationVector) -> ComplexMatrix {
    let n = r.n_qubits();
    let dim = 1usize << n;
    let mut rho = ComplexMatrix::zeros(dim, dim);
    for (m, &v) in r.values().iter().enumerate() {
        if v != 0.0 {
            rho += pauli_string_from_index(m, n).expect("index in range").scale(v);
        }
    }
    rho.unscale(dim as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{build_prerotation_set, modified_projectors, PrerotationOptions, PulseTemplate};
    use crate::measure::{ideal_counts, sample_counts};
    use crate::model::{AxisPair, SystemSpec};
    use crate::qmath::{hermitian_eigen, max_abs_diff, DensityMatrix, StateVector};

    fn exact(rho: &DensityMatrix) -> CountsTensor {
        let n = rho.n_qubits();
        let set = build_prerotation_set(
            &SystemSpec::uniform(n, 0.0).unwrap(),
            &PulseTemplate::standard(n),
            &vec![AxisPair::standard(); n],
            &PrerotationOptions::default(),
        )
        .unwrap();
        ideal_counts(rho, &modified_projectors(&set), 5000).unwrap()
    }

    #[test]
    fn nominal_axes() {
        assert_eq!(assumed_local_observable(SettingToken::I), (3, 1.0));
        assert_eq!(assumed_local_observable(SettingToken::A1).0, 2);
        assert_eq!(assumed_local_observable(SettingToken::A2).0, 1);
    }

    #[test]
    fn ground_state_correlators() {
        let r = expectations_from_counts(&exact(&DensityMatrix::from_pure(&StateVector::ground(2)))).unwrap();
        for (m, &v) in r.values().iter().enumerate() {
            let expect = if [0, 3, 12, 15].contains(&m) { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-12, "string {m}: {v}");
        }
    }

    #[test]
    fn bell_correlators() {
        let bell = StateVector::from_real(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        let r = expectations_from_counts(&exact(&DensityMatrix::from_pure(&bell))).unwrap();
        assert!((r.get(5) - 1.0).abs() < 1e-12);
        assert!((r.get(10) + 1.0).abs() < 1e-12);
        assert!((r.get(15) - 1.0).abs() < 1e-12);
        let rho = linear_inversion(&r);
        assert!(max_abs_diff(&rho, &bell.projector()) < 1e-12);
    }

    #[test]
    fn trace_oracle_random_state() {
        let psi = StateVector::new(vec![
            num_complex::Complex64::new(0.3, 0.1),
            num_complex::Complex64::new(-0.2, 0.5),
            num_complex::Complex64::new(0.4, -0.3),
            num_complex::Complex64::new(0.1, 0.6),
        ])
        .unwrap();
        let rho = DensityMatrix::mixture(&[
            (0.7, &DensityMatrix::from_pure(&psi)),
            (0.3, &DensityMatrix::from_pure(&StateVector::basis(4, 2).unwrap())),
        ])
        .unwrap();
        let r = expectations_from_counts(&exact(&rho)).unwrap();
        for m in 0..16 {
            let t = rho.expectation_of(&pauli_string_from_index(m, 2).unwrap()).re;
            assert!((r.get(m) - t).abs() < 1e-10, "string {m}");
        }
    }

    #[test]
    fn three_qubit_trace_oracle() {
        let ghz = StateVector::from_real(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let rho = DensityMatrix::from_pure(&ghz);
        let r = expectations_from_counts(&exact(&rho)).unwrap();
        for m in 0..64 {
            let t = rho.expectation_of(&pauli_string_from_index(m, 3).unwrap()).re;
            assert!((r.get(m) - t).abs() < 1e-10, "string {m}");
        }
    }

    #[test]
    fn maximally_mixed_from_trivial_vector() {
        let mut v = vec![0.0; 16];
        v[0] = 1.0;
        let rho = linear_inversion(&ExpectationVector::new(2, v).unwrap());
        assert!(max_abs_diff(&rho, &ComplexMatrix::identity(4, 4).unscale(4.0)) < 1e-15);
    }

    #[test]
    fn sampled_inversion_can_be_unphysical() {
        let bell = StateVector::from_real(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        let counts = exact(&DensityMatrix::from_pure(&bell));
        let mut negatives = 0;
        for seed in 0..10 {
            let rho = linear_inversion(&expectations_from_counts(&sample_counts(&counts, seed).unwrap()).unwrap());
            assert!((rho.trace().re - 1.0).abs() < 1e-12);
            assert!(crate::qmath::hermiticity_error(&rho) < 1e-12);
            if hermitian_eigen(&rho).0[0] < 0.0 {
                negatives += 1;
            }
        }
        assert!(negatives > 0);
    }

    #[test]
    fn rejects_out_of_range() {
        let mut v = vec![0.0; 4];
        v[0] = 1.0;
        v[1] = 1.5;
        assert!(ExpectationVector::new(1, v).is_err());
    }
}
