use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{sequence_propagator, Integrator, PulseTemplate};
use crate::model::{PulseSpec, SystemSpec, X_AXIS_PHASE, Y_AXIS_PHASE};
use crate::qmath::{fidelity, general_fidelity, DensityMatrix, StateVector};

/// One step of a state-preparation recipe. Qubits are 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateToken {
    PiY(usize),
    Pi2Y(usize),
    Pi2X(usize),
    /// Free evolution, seconds.
    Wait(f64),
    /// Free evolution for `pi / |J_01|`, a controlled phase on `|ee>`.
    WaitZzPi,
}

impl fmt::Display for GateToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateToken::PiY(q) => write!(f, "pi_y({q})"),
            GateToken::Pi2Y(q) => write!(f, "pi2_y({q})"),
            GateToken::Pi2X(q) => write!(f, "pi2_x({q})"),
            GateToken::Wait(t) => write!(f, "wait({})", (t * 1e15).round() / 1e6),
            GateToken::WaitZzPi => f.write_str("wait_zz_pi"),
        }
    }
}

impl FromStr for GateToken {
    type Err = Error;

    /// Parses `pi_y(q)`, `pi2_y(q)`, `pi2_x(q)`, `wait(ns)` and `wait_zz_pi`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "wait_zz_pi" {
            return Ok(GateToken::WaitZzPi);
        }
        let bad = || Error::Config(format!("unrecognized preparation token {s:?}"));
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let arg = rest.strip_suffix(')').ok_or_else(bad)?.trim();
        let qubit = || arg.parse::<usize>().map_err(|_| bad());
        match name.trim() {
            "pi_y" => Ok(GateToken::PiY(qubit()?)),
            "pi2_y" => Ok(GateToken::Pi2Y(qubit()?)),
            "pi2_x" => Ok(GateToken::Pi2X(qubit()?)),
            "wait" => {
                let ns: f64 = arg.parse().map_err(|_| bad())?;
                if !(ns >= 0.0) {
                    return Err(bad());
                }
                Ok(GateToken::Wait(ns * 1e-9))
            }
            _ => Err(bad()),
        }
    }
}

/// Gate tokens applied in order from the all-ground state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct PreparationSpec(pub Vec<GateToken>);

impl TryFrom<Vec<String>> for PreparationSpec {
    type Error = Error;

    fn try_from(v: Vec<String>) -> Result<Self> {
        v.iter().map(|s| s.parse()).collect::<Result<Vec<_>>>().map(PreparationSpec)
    }
}

impl From<PreparationSpec> for Vec<String> {
    fn from(p: PreparationSpec) -> Self {
        p.0.iter().map(ToString::to_string).collect()
    }
}

/// Evolves `|g...g>` through the recipe under the coupled Hamiltonian.
///
/// The recipe is laid out back to back so that it ends at `t = 0`, where
/// tomography begins. Rotation pulses take their shape and duration from
/// `template` for the addressed qubit, with the amplitude calibrated to the
/// gate angle.
pub fn prepare_state(spec: &PreparationSpec, system: &SystemSpec, template: &PulseTemplate) -> Result<StateVector> {
    let n = system.n_qubits();
    let mut segments = Vec::with_capacity(spec.0.len());
    for token in &spec.0 {
        let seg = match *token {
            GateToken::PiY(q) | GateToken::Pi2Y(q) | GateToken::Pi2X(q) => {
                if q >= n {
                    return Err(Error::Config(format!("token {token} addresses qubit {q} of {n}")));
                }
                let (angle, phase) = match token {
                    GateToken::PiY(_) => (PI, Y_AXIS_PHASE),
                    GateToken::Pi2Y(_) => (FRAC_PI_2, Y_AXIS_PHASE),
                    _ => (FRAC_PI_2, X_AXIS_PHASE),
                };
                (Some((q, angle, phase)), template.qubits[q].duration)
            }
            GateToken::Wait(t) => (None, t),
            GateToken::WaitZzPi => {
                let j = if n >= 2 { system.coupling(0, 1) } else { 0.0 };
                if j == 0.0 {
                    return Err(Error::UndefinedWait);
                }
                (None, PI / j.abs())
            }
        };
        segments.push(seg);
    }
    let mut t = -segments.iter().map(|s| s.1).sum::<f64>();
    let mut pulses = Vec::new();
    for (gate, duration) in segments {
        if let Some((q, angle, phase)) = gate {
            pulses.push(PulseSpec::rotation(q, template.qubits[q].shape, angle, duration, phase, t)?);
        }
        t += duration;
    }
    let u = sequence_propagator(system, &pulses, Integrator::default(), true)?;
    StateVector::ground(n).evolve(&u)
}

/// A reference state: pure states use the overlap fidelity, mixed ones the
/// Uhlmann fidelity.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl Target {
    pub fn density(&self) -> DensityMatrix {
        match self {
            Target::Pure(psi) => DensityMatrix::from_pure(psi),
            Target::Mixed(rho) => rho.clone(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            Target::Pure(psi) => psi.n_qubits(),
            Target::Mixed(rho) => rho.n_qubits(),
        }
    }

    pub fn fidelity(&self, rho: &DensityMatrix) -> Result<f64> {
        match self {
            Target::Pure(psi) => fidelity(rho, psi),
            Target::Mixed(sigma) => general_fidelity(rho, sigma),
        }
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn uniform_superposition(n: usize) -> StateVector {
    StateVector::from_real(&vec![1.0; 1 << n]).expect("nonzero")
}

fn cat(n: usize) -> StateVector {
    let mut v = vec![0.0; 1 << n];
    v[0] = 1.0;
    v[(1 << n) - 1] = 1.0;
    StateVector::from_real(&v).expect("nonzero")
}

/// Names accepted by [`named_state`].
pub const STATE_NAMES: [&str; 9] = ["product", "bell", "mixed", "gg_ge", "psi_a", "psi_b", "product3", "ghz3", "mixed3"];

/// Resolves a named reference state for `system`.
///
/// * `product`: `(|g> + |e>)^n / 2^(n/2)`; `product3` is the three-qubit case.
/// * `bell`: `(|g..g> + |e..e>) / sqrt(2)`; `ghz3` is the three-qubit case.
/// * `mixed`: `0.8 product + 0.2 bell` (two qubits).
/// * `mixed3`: `0.8 |a><a| + 0.2 |b><b|` with
///   `|a> = (|ggg> - |gge> + i|geg> + |gee> + |egg>) / sqrt(5)` and
///   `|b> = (|egg> + i|ege> - |eeg> + |eee>) / 2`.
/// * `gg_ge`: `(|gg> + |ge>) / sqrt(2)`.
/// * `psi_a`: `pi2_y(0), pi2_y(1)` under the coupled Hamiltonian.
/// * `psi_b`: `psi_a` followed by `wait_zz_pi`.
pub fn named_state(name: &str, system: &SystemSpec, template: &PulseTemplate) -> Result<Target> {
    let n = system.n_qubits();
    let need = |k: usize| {
        if n == k {
            Ok(())
        } else {
            Err(Error::Config(format!("state {name:?} needs {k} qubits, system has {n}")))
        }
    };
    let recipe = |tokens: &[&str]| -> Result<Target> {
        let spec = PreparationSpec::try_from(tokens.iter().map(|s| s.to_string()).collect::<Vec<_>>())?;
        Ok(Target::Pure(prepare_state(&spec, system, template)?))
    };
    match name {
        "product" => Ok(Target::Pure(uniform_superposition(n))),
        "bell" | "ghz" => {
            if n < 2 {
                return Err(Error::Config(format!("state {name:?} needs at least two qubits")));
            }
            Ok(Target::Pure(cat(n)))
        }
        "product3" => need(3).map(|_| Target::Pure(uniform_superposition(3))),
        "ghz3" => need(3).map(|_| Target::Pure(cat(3))),
        "mixed" => {
            need(2)?;
            let rho = DensityMatrix::mixture(&[
                (0.8, &DensityMatrix::from_pure(&uniform_superposition(2))),
                (0.2, &DensityMatrix::from_pure(&cat(2))),
            ])?;
            Ok(Target::Mixed(rho))
        }
        "mixed3" => {
            need(3)?;
            let o = c(0.0, 0.0);
            let a = StateVector::new(vec![c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(1.0, 0.0), c(1.0, 0.0), o, o, o])?;
            let b = StateVector::new(vec![o, o, o, o, c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(1.0, 0.0)])?;
            let rho = DensityMatrix::mixture(&[(0.8, &DensityMatrix::from_pure(&a)), (0.2, &DensityMatrix::from_pure(&b))])?;
            Ok(Target::Mixed(rho))
        }
        "gg_ge" => need(2).map(|_| Target::Pure(StateVector::from_real(&[1.0, 1.0, 0.0, 0.0]).expect("nonzero"))),
        "psi_a" => {
            need(2)?;
            recipe(&["pi2_y(0)", "pi2_y(1)"])
        }
        "psi_b" => {
            need(2)?;
            recipe(&["pi2_y(0)", "pi2_y(1)", "wait_zz_pi"])
        }
        other => Err(Error::Config(format!("unknown state {other:?}; known: {}", STATE_NAMES.join(", ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mhz_to_angular;
    use crate::qmath::concurrence;

    fn psi_a(j_mhz: f64) -> StateVector {
        match named_state("psi_a", &SystemSpec::two_qubit(mhz_to_angular(j_mhz)), &PulseTemplate::standard(2)).unwrap() {
            Target::Pure(psi) => psi,
            Target::Mixed(_) => unreachable!(),
        }
    }

    #[test]
    fn token_roundtrip() {
        for s in ["pi_y(1)", "pi2_y(0)", "pi2_x(2)", "wait(100)", "wait_zz_pi"] {
            assert_eq!(s.parse::<GateToken>().unwrap().to_string(), s);
        }
        assert!("pi_z(0)".parse::<GateToken>().is_err());
        assert!("wait(-3)".parse::<GateToken>().is_err());
    }

    #[test]
    fn empty_recipe_is_ground() {
        let psi = prepare_state(&PreparationSpec::default(), &SystemSpec::two_qubit(1e7), &PulseTemplate::standard(2)).unwrap();
        assert_eq!(psi, StateVector::ground(2));
    }

    #[test]
    fn uncoupled_psi_a_is_product() {
        let psi = psi_a(0.0);
        for a in psi.amplitudes().iter() {
            assert!((a - c(0.5, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn psi_a_matches_reference_amplitudes() {
        let psi = psi_a(-4.37);
        let expect = [c(0.5, 0.0), c(0.5, 0.0), c(0.530, 0.085), c(0.355, -0.292)];
        for (a, e) in psi.amplitudes().iter().zip(expect) {
            assert!((a - e).norm() < 5e-3, "{a} vs {e}");
        }
        let conc = concurrence(&DensityMatrix::from_pure(&psi)).unwrap();
        assert!((conc - 0.415).abs() < 0.005);
    }

    #[test]
    fn wait_flips_doubly_excited_sign() {
        let system = SystemSpec::two_qubit(mhz_to_angular(-4.37));
        let template = PulseTemplate::standard(2);
        let Target::Pure(b) = named_state("psi_b", &system, &template).unwrap() else { unreachable!() };
        let a = psi_a(-4.37);
        for k in 0..3 {
            assert!((a.amplitudes()[k] - b.amplitudes()[k]).norm() < 1e-9);
        }
        assert!((a.amplitudes()[3] + b.amplitudes()[3]).norm() < 1e-9);
    }

    #[test]
    fn wait_requires_coupling() {
        let spec = PreparationSpec(vec![GateToken::WaitZzPi]);
        assert!(matches!(
            prepare_state(&spec, &SystemSpec::two_qubit(0.0), &PulseTemplate::standard(2)),
            Err(Error::UndefinedWait)
        ));
    }

    #[test]
    fn pi_pulse_excites() {
        let spec: PreparationSpec = serde_json::from_str(r#"["pi_y(0)"]"#).unwrap();
        let psi = prepare_state(&spec, &SystemSpec::two_qubit(mhz_to_angular(-4.37)), &PulseTemplate::standard(2)).unwrap();
        assert!((psi.amplitudes()[2].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn named_states_are_normalized() {
        let two = SystemSpec::two_qubit(mhz_to_angular(-4.37));
        let three = SystemSpec::uniform(3, mhz_to_angular(-2.0)).unwrap();
        for name in STATE_NAMES {
            let system = if name.ends_with('3') { &three } else { &two };
            let t = named_state(name, system, &PulseTemplate::standard(system.n_qubits())).unwrap();
            assert!((t.density().matrix().trace().re - 1.0).abs() < 1e-12, "{name}");
        }
        assert!(named_state("nope", &two, &PulseTemplate::standard(2)).is_err());
        assert!(named_state("ghz3", &two, &PulseTemplate::standard(2)).is_err());
    }
}
