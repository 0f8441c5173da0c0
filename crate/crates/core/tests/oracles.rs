//! Propagators checked against a piecewise-constant Hamiltonian in the frame
//! rotating at the bare qubit frequencies, exponentiated by eigendecomposition.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use cct::evolve::{numeric_propagator, sequence_propagator, Integrator};
use cct::model::{coupling_hamiltonian, mhz_to_angular, PulseSpec, ShapeKind, SystemSpec};
use cct::qmath::{hermitian_eigen, max_abs_diff, ComplexMatrix};

fn expm_hermitian(h: &ComplexMatrix, dt: f64) -> ComplexMatrix {
    let (values, vectors) = hermitian_eigen(h);
    let phases = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|&l| Complex64::from_polar(1.0, -l * dt)),
    ));
    &vectors * phases * vectors.adjoint()
}

/// Interaction-frame propagator from a time-independent Hamiltonian per
/// stretch between pulse edges.
fn oracle(spec: &SystemSpec, pulses: &[PulseSpec], t0: f64, t1: f64) -> ComplexMatrix {
    let dim = spec.dim();
    let n = spec.n_qubits();
    let d = -coupling_hamiltonian(spec);
    let mut edges = vec![t0, t1];
    for p in pulses {
        edges.extend([p.start, p.end()]);
    }
    edges.retain(|&t| t >= t0 && t <= t1);
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut u = ComplexMatrix::identity(dim, dim);
    for w in edges.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let mut h = d.clone();
        for p in pulses.iter().filter(|p| p.start <= mid && mid <= p.end()) {
            let bit = 1 << (n - 1 - p.qubit);
            for c in (0..dim).filter(|c| c & bit == 0) {
                let up = Complex64::new(0.0, 0.5 * p.amplitude) * Complex64::from_polar(1.0, p.phase);
                h[(c | bit, c)] += up;
                h[(c, c | bit)] += up.conj();
            }
        }
        u = expm_hermitian(&h, w[1] - w[0]) * u;
    }
    let frame = |t: f64| ComplexMatrix::from_diagonal(&d.diagonal().map(|e| Complex64::from_polar(1.0, e.re * t)));
    frame(t1) * u * frame(-t0)
}

fn random_rect(rng: &mut ChaCha20Rng, qubit: usize, start: f64) -> PulseSpec {
    let angle = rng.random_range(0.2..PI);
    let duration = rng.random_range(10e-9..80e-9);
    let phase = rng.random_range(-PI..PI);
    PulseSpec::rotation(qubit, ShapeKind::Rectangular, angle, duration, phase, start).unwrap()
}

#[test]
fn two_qubit_sequences_match_constant_hamiltonian() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for _ in 0..20 {
        let spec = SystemSpec::two_qubit(mhz_to_angular(rng.random_range(-10.0..10.0)));
        let t0 = rng.random_range(-150e-9..50e-9);
        let first = rng.random_range(0..2);
        let p0 = random_rect(&mut rng, first, t0);
        let gap = rng.random_range(0.0..30e-9);
        let p1 = random_rect(&mut rng, 1 - first, p0.end() + gap);
        let pulses = [p0, p1];
        let t1 = pulses[1].end();
        let want = oracle(&spec, &pulses, t0, t1);
        let numeric = numeric_propagator(&spec, &pulses, t0, t1, Integrator::default()).unwrap();
        assert!(max_abs_diff(&numeric, &want) < 1e-8);
        let analytic = sequence_propagator(&spec, &pulses, Integrator::default(), true).unwrap();
        // The sequence helper spans first start to last end, as does the oracle.
        assert!(max_abs_diff(&analytic, &want) < 1e-8);
    }
}

#[test]
fn simultaneous_drives_match_constant_hamiltonian() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    for _ in 0..10 {
        let spec = SystemSpec::two_qubit(mhz_to_angular(rng.random_range(-10.0..10.0)));
        let p0 = random_rect(&mut rng, 0, 0.0);
        let offset = rng.random_range(0.0..40e-9);
        let p1 = random_rect(&mut rng, 1, offset);
        let t1 = p0.end().max(p1.end());
        let pulses = [p0, p1];
        let numeric = numeric_propagator(&spec, &pulses, 0.0, t1, Integrator::default()).unwrap();
        assert!(max_abs_diff(&numeric, &oracle(&spec, &pulses, 0.0, t1)) < 1e-8);
    }
}

#[test]
fn three_qubit_sequences_match_constant_hamiltonian() {
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    for _ in 0..10 {
        let j = |rng: &mut ChaCha20Rng| mhz_to_angular(rng.random_range(-8.0..8.0));
        let (j01, j02, j12) = (j(&mut rng), j(&mut rng), j(&mut rng));
        let coupling = vec![vec![0.0, j01, j02], vec![j01, 0.0, j12], vec![j02, j12, 0.0]];
        let spec = SystemSpec::new(3, vec![0.0; 3], coupling).unwrap();
        let mut t = rng.random_range(-100e-9..0.0);
        let t0 = t;
        let mut pulses = Vec::new();
        for q in [2, 0, 1] {
            let p = random_rect(&mut rng, q, t);
            t = p.end();
            pulses.push(p);
        }
        let numeric = numeric_propagator(&spec, &pulses, t0, t, Integrator::default()).unwrap();
        assert!(max_abs_diff(&numeric, &oracle(&spec, &pulses, t0, t)) < 1e-8);
    }
}

#[test]
fn free_evolution_is_identity_in_the_rotating_frame() {
    let spec = SystemSpec::uniform(3, mhz_to_angular(-4.37)).unwrap();
    let want = oracle(&spec, &[], -1e-6, 2e-6);
    assert!(max_abs_diff(&want, &ComplexMatrix::identity(8, 8)) < 1e-12);
}

#[test]
fn gaussian_pulse_converges_under_step_refinement() {
    let spec = SystemSpec::two_qubit(mhz_to_angular(-6.0));
    let pulses = [
        PulseSpec::rotation(0, ShapeKind::Gaussian, PI / 2.0, 50e-9, 0.0, -50e-9).unwrap(),
        PulseSpec::rotation(1, ShapeKind::Gaussian, PI / 2.0, 50e-9, -PI / 2.0, 0.0).unwrap(),
    ];
    let adaptive = numeric_propagator(&spec, &pulses, -50e-9, 50e-9, Integrator::default()).unwrap();
    let fine = numeric_propagator(&spec, &pulses, -50e-9, 50e-9, Integrator::FixedStep { step: 0.02e-9 }).unwrap();
    assert!(max_abs_diff(&adaptive, &fine) < 1e-8);
}
