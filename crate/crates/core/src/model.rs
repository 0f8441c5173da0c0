//! System and drive Hamiltonians for ZZ-coupled qubits in the rotating frame.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{ComplexMatrix, I};

/// Axis phase of a rotation about x.
pub const X_AXIS_PHASE: f64 = -FRAC_PI_2;
/// Axis phase of a rotation about y.
pub const Y_AXIS_PHASE: f64 = 0.0;

/// Converts a frequency quoted as `f = J / 2pi` in MHz to rad/s.
pub fn mhz_to_angular(mhz: f64) -> f64 {
    TAU * mhz * 1e6
}

pub fn angular_to_mhz(w: f64) -> f64 {
    w / (TAU * 1e6)
}

/// Wraps a phase into `[0, 2pi)`.
pub fn normalize_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Qubit count, per-qubit frequencies and the symmetric pairwise ZZ map.
///
/// All values are angular (rad/s). The qubit frequencies only matter for
/// lab-frame checks; the rotating-frame generators never use them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemSpecRepr", into = "SystemSpecRepr")]
pub struct SystemSpec {
    n_qubits: usize,
    omega: Vec<f64>,
    coupling: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SystemSpecRepr {
    n_qubits: usize,
    omega: Vec<f64>,
    coupling: Vec<Vec<f64>>,
}

impl TryFrom<SystemSpecRepr> for SystemSpec {
    type Error = Error;

    fn try_from(r: SystemSpecRepr) -> Result<Self> {
        SystemSpec::new(r.n_qubits, r.omega, r.coupling)
    }
}

impl From<SystemSpec> for SystemSpecRepr {
    fn from(s: SystemSpec) -> Self {
        let n = s.n_qubits;
        SystemSpecRepr {
            n_qubits: n,
            coupling: (0..n).map(|i| (0..n).map(|j| s.coupling(i, j)).collect()).collect(),
            omega: s.omega,
        }
    }
}

impl SystemSpec {
    pub fn new(n_qubits: usize, omega: Vec<f64>, coupling: Vec<Vec<f64>>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidSystem("at least one qubit is required".into()));
        }
        if omega.len() != n_qubits {
            return Err(Error::InvalidSystem(format!(
                "{} frequencies for {n_qubits} qubits",
                omega.len()
            )));
        }
        if coupling.len() != n_qubits || coupling.iter().any(|row| row.len() != n_qubits) {
            return Err(Error::InvalidSystem(format!("coupling map must be {n_qubits}x{n_qubits}")));
        }
        for i in 0..n_qubits {
            if coupling[i][i] != 0.0 {
                return Err(Error::InvalidSystem(format!("self-coupling on qubit {i}")));
            }
            for j in 0..i {
                let (a, b) = (coupling[i][j], coupling[j][i]);
                if !a.is_finite() || (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidSystem(format!("coupling ({i},{j}) is not symmetric")));
                }
            }
        }
        Ok(Self { n_qubits, omega, coupling: coupling.into_iter().flatten().collect() })
    }

    /// `n` qubits with every pair coupled by `j` (rad/s).
    pub fn uniform(n_qubits: usize, j: f64) -> Result<Self> {
        let coupling = (0..n_qubits)
            .map(|a| (0..n_qubits).map(|b| if a == b { 0.0 } else { j }).collect())
            .collect();
        Self::new(n_qubits, vec![0.0; n_qubits], coupling)
    }

    /// Two qubits coupled by `jzz` (rad/s).
    pub fn two_qubit(jzz: f64) -> Self {
        Self::uniform(2, jzz).expect("two-qubit spec is valid")
    }

    pub fn with_frequencies(mut self, omega: Vec<f64>) -> Result<Self> {
        if omega.len() != self.n_qubits {
            return Err(Error::InvalidSystem("frequency count does not match qubit count".into()));
        }
        self.omega = omega;
        Ok(self)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.coupling[i * self.n_qubits + j]
    }

    pub fn is_uncoupled(&self) -> bool {
        self.coupling.iter().all(|&j| j == 0.0)
    }

    /// Whether `qubit` is excited in computational basis state `index`.
    pub fn excited(&self, index: usize, qubit: usize) -> bool {
        (index >> (self.n_qubits - 1 - qubit)) & 1 == 1
    }

    pub(crate) fn bit(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    /// Frequency shift `sum_j J_kj n_j` seen by `qubit` in basis state `index`.
    pub fn conditional_shift(&self, index: usize, qubit: usize) -> f64 {
        (0..self.n_qubits)
            .filter(|&j| j != qubit && self.excited(index, j))
            .map(|j| self.coupling(qubit, j))
            .sum()
    }
}

/// Diagonal ZZ energy `sum_{i<j} J_ij n_i n_j`.
pub fn coupling_hamiltonian(spec: &SystemSpec) -> ComplexMatrix {
    let dim = spec.dim();
    let n = spec.n_qubits();
    ComplexMatrix::from_fn(dim, dim, |a, b| {
        if a != b {
            return Complex64::new(0.0, 0.0);
        }
        let mut e = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                if spec.excited(a, i) && spec.excited(a, j) {
                    e += spec.coupling(i, j);
                }
            }
        }
        Complex64::new(e, 0.0)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    #[serde(alias = "rect", alias = "rectangle")]
    Rectangular,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PulseShape {
    Rectangular,
    /// Truncated at `+-2 sigma`, so the pulse lasts `4 sigma`.
    Gaussian { sigma: f64 },
}

impl PulseShape {
    /// The shape of a given kind spanning `duration`.
    pub fn for_duration(kind: ShapeKind, duration: f64) -> Self {
        match kind {
            ShapeKind::Rectangular => PulseShape::Rectangular,
            ShapeKind::Gaussian => PulseShape::Gaussian { sigma: duration / 4.0 },
        }
    }

    pub fn kind(&self) -> ShapeKind {
        match self {
            PulseShape::Rectangular => ShapeKind::Rectangular,
            PulseShape::Gaussian { .. } => ShapeKind::Gaussian,
        }
    }

    fn check(&self, duration: f64) -> Result<()> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::InvalidPulse(format!("duration {duration} must be positive")));
        }
        if let PulseShape::Gaussian { sigma } = *self {
            if !(sigma > 0.0) || (4.0 * sigma - duration).abs() > 1e-9 * duration {
                return Err(Error::InvalidPulse(format!(
                    "gaussian pulse of duration {duration:.3e} s needs sigma = duration/4, got {sigma:.3e} s"
                )));
            }
        }
        Ok(())
    }
}

/// One drive segment on one qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub qubit: usize,
    pub shape: PulseShape,
    /// Peak Rabi rate, rad/s.
    pub amplitude: f64,
    pub duration: f64,
    /// Drive phase; selects the rotation axis.
    pub phase: f64,
    /// Absolute start time, s.
    pub start: f64,
}

impl PulseSpec {
    /// A pulse whose amplitude is calibrated to rotate by `angle` when every
    /// partner qubit is in `|g>`.
    pub fn rotation(qubit: usize, kind: ShapeKind, angle: f64, duration: f64, phase: f64, start: f64) -> Result<Self> {
        let shape = PulseShape::for_duration(kind, duration);
        let pulse = Self {
            qubit,
            shape,
            amplitude: calibrated_amplitude(shape, angle, duration)?,
            duration,
            phase: normalize_phase(phase),
            start,
        };
        pulse.validate()?;
        Ok(pulse)
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.check(self.duration)?;
        if !self.amplitude.is_finite() || !self.phase.is_finite() || !self.start.is_finite() {
            return Err(Error::InvalidPulse("non-finite pulse parameter".into()));
        }
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start && t <= self.end()
    }

    /// Envelope value at absolute time `t`.
    pub fn envelope_at(&self, t: f64) -> Result<f64> {
        envelope(self.shape, self.amplitude, self.duration, t - self.start)
    }

    /// Integrated rotation angle with all partners in `|g>`.
    pub fn area(&self) -> f64 {
        self.amplitude * unit_area(self.shape, self.duration)
    }
}

/// Integral of the unit-amplitude envelope over the pulse window.
fn unit_area(shape: PulseShape, duration: f64) -> f64 {
    match shape {
        PulseShape::Rectangular => duration,
        PulseShape::Gaussian { sigma } => sigma * (2.0 * PI).sqrt() * libm::erf(std::f64::consts::SQRT_2),
    }
}

/// Amplitude that makes the envelope integrate to `angle`.
pub fn calibrated_amplitude(shape: PulseShape, angle: f64, duration: f64) -> Result<f64> {
    shape.check(duration)?;
    Ok(angle / unit_area(shape, duration))
}

/// Envelope value at `t_rel` seconds after the pulse starts.
pub fn envelope(shape: PulseShape, amplitude: f64, duration: f64, t_rel: f64) -> Result<f64> {
    // Tolerate rounding at the window edges.
    let slack = 1e-12 * duration;
    if t_rel < -slack || t_rel > duration + slack || t_rel.is_nan() {
        return Err(Error::OutOfWindow { t: t_rel, duration });
    }
    let t_rel = t_rel.clamp(0.0, duration);
    Ok(match shape {
        PulseShape::Rectangular => amplitude,
        PulseShape::Gaussian { sigma } => {
            let x = (t_rel - 2.0 * sigma) / sigma;
            amplitude * (-0.5 * x * x).exp()
        }
    })
}

/// Axis phases of the two tomography rotations applied to one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisPair {
    pub first: f64,
    pub second: f64,
}

impl AxisPair {
    pub fn new(first: f64, second: f64) -> Self {
        Self { first: normalize_phase(first), second: normalize_phase(second) }
    }

    /// Rotations about x then y.
    pub fn standard() -> Self {
        Self::new(X_AXIS_PHASE, Y_AXIS_PHASE)
    }

    /// First axis along x, second axis at `relative` radians from it.
    pub fn with_relative_angle(relative: f64) -> Self {
        Self::new(X_AXIS_PHASE, X_AXIS_PHASE + relative)
    }

    /// Axes whose phases agree modulo pi span the same rotation line.
    pub fn is_degenerate(&self) -> bool {
        (self.first - self.second).sin().abs() < 1e-9
    }
}

pub(crate) fn validate_drives(spec: &SystemSpec, pulses: &[PulseSpec]) -> Result<()> {
    for p in pulses {
        if p.qubit >= spec.n_qubits() {
            return Err(Error::InvalidPulse(format!(
                "pulse targets qubit {} of a {}-qubit system",
                p.qubit,
                spec.n_qubits()
            )));
        }
        p.validate()?;
    }
    for (a, pa) in pulses.iter().enumerate() {
        for pb in &pulses[a + 1..] {
            if pa.qubit == pb.qubit && pa.start < pb.end() && pb.start < pa.end() {
                return Err(Error::OverlappingDrive(pa.qubit));
            }
        }
    }
    Ok(())
}

/// Rotating-frame generator for the given drives at time `t`.
///
/// Every single-flip transition `c -> c'` that excites qubit `k` carries
/// `<c'|H|c> = i (A_k(t)/2) exp(i (phi_k - s_k(c) t))`, where
/// `s_k(c) = sum_j J_kj n_j(c)` is the ZZ shift felt by qubit `k`. The
/// conditional phase sign is the one under which the two-qubit closed forms
/// in [`crate::evolve::analytic_propagator`] are exact solutions. Pulses not
/// active at `t` contribute nothing, so the idle generator is zero.
pub fn rwa_drive_hamiltonian(spec: &SystemSpec, pulses: &[PulseSpec], t: f64) -> Result<ComplexMatrix> {
    validate_drives(spec, pulses)?;
    let active: Vec<&PulseSpec> = pulses.iter().filter(|p| p.is_active(t)).collect();
    drive_generator(spec, &active, t)
}

/// [`rwa_drive_hamiltonian`] without window bookkeeping; every pulse given is
/// treated as on.
pub(crate) fn drive_generator(spec: &SystemSpec, active: &[&PulseSpec], t: f64) -> Result<ComplexMatrix> {
    let dim = spec.dim();
    let mut h = ComplexMatrix::zeros(dim, dim);
    for p in active {
        let a = p.envelope_at(t)?;
        let bit = spec.bit(p.qubit);
        for c in (0..dim).filter(|c| c & bit == 0) {
            let phase = p.phase - spec.conditional_shift(c, p.qubit) * t;
            let elem = I * Complex64::from_polar(0.5 * a, phase);
            h[(c | bit, c)] += elem;
            h[(c, c | bit)] += elem.conj();
        }
    }
    Ok(h)
}
