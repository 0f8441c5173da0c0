use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{analytic_propagator, numeric_propagator, Integrator};
use crate::error::{Error, Result};
use crate::model::{AxisPair, PulseShape, PulseSpec, ShapeKind, SystemSpec};
use crate::qmath::MatrixRepr;
use crate::qmath::{max_abs_diff, unitarity_error, ComplexMatrix, ComplexVector};

const UNITARITY_TOL: f64 = 1e-8;

/// What one qubit does in a measurement setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SettingToken {
    /// No pre-rotation.
    I,
    /// Rotation about the first axis.
    A1,
    /// Rotation about the second axis.
    A2,
}

impl SettingToken {
    pub const ALL: [SettingToken; 3] = [SettingToken::I, SettingToken::A1, SettingToken::A2];

    fn as_str(self) -> &'static str {
        match self {
            SettingToken::I => "I",
            SettingToken::A1 => "A1",
            SettingToken::A2 => "A2",
        }
    }
}

/// Per-qubit tokens of one measurement setting, qubit 0 first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Setting(pub Vec<SettingToken>);

impl Setting {
    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&t| t == SettingToken::I)
    }

    /// Position in the canonical enumeration of [`enumerate_settings`].
    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, t| acc * 3 + SettingToken::ALL.iter().position(|x| x == t).unwrap())
    }
}

impl fmt::Display for Setting {
    /// Tokens joined by `-`, e.g. `A1-I`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|t| t.as_str()).collect();
        f.write_str(&names.join("-"))
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split('-')
            .map(|tok| match tok.trim() {
                "I" => Ok(SettingToken::I),
                "A1" => Ok(SettingToken::A1),
                "A2" => Ok(SettingToken::A2),
                other => Err(Error::InvalidCounts(format!("unknown setting token {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Setting)
    }
}

impl From<Setting> for String {
    fn from(s: Setting) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Setting {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// All `3^n` settings as base-3 numbers with qubit 0 most significant; the
/// all-identity setting comes first.
pub fn enumerate_settings(n_qubits: usize) -> Vec<Setting> {
    let count = 3usize.pow(n_qubits as u32);
    (0..count)
        .map(|j| {
            Setting(
                (0..n_qubits)
                    .map(|q| SettingToken::ALL[(j / 3usize.pow((n_qubits - 1 - q) as u32)) % 3])
                    .collect(),
            )
        })
        .collect()
}

/// Tomography pulse for one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitPulse {
    /// Rotation angle with every partner in `|g>`, radians.
    pub angle: f64,
    /// Seconds.
    pub duration: f64,
    pub shape: ShapeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseTemplate {
    pub qubits: Vec<QubitPulse>,
}

impl PulseTemplate {
    pub fn uniform(n_qubits: usize, angle: f64, duration: f64, shape: ShapeKind) -> Self {
        Self { qubits: vec![QubitPulse { angle, duration, shape }; n_qubits] }
    }

    /// 50 ns rectangular pi/2 pulses on every qubit.
    pub fn standard(n_qubits: usize) -> Self {
        Self::uniform(n_qubits, FRAC_PI_2, 50e-9, ShapeKind::Rectangular)
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.qubits.len() != n_qubits {
            return Err(Error::InvalidPulse(format!(
                "template covers {} qubits, system has {n_qubits}",
                self.qubits.len()
            )));
        }
        for (q, p) in self.qubits.iter().enumerate() {
            if !(p.angle > 0.0 && p.angle < PI) {
                return Err(Error::InvalidPulse(format!(
                    "tomography angle {} on qubit {q} must lie strictly between 0 and pi",
                    p.angle
                )));
            }
            if !(p.duration > 0.0) {
                return Err(Error::InvalidPulse(format!("duration on qubit {q} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrerotationOptions {
    /// Absolute time the first tomography pulse starts.
    pub start: f64,
    pub integrator: Integrator,
    /// Use the closed-form propagators when the sequence allows it.
    pub prefer_analytic: bool,
}

impl Default for PrerotationOptions {
    fn default() -> Self {
        Self { start: 0.0, integrator: Integrator::default(), prefer_analytic: true }
    }
}

/// Pulses of one setting, played one qubit after another from `start`.
/// Identity tokens take no time.
pub fn setting_pulses(setting: &Setting, template: &PulseTemplate, axes: &[AxisPair], start: f64) -> Result<Vec<PulseSpec>> {
    let mut t = start;
    let mut pulses = Vec::new();
    for (q, token) in setting.0.iter().enumerate() {
        let phase = match token {
            SettingToken::I => continue,
            SettingToken::A1 => axes[q].first,
            SettingToken::A2 => axes[q].second,
        };
        let tp = template.qubits[q];
        pulses.push(PulseSpec::rotation(q, tp.shape, tp.angle, tp.duration, phase, t)?);
        t += tp.duration;
    }
    Ok(pulses)
}

fn analytic_eligible(spec: &SystemSpec, pulses: &[PulseSpec]) -> bool {
    if spec.n_qubits() != 2 || pulses.iter().any(|p| p.shape != PulseShape::Rectangular) {
        return false;
    }
    pulses
        .iter()
        .enumerate()
        .all(|(i, a)| pulses[i + 1..].iter().all(|b| a.end() <= b.start || b.end() <= a.start))
}

/// Propagator of a pulse sequence, from the earliest pulse start to the
/// latest pulse end.
///
/// Two-qubit sequences of non-overlapping rectangular pulses use the closed
/// forms when `prefer_analytic` is set; anything else is integrated.
pub fn sequence_propagator(spec: &SystemSpec, pulses: &[PulseSpec], integrator: Integrator, prefer_analytic: bool) -> Result<ComplexMatrix> {
    let dim = spec.dim();
    if pulses.is_empty() {
        return Ok(ComplexMatrix::identity(dim, dim));
    }
    if prefer_analytic && analytic_eligible(spec, pulses) {
        crate::model::validate_drives(spec, pulses)?;
        let mut ordered: Vec<&PulseSpec> = pulses.iter().collect();
        ordered.sort_by(|a, b| a.start.total_cmp(&b.start));
        let jzz = spec.coupling(0, 1);
        let mut u = ComplexMatrix::identity(dim, dim);
        for p in ordered {
            u = analytic_propagator(p.qubit, p.duration, p.start, p.phase, p.amplitude, jzz)? * u;
        }
        return Ok(u);
    }
    let t_start = pulses.iter().map(|p| p.start).fold(f64::INFINITY, f64::min);
    let t_end = pulses.iter().map(|p| p.end()).fold(f64::NEG_INFINITY, f64::max);
    numeric_propagator(spec, pulses, t_start, t_end, integrator)
}

/// Ideal single-qubit rotation by `theta` about the equatorial axis selected
/// by drive phase `phi`: `[[c, -e^{-i phi} s], [e^{i phi} s, c]]` with
/// `c = cos(theta/2)`, `s = sin(theta/2)`.
pub fn single_qubit_rotation(theta: f64, phi: f64) -> ComplexMatrix {
    let (c, s) = ((0.5 * theta).cos(), (0.5 * theta).sin());
    ComplexMatrix::from_row_slice(
        2,
        2,
        &[Complex64::new(c, 0.0), -Complex64::from_polar(s, -phi), Complex64::from_polar(s, phi), Complex64::new(c, 0.0)],
    )
}

/// The `3^n` pre-rotation settings and their evolution operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PreRotationRepr", into = "PreRotationRepr")]
pub struct PreRotationSet {
    n_qubits: usize,
    settings: Vec<Setting>,
    operators: Vec<ComplexMatrix>,
}

#[derive(Serialize, Deserialize)]
struct PreRotationRepr {
    n_qubits: usize,
    settings: Vec<Setting>,
    operators: Vec<MatrixRepr>,
}

impl From<PreRotationSet> for PreRotationRepr {
    fn from(p: PreRotationSet) -> Self {
        Self { n_qubits: p.n_qubits, settings: p.settings, operators: p.operators.iter().map(MatrixRepr::from).collect() }
    }
}

impl TryFrom<PreRotationRepr> for PreRotationSet {
    type Error = Error;

    fn try_from(r: PreRotationRepr) -> Result<Self> {
        let ops = r.operators.iter().map(ComplexMatrix::try_from).collect::<Result<Vec<_>>>()?;
        PreRotationSet::new(r.n_qubits, r.settings, ops)
    }
}

impl PreRotationSet {
    /// Checks that the settings are the canonical enumeration, the identity
    /// setting maps to `I`, and every operator is unitary to 1e-8.
    pub fn new(n_qubits: usize, settings: Vec<Setting>, operators: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if settings != enumerate_settings(n_qubits) || operators.len() != settings.len() {
            return Err(Error::Shape("settings do not match the canonical enumeration".into()));
        }
        for (s, u) in settings.iter().zip(&operators) {
            if u.nrows() != dim || u.ncols() != dim {
                return Err(Error::Shape(format!("operator for {s} is not {dim}x{dim}")));
            }
            let defect = unitarity_error(u);
            if defect >= UNITARITY_TOL {
                return Err(Error::IntegrationFailure(format!("operator for {s} is not unitary ({defect:.3e})")));
            }
            if s.is_identity() && max_abs_diff(u, &ComplexMatrix::identity(dim, dim)) > UNITARITY_TOL {
                return Err(Error::Shape("identity setting must map to the identity".into()));
            }
        }
        Ok(Self { n_qubits, settings, operators })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn settings(&self) -> &[Setting] {
        &self.settings
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    /// Loads the set cached under `dir` for this configuration, building and
    /// storing it on a miss.
    pub fn load_or_build(
        dir: &Path,
        spec: &SystemSpec,
        template: &PulseTemplate,
        axes: &[AxisPair],
        options: &PrerotationOptions,
    ) -> Result<Self> {
        let path = dir.join(format!("prerotations-{}.json", cache_key(spec, template, axes, options)?));
        if let Ok(set) = Self::load_json(&path) {
            return Ok(set);
        }
        let set = build_prerotation_set(spec, template, axes, options)?;
        std::fs::create_dir_all(dir)?;
        set.save_json(&path)?;
        Ok(set)
    }
}

/// SHA-256 over the JSON encoding of everything the operators depend on.
pub fn cache_key(spec: &SystemSpec, template: &PulseTemplate, axes: &[AxisPair], options: &PrerotationOptions) -> Result<String> {
    let payload = serde_json::to_vec(&(spec, template, axes, options))?;
    Ok(Sha256::digest(&payload).iter().map(|b| format!("{b:02x}")).collect())
}

/// Evolution operators for every combination of {identity, axis 1, axis 2}
/// per qubit. Settings are computed in parallel.
pub fn build_prerotation_set(
    spec: &SystemSpec,
    template: &PulseTemplate,
    axes: &[AxisPair],
    options: &PrerotationOptions,
) -> Result<PreRotationSet> {
    let n = spec.n_qubits();
    template.validate(n)?;
    if axes.len() != n {
        return Err(Error::DegenerateAxes(format!("{} axis pairs for {n} qubits", axes.len())));
    }
    if let Some(q) = axes.iter().position(AxisPair::is_degenerate) {
        return Err(Error::DegenerateAxes(format!("qubit {q} axes agree modulo pi")));
    }
    let settings = enumerate_settings(n);
    let operators = settings
        .par_iter()
        .map(|s| {
            let pulses = setting_pulses(s, template, axes, options.start)?;
            sequence_propagator(spec, &pulses, options.integrator, options.prefer_analytic)
        })
        .collect::<Result<Vec<_>>>()?;
    PreRotationSet::new(n, settings, operators)
}

/// Native measurement kets `|xi'_{j,k}> = U_j^dagger |k>` for every setting
/// `j` and computational outcome `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProjectorRepr", into = "ProjectorRepr")]
pub struct ProjectorSet {
    n_qubits: usize,
    settings: Vec<Setting>,
    /// `U_j^dagger`; column `k` is ket `(j, k)`.
    frames: Vec<ComplexMatrix>,
}

#[derive(Serialize, Deserialize)]
struct ProjectorRepr {
    n_qubits: usize,
    settings: Vec<Setting>,
    frames: Vec<MatrixRepr>,
}

impl From<ProjectorSet> for ProjectorRepr {
    fn from(p: ProjectorSet) -> Self {
        Self { n_qubits: p.n_qubits, settings: p.settings, frames: p.frames.iter().map(MatrixRepr::from).collect() }
    }
}

impl TryFrom<ProjectorRepr> for ProjectorSet {
    type Error = Error;

    fn try_from(r: ProjectorRepr) -> Result<Self> {
        let frames = r.frames.iter().map(ComplexMatrix::try_from).collect::<Result<Vec<_>>>()?;
        ProjectorSet::from_frames(r.n_qubits, r.settings, frames)
    }
}

impl ProjectorSet {
    /// Builds a set from per-setting orthonormal frames (columns are kets).
    pub fn from_frames(n_qubits: usize, settings: Vec<Setting>, frames: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if frames.len() != settings.len() {
            return Err(Error::Shape("one frame per setting required".into()));
        }
        for (s, f) in settings.iter().zip(&frames) {
            if f.nrows() != dim || f.ncols() != dim || unitarity_error(f) >= UNITARITY_TOL {
                return Err(Error::Shape(format!("frame for {s} is not an orthonormal {dim}x{dim} basis")));
            }
        }
        Ok(Self { n_qubits, settings, frames })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn n_settings(&self) -> usize {
        self.frames.len()
    }

    pub fn settings(&self) -> &[Setting] {
        &self.settings
    }

    pub fn ket(&self, setting: usize, outcome: usize) -> ComplexVector {
        self.frames[setting].column(outcome).into_owned()
    }

    /// All kets of one setting, as columns.
    pub fn frame(&self, setting: usize) -> &ComplexMatrix {
        &self.frames[setting]
    }

    /// Subset of settings, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            n_qubits: self.n_qubits,
            settings: indices.iter().map(|&j| self.settings[j].clone()).collect(),
            frames: indices.iter().map(|&j| self.frames[j].clone()).collect(),
        }
    }
}

/// `|xi'_{j,k}> = U_j^dagger |zeta_k>` for every setting and outcome.
pub fn modified_projectors(prerot: &PreRotationSet) -> ProjectorSet {
    ProjectorSet {
        n_qubits: prerot.n_qubits,
        settings: prerot.settings.clone(),
        frames: prerot.operators.iter().map(|u| u.adjoint()).collect(),
    }
}
