//! JSON experiment configuration. Frequencies are given in MHz (meaning
//! `f = J / 2pi`), times in ns and angles in degrees; everything is
//! converted to SI and radians on load.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::states::{named_state, PreparationSpec, Target};
use crate::error::{Error, Result};
use crate::evolve::{PulseTemplate, QubitPulse};
use crate::measure::{ConfusionMatrix, Mitigation};
use crate::model::{mhz_to_angular, AxisPair, ShapeKind, SystemSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub n_qubits: usize,
    /// Coupling applied to every pair unless `coupling_mhz` is given.
    pub jzz_mhz: f64,
    pub coupling_mhz: Option<Vec<Vec<f64>>>,
    pub frequencies_ghz: Option<Vec<f64>>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { n_qubits: 2, jzz_mhz: 0.0, coupling_mhz: None, frequencies_ghz: None }
    }
}

impl SystemConfig {
    /// The system, optionally with every pair coupled by `jzz_mhz` instead.
    pub fn to_spec(&self, jzz_mhz: Option<f64>) -> Result<SystemSpec> {
        let n = self.n_qubits;
        let coupling = match (&self.coupling_mhz, jzz_mhz) {
            (Some(m), None) => m.iter().map(|r| r.iter().map(|&v| mhz_to_angular(v)).collect()).collect(),
            (_, j) => {
                let j = mhz_to_angular(j.unwrap_or(self.jzz_mhz));
                (0..n).map(|a| (0..n).map(|b| if a == b { 0.0 } else { j }).collect()).collect()
            }
        };
        let omega = match &self.frequencies_ghz {
            Some(f) => f.iter().map(|&g| mhz_to_angular(g * 1e3)).collect(),
            None => vec![0.0; n],
        };
        SystemSpec::new(n, omega, coupling)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    pub shape: ShapeKind,
    pub duration_ns: f64,
    /// Gaussian width; overrides `duration_ns` with `4 sigma`.
    pub sigma_ns: Option<f64>,
    /// Tomography rotation angle per qubit. A single entry applies to all.
    pub angles_deg: Vec<f64>,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self { shape: ShapeKind::Rectangular, duration_ns: 50.0, sigma_ns: None, angles_deg: vec![90.0] }
    }
}

impl PulseConfig {
    pub fn template(&self, n_qubits: usize) -> Result<PulseTemplate> {
        let duration = match (self.shape, self.sigma_ns) {
            (ShapeKind::Gaussian, Some(s)) => 4.0 * s * 1e-9,
            _ => self.duration_ns * 1e-9,
        };
        let angles = match self.angles_deg.len() {
            1 => vec![self.angles_deg[0]; n_qubits],
            k if k == n_qubits => self.angles_deg.clone(),
            k => return Err(Error::Config(format!("{k} tomography angles for {n_qubits} qubits"))),
        };
        Ok(PulseTemplate {
            qubits: angles
                .iter()
                .map(|a| QubitPulse { angle: a.to_radians(), duration, shape: self.shape })
                .collect(),
        })
    }
}

/// Axis phases of the two tomography rotations, degrees. `-90` is x, `0` is y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub first_deg: f64,
    pub second_deg: f64,
}

impl From<AxisConfig> for AxisPair {
    fn from(a: AxisConfig) -> Self {
        AxisPair::new(a.first_deg.to_radians(), a.second_deg.to_radians())
    }
}

/// `"exact"` for noiseless expected counts or a shot count for sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ShotsRepr", into = "ShotsRepr")]
#[derive(Default)]
pub enum Shots {
    #[default]
    Exact,
    Sampled(u64),
}


#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ShotsRepr {
    Count(u64),
    Word(String),
}

impl TryFrom<ShotsRepr> for Shots {
    type Error = Error;

    fn try_from(r: ShotsRepr) -> Result<Self> {
        match r {
            ShotsRepr::Count(0) => Err(Error::Config("shot count must be positive".into())),
            ShotsRepr::Count(n) => Ok(Shots::Sampled(n)),
            ShotsRepr::Word(w) => w.parse(),
        }
    }
}

impl From<Shots> for ShotsRepr {
    fn from(s: Shots) -> Self {
        match s {
            Shots::Exact => ShotsRepr::Word("exact".into()),
            Shots::Sampled(n) => ShotsRepr::Count(n),
        }
    }
}

impl std::str::FromStr for Shots {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("exact") {
            return Ok(Shots::Exact);
        }
        match s.parse::<u64>() {
            Ok(0) | Err(_) => Err(Error::Config(format!("shots must be a positive integer or \"exact\", got {s:?}"))),
            Ok(n) => Ok(Shots::Sampled(n)),
        }
    }
}

/// Shot count used to scale expected counts when `shots` is exact.
pub const EXACT_SHOT_SCALE: u64 = 5000;

impl Shots {
    pub fn count(self) -> u64 {
        match self {
            Shots::Exact => EXACT_SHOT_SCALE,
            Shots::Sampled(n) => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Uniform pair coupling, MHz.
    JzzMhz,
    /// Tomography angle of the swept qubit, degrees.
    AngleDeg,
    /// Second-axis angle relative to the first, degrees.
    AxisDeg,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::JzzMhz => "jzz_mhz",
            SweepParameter::AngleDeg => "angle_deg",
            SweepParameter::AxisDeg => "axis_deg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
}

/// A named reference state or a preparation recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateConfig {
    Named(String),
    Prepared { name: String, sequence: PreparationSpec },
}

impl StateConfig {
    pub fn name(&self) -> &str {
        match self {
            StateConfig::Named(n) | StateConfig::Prepared { name: n, .. } => n,
        }
    }

    pub fn resolve(&self, system: &SystemSpec, template: &PulseTemplate) -> Result<Target> {
        match self {
            StateConfig::Named(n) => named_state(n, system, template),
            StateConfig::Prepared { sequence, .. } => {
                Ok(Target::Pure(super::states::prepare_state(sequence, system, template)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub pulses: PulseConfig,
    /// One entry per qubit, or a single entry for all. Defaults to x then y.
    pub axes: Option<Vec<AxisConfig>>,
    pub states: Vec<StateConfig>,
    pub shots: Shots,
    /// Independent sampled datasets per grid point; ignored for exact shots.
    pub repetitions: usize,
    pub seed: u64,
    pub sweep: Option<SweepConfig>,
    /// Confusion matrix CSV applied to simulated counts and then mitigated.
    pub mitigation: Option<PathBuf>,
    pub mitigation_mode: Mitigation,
    pub restarts: usize,
    /// Qubit whose angle an `angle_deg` sweep varies.
    pub swept_qubit: usize,
    /// Tomography angle of the other qubits during an `angle_deg` sweep.
    pub fixed_angle_deg: f64,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            pulses: PulseConfig::default(),
            axes: None,
            states: Vec::new(),
            shots: Shots::Exact,
            repetitions: 1,
            seed: 0,
            sweep: None,
            mitigation: None,
            mitigation_mode: Mitigation::Inverse,
            restarts: 0,
            swept_qubit: 1,
            fixed_angle_deg: 63.0,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let system = self.system.to_spec(None).map_err(|e| Error::Config(e.to_string()))?;
        let n = system.n_qubits();
        let template = self.pulses.template(n)?;
        let axes = self.axis_pairs(n)?;
        if axes.iter().any(AxisPair::is_degenerate) {
            return Err(Error::DegenerateAxes("configured axes are collinear".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.grid.is_empty() {
                return Err(Error::Config("sweep grid is empty".into()));
            }
            if sweep.grid.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("sweep grid has non-finite values".into()));
            }
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.swept_qubit >= n {
            return Err(Error::Config(format!("swept qubit {} out of range", self.swept_qubit)));
        }
        for state in &self.states {
            match state {
                StateConfig::Named(name) if !super::states::STATE_NAMES.contains(&name.as_str()) && name != "ghz" => {
                    return Err(Error::Config(format!("unknown state {name:?}")));
                }
                StateConfig::Prepared { .. } => {
                    // Resolve once so bad qubit indices and undefined waits surface early.
                    state.resolve(&system, &template).map_err(|e| Error::Config(e.to_string()))?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn axis_pairs(&self, n_qubits: usize) -> Result<Vec<AxisPair>> {
        match &self.axes {
            None => Ok(vec![AxisPair::standard(); n_qubits]),
            Some(a) if a.len() == 1 => Ok(vec![a[0].into(); n_qubits]),
            Some(a) if a.len() == n_qubits => Ok(a.iter().map(|&x| x.into()).collect()),
            Some(a) => Err(Error::Config(format!("{} axis entries for {n_qubits} qubits", a.len()))),
        }
    }

    pub fn confusion(&self) -> Result<Option<ConfusionMatrix>> {
        match &self.mitigation {
            None => Ok(None),
            Some(path) => {
                let file = std::fs::File::open(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                ConfusionMatrix::read_csv(file).map(Some)
            }
        }
    }
}
