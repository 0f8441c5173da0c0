//! Sweep drivers. Every grid point is an independent job; rows come back in
//! grid order.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Shots, StateConfig, SweepParameter, SystemConfig};
use super::states::Target;
use crate::error::{Error, Result};
use crate::evolve::{
    build_prerotation_set, modified_projectors, PrerotationOptions, ProjectorSet, PulseTemplate,
};
use crate::measure::{apply_confusion, ideal_counts, mitigate_confusion_with, sample_counts, ConfusionMatrix, Mitigation};
use crate::model::{AxisPair, SystemSpec};
use crate::tomo::{cct_reconstruct, mle_standard_from_counts, Method, ReconstructionOptions};

/// One plot-ready line of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub parameter: String,
    pub value: f64,
    pub state: String,
    pub method: String,
    /// Mean over repetitions.
    pub fidelity: f64,
    /// Sample standard deviation over repetitions; 0 for a single dataset.
    pub fidelity_std: f64,
    pub repetitions: usize,
    pub converged: bool,
}

pub fn write_results_csv<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    csv::Reader::from_reader(r).deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Grid values as `start, start + step, ...` up to and including `stop`.
fn linspace_step(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as i64;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

/// Coupling grid used when none is configured: 0 to -10 MHz in 1 MHz steps.
pub fn default_coupling_grid() -> Vec<f64> {
    linspace_step(0.0, -10.0, -1.0)
}

/// Angle grid used when none is configured: 0.05 pi to 0.95 pi in 0.05 pi steps, degrees.
pub fn default_angle_grid() -> Vec<f64> {
    linspace_step(9.0, 171.0, 9.0)
}

/// Relative-axis grid used when none is configured: 90 to 270 degrees in
/// 15 degree steps without the collinear point.
pub fn default_axis_grid() -> Vec<f64> {
    linspace_step(90.0, 270.0, 15.0).into_iter().filter(|&d| d != 180.0).collect()
}

fn grid(cfg: &ExperimentConfig, parameter: SweepParameter, default: fn() -> Vec<f64>) -> Result<Vec<f64>> {
    match &cfg.sweep {
        Some(s) if s.parameter == parameter => Ok(s.grid.clone()),
        Some(s) => Err(Error::Config(format!(
            "sweep parameter {} does not apply here, expected {}",
            s.parameter.as_str(),
            parameter.as_str()
        ))),
        None => Ok(default()),
    }
}

fn states_or(cfg: &ExperimentConfig, default: &[&str]) -> Vec<StateConfig> {
    if cfg.states.is_empty() {
        default.iter().map(|s| StateConfig::Named(s.to_string())).collect()
    } else {
        cfg.states.clone()
    }
}

/// Everything one grid point needs.
struct Point<'a> {
    experiment: &'static str,
    parameter: SweepParameter,
    value: f64,
    index: usize,
    system: SystemSpec,
    template: PulseTemplate,
    axes: Vec<AxisPair>,
    states: &'a [StateConfig],
}

struct Shared {
    shots: Shots,
    repetitions: usize,
    seed: u64,
    confusion: Option<ConfusionMatrix>,
    mode: Mitigation,
    options: ReconstructionOptions,
}

impl Shared {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            shots: cfg.shots,
            repetitions: if cfg.shots == Shots::Exact { 1 } else { cfg.repetitions },
            seed: cfg.seed,
            confusion: cfg.confusion()?,
            mode: cfg.mitigation_mode,
            options: ReconstructionOptions { restarts: cfg.restarts, seed: cfg.seed, ..Default::default() },
        })
    }
}

/// Seed of one sampled dataset, distinct per grid point, state and repetition.
pub fn dataset_seed(base: u64, point: usize, state: usize, repetition: usize) -> u64 {
    base.wrapping_add((point as u64) << 32).wrapping_add((state as u64) << 16).wrapping_add(repetition as u64)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Standard and coupling-compensated fidelities for every state at one point.
fn run_point(point: &Point<'_>, shared: &Shared, projectors: &ProjectorSet) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for (si, state) in point.states.iter().enumerate() {
        let target: Target = state.resolve(&point.system, &point.template)?;
        let mut ideal = ideal_counts(&target.density(), projectors, shared.shots.count())?;
        if let Some(m) = &shared.confusion {
            ideal = apply_confusion(m, &ideal)?;
        }
        let mut fid = [Vec::new(), Vec::new()];
        let mut converged = true;
        for rep in 0..shared.repetitions {
            let mut counts = match shared.shots {
                Shots::Exact => ideal.clone(),
                Shots::Sampled(_) => sample_counts(&ideal, dataset_seed(shared.seed, point.index, si, rep))?,
            };
            if let Some(m) = &shared.confusion {
                counts = mitigate_confusion_with(m, &counts, shared.mode)?;
            }
            let std = mle_standard_from_counts(&counts, &shared.options)?;
            let cct = cct_reconstruct(&counts, projectors, &shared.options)?;
            converged &= std.converged && cct.converged;
            fid[0].push(target.fidelity(&std.rho)?);
            fid[1].push(target.fidelity(&cct.rho)?);
        }
        for (method, values) in [Method::MleStandard, Method::MleCct].into_iter().zip(&fid) {
            let (mean, sd) = mean_std(values);
            rows.push(ResultRow {
                experiment: point.experiment.to_string(),
                parameter: point.parameter.as_str().to_string(),
                value: point.value,
                state: state.name().to_string(),
                method: method.as_str().to_string(),
                fidelity: mean,
                fidelity_std: sd,
                repetitions: values.len(),
                converged,
            });
        }
    }
    Ok(rows)
}

fn sweep(points: Vec<Point<'_>>, shared: &Shared) -> Result<Vec<ResultRow>> {
    let per_point = points
        .par_iter()
        .map(|p| {
            let set = build_prerotation_set(&p.system, &p.template, &p.axes, &PrerotationOptions::default())?;
            run_point(p, shared, &modified_projectors(&set))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

/// Fidelity against coupling strength for nominal and compensated
/// reconstruction. Defaults to the product, Bell and mixed states.
pub fn run_fig1b(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    coupling_sweep(cfg, "fig1b", &cfg.system, &["product", "bell", "mixed"])
}

/// Three-qubit analogue of [`run_fig1b`] with every pair coupled equally.
/// Defaults to the product, GHZ and mixed three-qubit states.
pub fn run_3q(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let system = SystemConfig { n_qubits: 3, coupling_mhz: None, ..cfg.system.clone() };
    coupling_sweep(cfg, "threeq", &system, &["product3", "ghz3", "mixed3"])
}

fn coupling_sweep(cfg: &ExperimentConfig, experiment: &'static str, system: &SystemConfig, default: &[&str]) -> Result<Vec<ResultRow>> {
    let values = grid(cfg, SweepParameter::JzzMhz, default_coupling_grid)?;
    let states = states_or(cfg, default);
    let n = system.n_qubits;
    let template = cfg.pulses.template(n)?;
    let axes = cfg.axis_pairs(n)?;
    let points = values
        .iter()
        .enumerate()
        .map(|(index, &j)| {
            Ok(Point {
                experiment,
                parameter: SweepParameter::JzzMhz,
                value: j,
                index,
                system: system.to_spec(Some(j))?,
                template: template.clone(),
                axes: axes.clone(),
                states: &states,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    sweep(points, &Shared::new(cfg)?)
}

/// Fidelity against the tomography angle of `swept_qubit`, the other qubits
/// held at `fixed_angle_deg`. Defaults to `(|gg> + |ge>)/sqrt(2)`, `psi_a`
/// and `psi_b`.
pub fn run_angle_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let values = grid(cfg, SweepParameter::AngleDeg, default_angle_grid)?;
    if let Some(bad) = values.iter().find(|&&a| !(a > 0.0 && a < 180.0)) {
        return Err(Error::Config(format!("tomography angle {bad} deg must lie strictly between 0 and 180")));
    }
    let states = states_or(cfg, &["gg_ge", "psi_a", "psi_b"]);
    let system = cfg.system.to_spec(None)?;
    let n = system.n_qubits();
    let base = cfg.pulses.template(n)?;
    let axes = cfg.axis_pairs(n)?;
    let points = values
        .iter()
        .enumerate()
        .map(|(index, &angle)| {
            let mut template = base.clone();
            for (q, p) in template.qubits.iter_mut().enumerate() {
                p.angle = if q == cfg.swept_qubit { angle } else { cfg.fixed_angle_deg }.to_radians();
            }
            Point {
                experiment: "angles",
                parameter: SweepParameter::AngleDeg,
                value: angle,
                index,
                system: system.clone(),
                template,
                axes: axes.clone(),
                states: &states,
            }
        })
        .collect();
    sweep(points, &Shared::new(cfg)?)
}

/// Fidelity against the angle between the two tomography axes, the first
/// along x on every qubit. Defaults to the product, Bell and mixed states.
pub fn run_axes_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let values = grid(cfg, SweepParameter::AxisDeg, default_axis_grid)?;
    let states = states_or(cfg, &["product", "bell", "mixed"]);
    let system = cfg.system.to_spec(None)?;
    let n = system.n_qubits();
    let template = cfg.pulses.template(n)?;
    let points = values
        .iter()
        .enumerate()
        .map(|(index, &delta)| {
            let pair = AxisPair::with_relative_angle(delta.to_radians());
            if pair.is_degenerate() {
                return Err(Error::DegenerateAxes(format!("relative axis angle {delta} deg")));
            }
            Ok(Point {
                experiment: "axes",
                parameter: SweepParameter::AxisDeg,
                value: delta,
                index,
                system: system.clone(),
                template: template.clone(),
                axes: vec![pair; n],
                states: &states,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    sweep(points, &Shared::new(cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SweepConfig;

    fn cfg(json: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(json).unwrap()
    }

    #[test]
    fn default_grids() {
        assert_eq!(default_coupling_grid().len(), 11);
        assert_eq!(default_angle_grid().first(), Some(&9.0));
        assert_eq!(default_angle_grid().last(), Some(&171.0));
        let axes = default_axis_grid();
        assert_eq!(axes.len(), 12);
        assert!(!axes.contains(&180.0));
    }

    #[test]
    fn uncoupled_point_is_exact_for_both_methods() {
        let rows = run_fig1b(&cfg(r#"{"sweep": {"parameter": "jzz_mhz", "grid": [0]}}"#)).unwrap();
        assert_eq!(rows.len(), 6);
        for r in &rows {
            assert!(r.fidelity > 1.0 - 1e-6, "{r:?}");
        }
    }

    #[test]
    fn collinear_axes_rejected() {
        let err = run_axes_sweep(&cfg(r#"{"sweep": {"parameter": "axis_deg", "grid": [135, 180]}}"#)).unwrap_err();
        assert!(matches!(err, Error::DegenerateAxes(_)));
    }

    #[test]
    fn angle_grid_validated() {
        let mut c = cfg("{}");
        c.sweep = Some(SweepConfig { parameter: SweepParameter::AngleDeg, grid: vec![0.0] });
        assert_eq!(run_angle_sweep(&c).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn mismatched_sweep_parameter() {
        let c = cfg(r#"{"sweep": {"parameter": "axis_deg", "grid": [90]}}"#);
        assert!(matches!(run_fig1b(&c), Err(Error::Config(_))));
    }

    #[test]
    fn sampled_runs_are_reproducible() {
        let json = r#"{"system": {"jzz_mhz": -4.37}, "shots": 500, "repetitions": 2, "seed": 9,
                       "states": ["bell"], "sweep": {"parameter": "jzz_mhz", "grid": [-4.37]}}"#;
        let a = run_fig1b(&cfg(json)).unwrap();
        let b = run_fig1b(&cfg(json)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.repetitions == 2 && r.fidelity_std > 0.0));
    }

    #[test]
    fn results_csv_roundtrip() {
        let rows = run_axes_sweep(&cfg(r#"{"states": ["product"], "sweep": {"parameter": "axis_deg", "grid": [90, 135]}}"#))
            .unwrap();
        let mut buf = Vec::new();
        write_results_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("experiment,parameter,value,state,method,fidelity,fidelity_std,repetitions,converged\n"));
        assert_eq!(read_results_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for p in 0..5 {
            for s in 0..3 {
                for r in 0..4 {
                    assert!(seen.insert(dataset_seed(7, p, s, r)));
                }
            }
        }
    }
}
