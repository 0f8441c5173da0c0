//! Time-ordered integration of `i dU/dt = H(t) U`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{drive_generator, validate_drives, PulseSpec, SystemSpec};
use crate::qmath::{unitarity_error, ComplexMatrix};

const MAX_STEPS: usize = 5_000_000;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrator {
    /// Dormand-Prince 5(4) with absolute per-step error bound `tol` on the
    /// propagator entries.
    Adaptive { tol: f64 },
    /// Classic fourth-order Runge-Kutta with at most `step` seconds per step.
    FixedStep { step: f64 },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Adaptive { tol: 1e-10 }
    }
}

/// Propagator from `t_start` to `t_end` under the rotating-frame generator
/// of `pulses`.
///
/// The window is split at every pulse edge so the integrator never steps
/// across an envelope discontinuity. Stretches with no active drive are the
/// identity in this frame. The result is re-unitarized by polar projection
/// when rounding drift exceeds 1e-10.
pub fn numeric_propagator(
    spec: &SystemSpec,
    pulses: &[PulseSpec],
    t_start: f64,
    t_end: f64,
    integrator: Integrator,
) -> Result<ComplexMatrix> {
    if !(t_end > t_start) {
        return Err(Error::IntegrationFailure(format!("empty window [{t_start:.3e}, {t_end:.3e}]")));
    }
    validate_drives(spec, pulses)?;
    let mut edges = vec![t_start, t_end];
    for p in pulses {
        edges.extend([p.start, p.end()].into_iter().filter(|&t| t > t_start && t < t_end));
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let dim = spec.dim();
    let mut u = ComplexMatrix::identity(dim, dim);
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let active: Vec<&PulseSpec> = pulses.iter().filter(|p| p.start <= mid && mid <= p.end()).collect();
        if active.is_empty() || b - a <= 0.0 {
            continue;
        }
        let rhs = |t: f64, m: &ComplexMatrix| -> Result<ComplexMatrix> {
            Ok(drive_generator(spec, &active, t)? * m * Complex64::new(0.0, -1.0))
        };
        u = match integrator {
            Integrator::Adaptive { tol } => dormand_prince(&rhs, a, b, u, tol)?,
            Integrator::FixedStep { step } => rk4(&rhs, a, b, u, step)?,
        };
    }
    if unitarity_error(&u) > 1e-10 {
        u = polar_unitary(&u)?;
    }
    Ok(u)
}

/// Nearest unitary `W V^dagger` from the SVD `M = W S V^dagger`.
pub fn polar_unitary(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let svd = m.clone().svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(w), Some(v_t)) => Ok(w * v_t),
        _ => Err(Error::IntegrationFailure("SVD failed during unitarization".into())),
    }
}

type Rhs<'a> = dyn Fn(f64, &ComplexMatrix) -> Result<ComplexMatrix> + 'a;

fn rk4(f: &Rhs<'_>, a: f64, b: f64, mut y: ComplexMatrix, max_step: f64) -> Result<ComplexMatrix> {
    if !(max_step > 0.0) {
        return Err(Error::IntegrationFailure(format!("step {max_step} must be positive")));
    }
    let n = ((b - a) / max_step).ceil().max(1.0) as usize;
    if n > MAX_STEPS {
        return Err(Error::IntegrationFailure(format!("{n} fixed steps exceeds the step budget")));
    }
    let h = (b - a) / n as f64;
    for i in 0..n {
        let t = a + i as f64 * h;
        let k1 = f(t, &y)?;
        let k2 = f(t + 0.5 * h, &(&y + &k1 * re(0.5 * h)))?;
        let k3 = f(t + 0.5 * h, &(&y + &k2 * re(0.5 * h)))?;
        let k4 = f(t + h, &(&y + &k3 * re(h)))?;
        y += (k1 + (k2 + k3) * re(2.0) + k4) * re(h / 6.0);
    }
    Ok(y)
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dormand_prince(f: &Rhs<'_>, a: f64, b: f64, mut y: ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    if !(tol > 0.0) {
        return Err(Error::IntegrationFailure(format!("tolerance {tol} must be positive")));
    }
    let span = b - a;
    let mut t = a;
    let k0 = f(t, &y)?;
    let rate = k0.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0 / span);
    let mut h = (0.01 * tol.powf(0.2) / rate).min(span);
    let mut steps = 0usize;
    while t < b {
        if steps > MAX_STEPS {
            return Err(Error::IntegrationFailure("step budget exhausted".into()));
        }
        steps += 1;
        let h_step = h.min(b - t);
        if h_step < 1e-15 * span && b - t > 1e-15 * span {
            return Err(Error::IntegrationFailure(format!("step size underflow at t = {t:.6e}")));
        }
        let mut k: Vec<ComplexMatrix> = Vec::with_capacity(7);
        for s in 0..7 {
            let mut stage = y.clone();
            for (r, kr) in k.iter().enumerate() {
                if A[s][r] != 0.0 {
                    stage += kr * re(h_step * A[s][r]);
                }
            }
            k.push(f(t + C[s] * h_step, &stage)?);
        }
        let mut y5 = y.clone();
        let mut err = ComplexMatrix::zeros(y.nrows(), y.ncols());
        for s in 0..7 {
            if B5[s] != 0.0 {
                y5 += &k[s] * re(h_step * B5[s]);
            }
            err += &k[s] * re(h_step * (B5[s] - B4[s]));
        }
        let err_norm = err.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if err_norm <= tol {
            t = if h_step >= b - t { b } else { t + h_step };
            y = y5;
        }
        let factor = if err_norm == 0.0 { 5.0 } else { (0.9 * (tol / err_norm).powf(0.2)).clamp(0.2, 5.0) };
        h = h_step * factor;
    }
    Ok(y)
}
