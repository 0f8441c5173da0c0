//! Box-constrained limited-memory quasi-Newton minimization.
//!
//! Search directions come from the two-loop L-BFGS recursion over the
//! free variables. Steps follow the projected path `P(x + a d)` with Armijo
//! backtracking, so every accepted iterate lowers the objective.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    /// Stop when the projected-gradient infinity norm falls below this.
    pub gradient_tol: f64,
    /// Stop when `(f_k - f_{k+1}) / max(|f_k|, |f_{k+1}|, 1)` falls below this.
    pub relative_tol: f64,
    pub memory: usize,
    /// Symmetric box `[-bound, bound]` on every variable.
    pub bound: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self { max_iterations: 5000, gradient_tol: 1e-8, relative_tol: 1e-12, memory: 10, bound: 10.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted iteration, starting value first.
    pub history: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn projected_gradient_norm(x: &[f64], g: &[f64], bound: f64) -> f64 {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| ((xi - gi).clamp(-bound, bound) - xi).abs())
        .fold(0.0, f64::max)
}

/// Minimizes `f` from `x0`; `f(x, grad)` returns the value and fills the
/// gradient.
pub fn minimize(mut f: impl FnMut(&[f64], &mut [f64]) -> f64, x0: &[f64], settings: &OptimizerSettings) -> Minimum {
    let n = x0.len();
    let bound = settings.bound;
    let mut x: Vec<f64> = x0.iter().map(|v| v.clamp(-bound, bound)).collect();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut history = vec![fx];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(settings.memory);
    let mut g_new = vec![0.0; n];
    let mut trial = vec![0.0; n];

    for iter in 0..settings.max_iterations {
        if projected_gradient_norm(&x, &g, bound) < settings.gradient_tol {
            return Minimum { x, value: fx, iterations: iter, converged: true, history };
        }
        // Variables pinned at a bound with the gradient pushing outward stay fixed.
        let free: Vec<bool> = x
            .iter()
            .zip(&g)
            .map(|(&xi, &gi)| !((xi >= bound && gi < 0.0) || (xi <= -bound && gi > 0.0)))
            .collect();
        let mut accepted = false;
        for attempt in 0..2 {
            let use_memory = attempt == 0 && !memory.is_empty();
            let d = if use_memory { two_loop(&g, &memory, &free) } else { steepest(&g, &free) };
            let slope = dot(&g, &d);
            if !(slope < 0.0) {
                continue;
            }
            let mut alpha = if use_memory {
                1.0
            } else {
                (1.0 / d.iter().fold(0.0f64, |m, v| m.max(v.abs()))).min(1.0)
            };
            for _ in 0..MAX_BACKTRACKS {
                for i in 0..n {
                    trial[i] = (x[i] + alpha * d[i]).clamp(-bound, bound);
                }
                let step: Vec<f64> = trial.iter().zip(&x).map(|(t, xi)| t - xi).collect();
                let decrease = dot(&g, &step);
                if decrease >= 0.0 {
                    alpha *= 0.5;
                    continue;
                }
                let ft = f(&trial, &mut g_new);
                if ft.is_finite() && ft <= fx + ARMIJO * decrease {
                    let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                    let sy = dot(&step, &y);
                    if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&step, &step).sqrt() && sy > 0.0 {
                        if memory.len() == settings.memory {
                            memory.pop_front();
                        }
                        memory.push_back((step, y, 1.0 / sy));
                    }
                    let change = (fx - ft) / fx.abs().max(ft.abs()).max(1.0);
                    x.copy_from_slice(&trial);
                    g.copy_from_slice(&g_new);
                    fx = ft;
                    history.push(fx);
                    accepted = true;
                    if change < settings.relative_tol {
                        return Minimum { x, value: fx, iterations: iter + 1, converged: true, history };
                    }
                    break;
                }
                alpha *= 0.5;
            }
            if accepted {
                break;
            }
            memory.clear();
        }
        if !accepted {
            // No descent possible at machine precision: a stationary point.
            return Minimum { x, value: fx, iterations: iter, converged: true, history };
        }
    }
    let converged = projected_gradient_norm(&x, &g, bound) < settings.gradient_tol;
    Minimum { x, value: fx, iterations: settings.max_iterations, converged, history }
}

fn steepest(g: &[f64], free: &[bool]) -> Vec<f64> {
    g.iter().zip(free).map(|(&gi, &f)| if f { -gi } else { 0.0 }).collect()
}

fn two_loop(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, free: &[bool]) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> { v.iter().zip(free).map(|(&x, &f)| if f { x } else { 0.0 }).collect() };
    let mut q = mask(g);
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let (s, y, _) = memory.back().expect("nonempty memory");
    let gamma = dot(s, y) / dot(y, y);
    let mut r: Vec<f64> = q.iter().map(|v| gamma * v).collect();
    for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &r);
        for (ri, si) in r.iter_mut().zip(s) {
            *ri += (a - b) * si;
        }
    }
    mask(&r).into_iter().map(|v| -v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
    }

    #[test]
    fn rosenbrock_minimum() {
        let m = minimize(rosenbrock, &[-1.2, 1.0], &OptimizerSettings::default());
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{:?}", m.x);
        assert!(m.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn respects_bounds() {
        let settings = OptimizerSettings { bound: 0.5, ..Default::default() };
        let m = minimize(
            |x, g| {
                g[0] = 2.0 * (x[0] - 3.0);
                g[1] = 2.0 * (x[1] + 0.2);
                (x[0] - 3.0).powi(2) + (x[1] + 0.2).powi(2)
            },
            &[0.0, 0.0],
            &settings,
        );
        assert!((m.x[0] - 0.5).abs() < 1e-12);
        assert!((m.x[1] + 0.2).abs() < 1e-7);
        assert!(m.converged);
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let settings = OptimizerSettings { max_iterations: 2, relative_tol: 0.0, ..Default::default() };
        let m = minimize(rosenbrock, &[-1.2, 1.0], &settings);
        assert!(!m.converged);
        assert_eq!(m.iterations, 2);
    }
}
