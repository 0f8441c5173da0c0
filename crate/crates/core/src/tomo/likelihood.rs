use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qmath::{lower_from_slice, pack_lower_gradient};
use crate::qmath::{ComplexMatrix, DensityMatrix};

/// Denominator guard used by default.
pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Weighted squared-residual objective
/// `L(rho) = sum_i (s p_i - n_i)^2 / (2 s g(p_i))` with
/// `p_i = Tr(rho P_i)`, scale `s` and the smooth floor
/// `g(p) = (p + sqrt(p^2 + eps^2)) / 2`.
///
/// `rho` is reached through the Cholesky parameters, so [`Likelihood::evaluate`]
/// returns the value and the exact gradient with respect to them.
#[derive(Debug, Clone)]
pub struct Likelihood {
    dim: usize,
    operators: Vec<ComplexMatrix>,
    targets: Vec<f64>,
    scale: f64,
    epsilon: f64,
}

impl Likelihood {
    pub fn new(dim: usize, operators: Vec<ComplexMatrix>, targets: Vec<f64>, scale: f64, epsilon: f64) -> Result<Self> {
        if operators.len() != targets.len() {
            return Err(Error::Shape(format!("{} operators for {} targets", operators.len(), targets.len())));
        }
        if operators.iter().any(|p| p.nrows() != dim || p.ncols() != dim) {
            return Err(Error::Shape(format!("likelihood operators must be {dim}x{dim}")));
        }
        if !(scale > 0.0) || !(epsilon > 0.0) {
            return Err(Error::Shape("scale and epsilon must be positive".into()));
        }
        Ok(Self { dim, operators, targets, scale, epsilon })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_params(&self) -> usize {
        self.dim * self.dim
    }

    pub fn n_terms(&self) -> usize {
        self.operators.len()
    }

    fn guard(&self, p: f64) -> (f64, f64) {
        let root = (p * p + self.epsilon * self.epsilon).sqrt();
        (0.5 * (p + root), 0.5 * (1.0 + p / root))
    }

    /// Objective at a density matrix, without the parametrization.
    pub fn value_at(&self, rho: &DensityMatrix) -> f64 {
        self.operators
            .iter()
            .zip(&self.targets)
            .map(|(op, &n)| self.term(trace_product(rho.matrix(), op), n).0)
            .sum()
    }

    /// Term value and its derivative with respect to `p`.
    fn term(&self, p: f64, n: f64) -> (f64, f64) {
        let s = self.scale;
        let (g, dg) = self.guard(p);
        let r = s * p - n;
        (r * r / (2.0 * s * g), r / g - r * r * dg / (2.0 * s * g * g))
    }

    /// Value at parameters `x`, writing `dL/dx` into `grad`.
    pub fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        let t = lower_from_slice(self.dim, x);
        let rho = (t.adjoint() * &t).unscale(norm2);
        let mut w = ComplexMatrix::zeros(self.dim, self.dim);
        let mut value = 0.0;
        for (op, &n) in self.operators.iter().zip(&self.targets) {
            let (f, df) = self.term(trace_product(&rho, op), n);
            value += f;
            w.zip_apply(op, |a, b| *a += b * df);
        }
        // dL = Tr(W drho) with drho from d(T^dagger T / |x|^2).
        let tr = trace_product(&rho, &w);
        let g = (&t * &w - t.scale(tr)).scale(2.0 / norm2);
        pack_lower_gradient(&g, grad);
        value
    }
}

/// `Re Tr(a b)` for Hermitian `b`.
fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y): (&Complex64, &Complex64)| (x * y.conj()).re).sum()
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    use super::*;
    use crate::qmath::{pauli_string_from_index, StateVector};

    fn sample_likelihood(scale: f64) -> Likelihood {
        let ops: Vec<ComplexMatrix> = (1..16)
            .map(|m| (ComplexMatrix::identity(4, 4) + pauli_string_from_index(m, 2).unwrap()).scale(0.5))
            .collect();
        let targets = (0..15).map(|i| scale * (0.1 + 0.05 * i as f64)).collect();
        Likelihood::new(4, ops, targets, scale, DEFAULT_EPSILON).unwrap()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for scale in [1.0, 5000.0] {
            let lik = sample_likelihood(scale);
            for _ in 0..10 {
                let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mut g = vec![0.0; 16];
                lik.evaluate(&x, &mut g);
                let mut scratch = vec![0.0; 16];
                for i in 0..16 {
                    let h = 1e-6;
                    let (mut xp, mut xm) = (x.clone(), x.clone());
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (lik.evaluate(&xp, &mut scratch) - lik.evaluate(&xm, &mut scratch)) / (2.0 * h);
                    assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0), "{i}: {fd} vs {}", g[i]);
                }
            }
        }
    }

    #[test]
    fn zero_at_consistent_state() {
        let psi = StateVector::from_real(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        let rho = DensityMatrix::from_pure(&psi);
        let ops: Vec<ComplexMatrix> = (0..4).map(|k| StateVector::basis(4, k).unwrap().projector()).collect();
        let targets = ops.iter().map(|op| 100.0 * trace_product(rho.matrix(), op)).collect();
        let lik = Likelihood::new(4, ops, targets, 100.0, DEFAULT_EPSILON).unwrap();
        assert!(lik.value_at(&rho) < 1e-9);
    }

    #[test]
    fn value_matches_parametrized_value() {
        let lik = sample_likelihood(1.0);
        let x: Vec<f64> = (0..16).map(|i| 0.1 * i as f64 - 0.7).collect();
        let rho = crate::qmath::rho_from_params(&crate::qmath::CholeskyParams::new(4, x.clone()).unwrap()).unwrap();
        let mut g = vec![0.0; 16];
        assert!((lik.evaluate(&x, &mut g) - lik.value_at(&rho)).abs() < 1e-12);
    }
}
