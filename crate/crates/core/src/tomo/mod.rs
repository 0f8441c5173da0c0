//! Density-matrix reconstruction: linear inversion, maximum likelihood over
//! nominal Pauli projectors, and maximum likelihood over the native
//! projectors of the coupled system.

mod likelihood;
mod linear;
mod optimize;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use likelihood::{Likelihood, DEFAULT_EPSILON};
pub use linear::{expectations_from_counts, linear_inversion, ExpectationVector};
pub use optimize::{minimize, Minimum, OptimizerSettings};

use crate::error::{Error, Result};
use crate::evolve::ProjectorSet;
use crate::measure::CountsTensor;
use crate::qmath::{
    hermitian_eigen, params_from_rho, pauli_string_from_index, project_to_physical, rho_from_params, CholeskyParams,
    ComplexMatrix, DensityMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Linear,
    MleStandard,
    MleCct,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Linear => "linear",
            Method::MleStandard => "mle-standard",
            Method::MleCct => "mle-cct",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructionOptions {
    pub optimizer: OptimizerSettings,
    pub epsilon: f64,
    /// Extra random Cholesky starts; the lowest objective wins.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self { optimizer: OptimizerSettings::default(), epsilon: DEFAULT_EPSILON, restarts: 0, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix,
    pub method: Method,
    pub likelihood_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Smallest eigenvalue of `rho`; negative only for linear inversion.
    pub min_eigenvalue: f64,
    /// Objective after each accepted iteration of the winning start.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<f64>,
}

/// Linear inversion wrapped as a result. The matrix may be unphysical.
pub fn linear_reconstruction(r: &ExpectationVector) -> ReconstructionResult {
    let m = linear_inversion(r);
    let min_eigenvalue = hermitian_eigen(&m).0[0];
    ReconstructionResult {
        rho: DensityMatrix::from_matrix_unchecked(m),
        method: Method::Linear,
        likelihood_value: f64::NAN,
        iterations: 0,
        converged: true,
        min_eigenvalue,
        history: Vec::new(),
    }
}

/// Objective over the nominal Pauli projectors: for every non-identity
/// string `m`, the probability `Tr(rho (I + mu_m) / 2)` is fitted to
/// `(1 + r_m) / 2`.
pub fn standard_likelihood(r: &ExpectationVector, epsilon: f64) -> Result<Likelihood> {
    let n = r.n_qubits();
    let dim = 1usize << n;
    let id = ComplexMatrix::identity(dim, dim);
    let mut ops = Vec::with_capacity(r.values().len() - 1);
    let mut targets = Vec::with_capacity(ops.capacity());
    for (m, &v) in r.values().iter().enumerate().skip(1) {
        ops.push((&id + pauli_string_from_index(m, n)?).scale(0.5));
        targets.push(0.5 * (1.0 + v));
    }
    Likelihood::new(dim, ops, targets, 1.0, epsilon)
}

/// Objective over native projectors, `n_{j,k}` against
/// `N <xi'_{j,k}|rho|xi'_{j,k}>`. Count rows are matched to projector
/// settings by name, so row order is irrelevant.
pub fn cct_likelihood(counts: &CountsTensor, projectors: &ProjectorSet, epsilon: f64) -> Result<Likelihood> {
    if counts.dim() != projectors.dim() {
        return Err(Error::Shape(format!(
            "counts over {} outcomes against projectors of dimension {}",
            counts.dim(),
            projectors.dim()
        )));
    }
    let index: HashMap<_, _> = projectors.settings().iter().enumerate().map(|(j, s)| (s, j)).collect();
    let mut ops = Vec::with_capacity(counts.n_settings() * counts.dim());
    let mut targets = Vec::with_capacity(ops.capacity());
    for (s, row) in counts.settings().iter().zip(counts.rows()) {
        let j = *index
            .get(s)
            .ok_or_else(|| Error::InvalidCounts(format!("no projectors for setting {s}")))?;
        let frame = projectors.frame(j);
        for (k, &n) in row.iter().enumerate() {
            let v = frame.column(k);
            ops.push(v * v.adjoint());
            targets.push(n);
        }
    }
    Likelihood::new(counts.dim(), ops, targets, counts.shots() as f64, epsilon)
}

fn initial_guess(r: &ExpectationVector) -> Result<CholeskyParams> {
    params_from_rho(&project_to_physical(&linear_inversion(r))?.rho)
}

fn random_start(dim: usize, seed: u64) -> Result<CholeskyParams> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..dim * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    CholeskyParams::new(dim, values.into_iter().map(|v| v / norm).collect())
}

fn run(lik: &Likelihood, start: CholeskyParams, method: Method, options: &ReconstructionOptions) -> Result<ReconstructionResult> {
    let mut best = optimize_from(lik, start.values(), options);
    for k in 0..options.restarts {
        let seed = options.seed.wrapping_add(k as u64);
        let candidate = optimize_from(lik, random_start(lik.dim(), seed)?.values(), options);
        if candidate.value < best.value {
            best = candidate;
        }
    }
    let rho = rho_from_params(&CholeskyParams::new(lik.dim(), best.x)?)?;
    let min_eigenvalue = rho.eigenvalues()[0];
    Ok(ReconstructionResult {
        rho,
        method,
        likelihood_value: best.value,
        iterations: best.iterations,
        converged: best.converged,
        min_eigenvalue,
        history: best.history,
    })
}

fn optimize_from(lik: &Likelihood, x0: &[f64], options: &ReconstructionOptions) -> Minimum {
    minimize(|x, g| lik.evaluate(x, g), x0, &options.optimizer)
}

/// Maximum likelihood over nominal Pauli projectors, started from the
/// physical projection of the linear inversion.
pub fn mle_standard(r: &ExpectationVector, options: &ReconstructionOptions) -> Result<ReconstructionResult> {
    let lik = standard_likelihood(r, options.epsilon)?;
    run(&lik, initial_guess(r)?, Method::MleStandard, options)
}

/// [`mle_standard`] on expectation values read from counts with nominal axes.
pub fn mle_standard_from_counts(counts: &CountsTensor, options: &ReconstructionOptions) -> Result<ReconstructionResult> {
    mle_standard(&expectations_from_counts(counts)?, options)
}

/// Maximum likelihood against the native projectors, from the same initial
/// guess as [`mle_standard`].
pub fn cct_reconstruct(
    counts: &CountsTensor,
    projectors: &ProjectorSet,
    options: &ReconstructionOptions,
) -> Result<ReconstructionResult> {
    let lik = cct_likelihood(counts, projectors, options.epsilon)?;
    let start = initial_guess(&expectations_from_counts(counts)?)?;
    run(&lik, start, Method::MleCct, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{build_prerotation_set, modified_projectors, PrerotationOptions, PulseTemplate};
    use crate::measure::ideal_counts;
    use crate::model::{mhz_to_angular, AxisPair, SystemSpec};
    use crate::qmath::{fidelity, StateVector};

    fn projectors(j_mhz: f64) -> ProjectorSet {
        let set = build_prerotation_set(
            &SystemSpec::two_qubit(mhz_to_angular(j_mhz)),
            &PulseTemplate::standard(2),
            &[AxisPair::standard(); 2],
            &PrerotationOptions::default(),
        )
        .unwrap();
        modified_projectors(&set)
    }

    fn bell() -> StateVector {
        StateVector::from_real(&[1.0, 0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn consistent_model_recovers_state() {
        let counts = ideal_counts(&DensityMatrix::from_pure(&bell()), &projectors(0.0), 5000).unwrap();
        let opts = ReconstructionOptions::default();
        let std = mle_standard_from_counts(&counts, &opts).unwrap();
        let cct = cct_reconstruct(&counts, &projectors(0.0), &opts).unwrap();
        assert!(fidelity(&std.rho, &bell()).unwrap() > 1.0 - 1e-6);
        assert!(fidelity(&cct.rho, &bell()).unwrap() > 1.0 - 1e-6);
    }

    #[test]
    fn coupling_breaks_standard_but_not_cct() {
        let proj = projectors(-4.0);
        let counts = ideal_counts(&DensityMatrix::from_pure(&bell()), &proj, 5000).unwrap();
        let opts = ReconstructionOptions::default();
        let std = mle_standard_from_counts(&counts, &opts).unwrap();
        let cct = cct_reconstruct(&counts, &proj, &opts).unwrap();
        assert!(fidelity(&std.rho, &bell()).unwrap() < 0.99);
        assert!(fidelity(&cct.rho, &bell()).unwrap() > 0.9999);
        assert!(cct.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn setting_order_does_not_matter() {
        let proj = projectors(-4.37);
        let psi = StateVector::from_real(&[0.5, 0.5, -0.5, 0.5]).unwrap();
        let counts = ideal_counts(&DensityMatrix::from_pure(&psi), &proj, 5000).unwrap();
        let order: Vec<usize> = (0..9).rev().collect();
        let opts = ReconstructionOptions::default();
        let a = cct_reconstruct(&counts, &proj, &opts).unwrap();
        let b = cct_reconstruct(&counts.permuted(&order), &proj, &opts).unwrap();
        assert!(crate::qmath::trace_distance(&a.rho, &b.rho).unwrap() < 1e-4);
    }

    #[test]
    fn missing_projectors_rejected() {
        let proj = projectors(0.0);
        let counts = ideal_counts(&DensityMatrix::maximally_mixed(4), &proj, 100).unwrap();
        let partial = proj.select(&[0, 1, 2]);
        assert!(matches!(
            cct_reconstruct(&counts, &partial, &ReconstructionOptions::default()),
            Err(Error::InvalidCounts(_))
        ));
    }

    #[test]
    fn restarts_do_not_worsen() {
        let proj = projectors(-5.0);
        let rho = DensityMatrix::mixture(&[
            (0.8, &DensityMatrix::from_pure(&bell())),
            (0.2, &DensityMatrix::from_pure(&StateVector::basis(4, 1).unwrap())),
        ])
        .unwrap();
        let counts = ideal_counts(&rho, &proj, 5000).unwrap();
        let single = cct_reconstruct(&counts, &proj, &ReconstructionOptions::default()).unwrap();
        let multi =
            cct_reconstruct(&counts, &proj, &ReconstructionOptions { restarts: 3, seed: 1, ..Default::default() }).unwrap();
        assert!(multi.likelihood_value <= single.likelihood_value);
    }

    #[test]
    fn linear_result_reports_spectrum() {
        let mut v = vec![0.0; 16];
        v[0] = 1.0;
        v[15] = 1.0;
        v[5] = 1.0;
        v[10] = 1.0;
        let res = linear_reconstruction(&ExpectationVector::new(2, v).unwrap());
        assert!(res.min_eigenvalue < -0.4);
        assert_eq!(res.method, Method::Linear);
    }

    #[test]
    fn result_json_roundtrip() {
        let counts = ideal_counts(&DensityMatrix::from_pure(&bell()), &projectors(0.0), 5000).unwrap();
        let res = cct_reconstruct(&counts, &projectors(0.0), &ReconstructionOptions::default()).unwrap();
        let json = serde_json::to_string(&res).unwrap();
        assert!(json.contains("\"mle-cct\""));
        let back: ReconstructionResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back.iterations, res.iterations);
    }
}
