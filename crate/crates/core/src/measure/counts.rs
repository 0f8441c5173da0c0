use std::collections::HashMap;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{ProjectorSet, Setting};
use crate::qmath::DensityMatrix;

const NEGATIVE_PROBABILITY_TOL: f64 = 1e-10;
const ROW_SUM_TOL: f64 = 1e-6;

/// Outcome tallies `n[j][k]` for every measurement setting `j` and
/// computational outcome `k`, each row summing to the shot count.
///
/// Counts are real so that readout-mitigated tensors, which can be
/// fractional or slightly negative, share the type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CountsRepr", into = "CountsRepr")]
pub struct CountsTensor {
    n_qubits: usize,
    shots: u64,
    settings: Vec<Setting>,
    rows: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct CountsRepr {
    n_qubits: usize,
    shots: u64,
    settings: Vec<Setting>,
    counts: Vec<Vec<f64>>,
}

impl From<CountsTensor> for CountsRepr {
    fn from(c: CountsTensor) -> Self {
        Self { n_qubits: c.n_qubits, shots: c.shots, settings: c.settings, counts: c.rows }
    }
}

impl TryFrom<CountsRepr> for CountsTensor {
    type Error = Error;

    fn try_from(r: CountsRepr) -> Result<Self> {
        CountsTensor::new(r.n_qubits, r.shots, r.settings, r.counts)
    }
}

impl CountsTensor {
    pub fn new(n_qubits: usize, shots: u64, settings: Vec<Setting>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if shots == 0 {
            return Err(Error::InvalidCounts("shot count must be positive".into()));
        }
        if settings.len() != rows.len() {
            return Err(Error::InvalidCounts(format!("{} settings but {} rows", settings.len(), rows.len())));
        }
        for (s, row) in settings.iter().zip(&rows) {
            if s.0.len() != n_qubits {
                return Err(Error::InvalidCounts(format!("setting {s} does not address {n_qubits} qubits")));
            }
            if row.len() != dim {
                return Err(Error::InvalidCounts(format!("setting {s} has {} outcomes, expected {dim}", row.len())));
            }
            if row.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidCounts(format!("non-finite count in setting {s}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - shots as f64).abs() > ROW_SUM_TOL * shots as f64 {
                return Err(Error::InvalidCounts(format!("setting {s} sums to {sum}, expected {shots}")));
            }
        }
        let mut seen = HashMap::new();
        for (j, s) in settings.iter().enumerate() {
            if let Some(prev) = seen.insert(s.clone(), j) {
                return Err(Error::InvalidCounts(format!("setting {s} appears in rows {prev} and {j}")));
            }
        }
        Ok(Self { n_qubits, shots, settings, rows })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn settings(&self) -> &[Setting] {
        &self.settings
    }

    pub fn n_settings(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Row `j` divided by the shot count.
    pub fn frequencies(&self, j: usize) -> Vec<f64> {
        self.rows[j].iter().map(|c| c / self.shots as f64).collect()
    }

    pub fn has_negative(&self) -> bool {
        self.rows.iter().flatten().any(|&c| c < 0.0)
    }

    /// Same tensor with rows reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            n_qubits: self.n_qubits,
            shots: self.shots,
            settings: order.iter().map(|&j| self.settings[j].clone()).collect(),
            rows: order.iter().map(|&j| self.rows[j].clone()).collect(),
        }
    }

    /// Writes `setting,outcome,count` rows, one per entry.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["setting", "outcome", "count"])?;
        for (s, row) in self.settings.iter().zip(&self.rows) {
            for (k, c) in row.iter().enumerate() {
                out.write_record([s.to_string(), to_bitstring(k, self.n_qubits), c.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the `setting,outcome,count` layout. Settings keep their order of
    /// first appearance, absent outcomes count zero, and the shot count is
    /// the (common) row total.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut input = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = input.headers()?.clone();
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::InvalidCounts(format!("missing column {name:?}")))
        };
        let (cs, co, cc) = (column("setting")?, column("outcome")?, column("count")?);
        let mut settings: Vec<Setting> = Vec::new();
        let mut index: HashMap<Setting, usize> = HashMap::new();
        let mut entries = Vec::new();
        let mut n_qubits = None;
        for record in input.records() {
            let record = record?;
            let setting: Setting = record[cs].parse()?;
            let outcome = &record[co];
            let count: f64 = record[cc]
                .parse()
                .map_err(|_| Error::InvalidCounts(format!("bad count {:?}", &record[cc])))?;
            let n = *n_qubits.get_or_insert(setting.0.len());
            if setting.0.len() != n || outcome.len() != n {
                return Err(Error::InvalidCounts(format!("row {setting},{outcome} has the wrong qubit count")));
            }
            let k = parse_bitstring(outcome)?;
            let j = *index.entry(setting.clone()).or_insert_with(|| {
                settings.push(setting);
                settings.len() - 1
            });
            entries.push((j, k, count));
        }
        let n_qubits = n_qubits.ok_or_else(|| Error::InvalidCounts("no data rows".into()))?;
        let mut rows = vec![vec![0.0; 1 << n_qubits]; settings.len()];
        for (j, k, c) in entries {
            rows[j][k] += c;
        }
        let shots = rows[0].iter().sum::<f64>().round();
        if shots < 1.0 {
            return Err(Error::InvalidCounts("first setting has no shots".into()));
        }
        Self::new(n_qubits, shots as u64, settings, rows)
    }
}

/// Bitstring of basis index `k`, qubit 0 leftmost, `0` = ground.
pub fn to_bitstring(k: usize, n_qubits: usize) -> String {
    (0..n_qubits).map(|q| if k >> (n_qubits - 1 - q) & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn parse_bitstring(s: &str) -> Result<usize> {
    s.chars().try_fold(0usize, |acc, c| match c {
        '0' | 'g' => Ok(acc << 1),
        '1' | 'e' => Ok(acc << 1 | 1),
        _ => Err(Error::InvalidCounts(format!("bad outcome bitstring {s:?}"))),
    })
}

/// `n'[j][k] = shots * <xi'_{j,k}|rho|xi'_{j,k}>`.
pub fn ideal_counts(rho: &DensityMatrix, projectors: &ProjectorSet, shots: u64) -> Result<CountsTensor> {
    if rho.dim() != projectors.dim() {
        return Err(Error::Shape(format!(
            "state of dimension {} against projectors of dimension {}",
            rho.dim(),
            projectors.dim()
        )));
    }
    let n = shots as f64;
    let mut rows = Vec::with_capacity(projectors.n_settings());
    for j in 0..projectors.n_settings() {
        let frame = projectors.frame(j);
        let mut row = Vec::with_capacity(rho.dim());
        for k in 0..rho.dim() {
            let p = rho.expectation(&frame.column(k).into_owned());
            if p < -NEGATIVE_PROBABILITY_TOL {
                return Err(Error::PhysicalityViolation(p));
            }
            row.push(n * p.max(0.0));
        }
        rows.push(row);
    }
    CountsTensor::new(projectors.n_qubits(), shots, projectors.settings().to_vec(), rows)
}

/// Multinomial draw of `shots` outcomes per setting with probabilities
/// `ideal / shots`.
///
/// The generator is ChaCha20 seeded through `seed_from_u64(seed)`. Rows are
/// drawn in tensor order; each multinomial is realised as a chain of
/// conditional binomials over outcomes `0..2^n`.
pub fn sample_counts(ideal: &CountsTensor, seed: u64) -> Result<CountsTensor> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let shots = ideal.shots;
    let mut rows = Vec::with_capacity(ideal.rows.len());
    for row in &ideal.rows {
        let weights: Vec<f64> = row.iter().map(|c| c.max(0.0)).collect();
        let mut mass: f64 = weights.iter().sum();
        if !(mass > 0.0) {
            return Err(Error::InvalidCounts("row with no positive weight".into()));
        }
        let mut remaining = shots;
        let mut out = vec![0.0; row.len()];
        for (k, &w) in weights.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            let draw = if k + 1 == weights.len() || w >= mass {
                remaining
            } else {
                let p = (w / mass).clamp(0.0, 1.0);
                Binomial::new(remaining, p)
                    .map_err(|e| Error::InvalidCounts(format!("binomial draw: {e}")))?
                    .sample(&mut rng)
            };
            out[k] = draw as f64;
            remaining -= draw;
            mass -= w;
        }
        rows.push(out);
    }
    CountsTensor::new(ideal.n_qubits, shots, ideal.settings.clone(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{build_prerotation_set, modified_projectors, PrerotationOptions, PulseTemplate};
    use crate::model::{AxisPair, SystemSpec};
    use crate::qmath::{ComplexMatrix, StateVector};

    fn projectors(j: f64) -> ProjectorSet {
        let set = build_prerotation_set(
            &SystemSpec::two_qubit(j),
            &PulseTemplate::standard(2),
            &[AxisPair::standard(); 2],
            &PrerotationOptions::default(),
        )
        .unwrap();
        modified_projectors(&set)
    }

    #[test]
    fn ground_state_identity_setting() {
        let c = ideal_counts(&DensityMatrix::from_pure(&StateVector::ground(2)), &projectors(0.0), 5000).unwrap();
        assert_eq!(c.row(0), &[5000.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn maximally_mixed_is_flat() {
        let c = ideal_counts(&DensityMatrix::maximally_mixed(4), &projectors(-2.0e7), 5000).unwrap();
        for row in c.rows() {
            for &x in row {
                assert!((x - 1250.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(ideal_counts(&DensityMatrix::maximally_mixed(2), &projectors(0.0), 10).is_err());
    }

    #[test]
    fn unphysical_input_is_reported() {
        let mut m = ComplexMatrix::zeros(4, 4);
        m[(0, 0)] = 1.5.into();
        m[(3, 3)] = (-0.5).into();
        let rho = DensityMatrix::from_matrix_unchecked(m);
        assert!(matches!(ideal_counts(&rho, &projectors(0.0), 10), Err(Error::PhysicalityViolation(_))));
    }

    #[test]
    fn deterministic_row_samples_exactly() {
        let c = ideal_counts(&DensityMatrix::from_pure(&StateVector::ground(2)), &projectors(0.0), 5000).unwrap();
        let s = sample_counts(&c, 7).unwrap();
        assert_eq!(s.row(0), &[5000.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn sampling_is_seeded() {
        let c = ideal_counts(&DensityMatrix::maximally_mixed(4), &projectors(0.0), 5000).unwrap();
        assert_eq!(sample_counts(&c, 3).unwrap(), sample_counts(&c, 3).unwrap());
        assert_ne!(sample_counts(&c, 3).unwrap(), sample_counts(&c, 4).unwrap());
    }

    #[test]
    fn large_sample_within_binomial_bounds() {
        let shots = 10_000_000u64;
        let settings = vec![Setting(vec![crate::evolve::SettingToken::I; 2])];
        let ideal = CountsTensor::new(2, shots, settings, vec![vec![shots as f64 / 4.0; 4]]).unwrap();
        let s = sample_counts(&ideal, 11).unwrap();
        let sigma = (shots as f64 * 0.25 * 0.75).sqrt();
        for &x in s.row(0) {
            assert!((x - shots as f64 / 4.0).abs() < 5.0 * sigma);
        }
    }

    #[test]
    fn bitstrings() {
        assert_eq!(to_bitstring(2, 2), "10");
        assert_eq!(to_bitstring(1, 3), "001");
        assert_eq!(parse_bitstring("110").unwrap(), 6);
        assert!(parse_bitstring("12").is_err());
    }

    #[test]
    fn csv_and_json_roundtrip() {
        let c = ideal_counts(&DensityMatrix::maximally_mixed(4), &projectors(-3.0e7), 5000).unwrap();
        let s = sample_counts(&c, 1).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("setting,outcome,count\nI-I,00,"));
        assert_eq!(CountsTensor::read_csv(buf.as_slice()).unwrap(), s);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<CountsTensor>(&json).unwrap(), s);
    }

    #[test]
    fn rejects_inconsistent_rows() {
        let settings = vec![Setting(vec![crate::evolve::SettingToken::I])];
        assert!(CountsTensor::new(1, 10, settings, vec![vec![3.0, 3.0]]).is_err());
    }
}
