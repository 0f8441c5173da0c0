use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::counts::{parse_bitstring, to_bitstring, CountsTensor};
use crate::error::{Error, Result};
use crate::qmath::qubits_for_dim;

const COLUMN_SUM_TOL: f64 = 1e-9;
const CONDITION_WARN: f64 = 1e3;
const SINGULAR_RCOND: f64 = 1e-13;

/// Readout confusion `M[observed][prepared]`, column-stochastic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct ConfusionMatrix {
    m: DMatrix<f64>,
    condition: f64,
}

impl TryFrom<Vec<Vec<f64>>> for ConfusionMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidConfusion("matrix must be square".into()));
        }
        ConfusionMatrix::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

impl From<ConfusionMatrix> for Vec<Vec<f64>> {
    fn from(c: ConfusionMatrix) -> Self {
        c.m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

impl ConfusionMatrix {
    /// Validates shape, nonnegativity, unit column sums and invertibility.
    /// Logs a warning when the 2-norm condition number exceeds 1e3.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidConfusion("matrix must be square".into()));
        }
        qubits_for_dim(m.nrows()).map_err(|_| Error::InvalidConfusion(format!("dimension {} is not 2^n", m.nrows())))?;
        if m.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidConfusion("entries must be finite and nonnegative".into()));
        }
        for (j, col) in m.column_iter().enumerate() {
            let s: f64 = col.sum();
            if (s - 1.0).abs() > COLUMN_SUM_TOL {
                return Err(Error::InvalidConfusion(format!("column {j} sums to {s}")));
            }
        }
        let sv = m.singular_values();
        let (max, min) = (sv.max(), sv.min());
        if !(min > SINGULAR_RCOND * max) {
            return Err(Error::SingularConfusion);
        }
        let condition = max / min;
        if condition > CONDITION_WARN {
            log::warn!("confusion matrix is ill-conditioned (condition number {condition:.3e})");
        }
        Ok(Self { m, condition })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// Header of prepared-state bitstrings preceded by `observed`; each row
    /// starts with its observed bitstring.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let n = qubits_for_dim(self.dim())?;
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["observed".to_string()];
        header.extend((0..self.dim()).map(|k| to_bitstring(k, n)));
        out.write_record(&header)?;
        for (i, row) in self.m.row_iter().enumerate() {
            let mut rec = vec![to_bitstring(i, n)];
            rec.extend(row.iter().map(|x| x.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a square matrix under a header of prepared-state bitstrings. A
    /// leading `observed` label column is optional; when present its labels
    /// order the rows.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut input = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = input.headers()?.clone();
        let labelled = headers.get(0).is_some_and(|h| h.eq_ignore_ascii_case("observed"));
        let offset = usize::from(labelled);
        let prepared = headers.iter().skip(offset).map(parse_bitstring).collect::<Result<Vec<_>>>()?;
        let dim = prepared.len();
        let mut m = DMatrix::from_element(dim, dim, f64::NAN);
        for (i, record) in input.records().enumerate() {
            let record = record?;
            if record.len() != dim + offset {
                return Err(Error::InvalidConfusion(format!("row {i} has {} fields", record.len())));
            }
            let observed = if labelled { parse_bitstring(&record[0])? } else { i };
            if observed >= dim {
                return Err(Error::InvalidConfusion(format!("observed label out of range in row {i}")));
            }
            for (c, field) in record.iter().skip(offset).enumerate() {
                m[(observed, prepared[c])] =
                    field.parse().map_err(|_| Error::InvalidConfusion(format!("bad entry {field:?}")))?;
            }
        }
        if m.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidConfusion("matrix is incomplete".into()));
        }
        Self::new(m)
    }
}

/// How mitigated quasi-probabilities are produced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mitigation {
    /// `M^-1 P`; entries may come out slightly negative.
    #[default]
    Inverse,
    /// `M^-1 P` with negatives zeroed and the row renormalized.
    Clamp,
    /// Closest probability vector to `M^-1 P` in the sense of `||M x - P||`,
    /// constrained to the simplex.
    LeastSquares,
}

fn map_rows(counts: &CountsTensor, mut f: impl FnMut(DVector<f64>) -> Result<DVector<f64>>) -> Result<CountsTensor> {
    let n = counts.shots() as f64;
    let rows = counts
        .rows()
        .iter()
        .map(|row| Ok(f(DVector::from_iterator(row.len(), row.iter().map(|c| c / n)))?.iter().map(|p| p * n).collect()))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    CountsTensor::new(counts.n_qubits(), counts.shots(), counts.settings().to_vec(), rows)
}

fn check_dim(m: &ConfusionMatrix, counts: &CountsTensor) -> Result<()> {
    if m.dim() != counts.dim() {
        return Err(Error::Shape(format!("confusion of dimension {} against {} outcomes", m.dim(), counts.dim())));
    }
    Ok(())
}

/// Forward readout model: every probability row `P` becomes `M P`.
pub fn apply_confusion(m: &ConfusionMatrix, counts: &CountsTensor) -> Result<CountsTensor> {
    check_dim(m, counts)?;
    map_rows(counts, |p| Ok(&m.m * p))
}

/// Inverse readout model with [`Mitigation::Inverse`].
pub fn mitigate_confusion(m: &ConfusionMatrix, counts: &CountsTensor) -> Result<CountsTensor> {
    mitigate_confusion_with(m, counts, Mitigation::Inverse)
}

pub fn mitigate_confusion_with(m: &ConfusionMatrix, counts: &CountsTensor, mode: Mitigation) -> Result<CountsTensor> {
    check_dim(m, counts)?;
    let lu = m.m.clone().lu();
    let solve = |p: &DVector<f64>| lu.solve(p).ok_or(Error::SingularConfusion);
    match mode {
        Mitigation::Inverse => map_rows(counts, |p| solve(&p)),
        Mitigation::Clamp => map_rows(counts, |p| {
            let x = solve(&p)?.map(|v| v.max(0.0));
            let s = x.sum();
            if s > 0.0 {
                Ok(x / s)
            } else {
                Ok(DVector::from_element(x.len(), 1.0 / x.len() as f64))
            }
        }),
        Mitigation::LeastSquares => map_rows(counts, |p| Ok(simplex_least_squares(&m.m, &p, project_simplex(&solve(&p)?)))),
    }
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    v.map(|x| (x - tau).max(0.0))
}

/// Projected gradient descent on `||M x - p||^2` over the simplex.
fn simplex_least_squares(m: &DMatrix<f64>, p: &DVector<f64>, start: DVector<f64>) -> DVector<f64> {
    let mtm = m.transpose() * m;
    let mtp = m.transpose() * p;
    let lipschitz = mtm.symmetric_eigenvalues().max().max(f64::MIN_POSITIVE);
    let step = 1.0 / lipschitz;
    let mut x = start;
    for _ in 0..100_000 {
        let grad = &mtm * &x - &mtp;
        let next = project_simplex(&(&x - grad * step));
        let delta = (&next - &x).amax();
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    x
}
