//! Problem-specification file format: a single JSON document describing the
//! state, observables, measurements and run parameters. Complex entries are
//! strictly two-element `[re, im]` arrays; matrices are row-major.

use nalgebra::DVector;
use num_complex::Complex64;
use qestim::{CMat, DensityMatrix, GeneratorBasis, KrausMeasurement, Observable, RVec};
use serde::{Deserialize, Serialize};

pub type ComplexEntry = [f64; 2];
pub type MatrixSpec = Vec<Vec<ComplexEntry>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable_x: Option<ObservableSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable_y: Option<ObservableSpec>,
    /// Outcomes, each a list of Kraus operators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement: Option<Vec<Vec<MatrixSpec>>>,
    /// Optional second (retrieval) measurement for sequential runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement_n: Option<Vec<Vec<MatrixSpec>>>,
    #[serde(default)]
    pub params: RunParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSpec {
    Matrix(MatrixSpec),
    Bloch(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableSpec {
    Matrix(MatrixSpec),
    Coords { x0: f64, x: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunParams {
    #[serde(default)]
    pub seed: u64,
    /// Shots per trial in simulation runs.
    #[serde(default = "default_n")]
    pub n: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Grid size for the attainability sweep over w1.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Random instances for the vindication sweep.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Fixed mixing weight; when absent, commands sweep over the grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w1: Option<f64>,
    #[serde(default = "default_estimator")]
    pub estimator: qestim::simulate::EstimatorKind,
}

fn default_n() -> u64 {
    qestim::simulate::DEFAULT_SHOTS
}
fn default_trials() -> usize {
    qestim::simulate::DEFAULT_TRIALS
}
fn default_grid() -> usize {
    101
}
fn default_samples() -> usize {
    1000
}
fn default_tol() -> f64 {
    1e-9
}
fn default_estimator() -> qestim::simulate::EstimatorKind {
    qestim::simulate::EstimatorKind::Linear
}

impl Default for RunParams {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

/// Spec-level error with the offending field named.
#[derive(Debug)]
pub struct SpecError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for SpecError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for SpecError {}

fn err(field: &str, message: impl std::fmt::Display) -> SpecError {
    SpecError {
        field: field.to_string(),
        message: message.to_string(),
    }
}

pub fn parse_matrix(field: &str, m: &MatrixSpec, dim: usize) -> Result<CMat, SpecError> {
    if m.len() != dim {
        return Err(err(field, format!("expected {dim} rows, got {}", m.len())));
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != dim {
            return Err(err(
                field,
                format!("row {i}: expected {dim} entries, got {}", row.len()),
            ));
        }
    }
    Ok(CMat::from_fn(dim, dim, |i, j| {
        Complex64::new(m[i][j][0], m[i][j][1])
    }))
}

pub fn matrix_to_spec(m: &CMat) -> MatrixSpec {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// The fully validated problem: module-level objects ready for computation.
pub struct Problem {
    pub basis: GeneratorBasis,
    pub state: Option<DensityMatrix>,
    pub x: Option<Observable>,
    pub y: Option<Observable>,
    pub measurement: Option<KrausMeasurement>,
    pub measurement_n: Option<KrausMeasurement>,
    pub params: RunParams,
}

impl ProblemSpec {
    pub fn from_file(path: &std::path::Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err("spec", format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| err("spec", e))
    }

    pub fn validate(&self) -> Result<Problem, SpecError> {
        let d = self.dim;
        let basis = GeneratorBasis::new(d).map_err(|e| err("dim", e))?;
        let state = match &self.state {
            None => None,
            Some(StateSpec::Matrix(m)) => {
                let mat = parse_matrix("state", m, d)?;
                Some(DensityMatrix::new(mat).map_err(|e| err("state", e))?)
            }
            Some(StateSpec::Bloch(v)) => {
                if v.len() != basis.len() {
                    return Err(err(
                        "state",
                        format!("bloch vector needs {} entries, got {}", basis.len(), v.len()),
                    ));
                }
                let theta = RVec::from_vec(v.clone());
                Some(
                    basis
                        .state_from_coords(&qestim::BlochCoords(theta))
                        .map_err(|e| err("state", e))?,
                )
            }
        };
        let obs = |field: &str, o: &ObservableSpec| -> Result<Observable, SpecError> {
            let mat = match o {
                ObservableSpec::Matrix(m) => parse_matrix(field, m, d)?,
                ObservableSpec::Coords { x0, x } => {
                    if x.len() != basis.len() {
                        return Err(err(
                            field,
                            format!("coords need {} entries, got {}", basis.len(), x.len()),
                        ));
                    }
                    basis
                        .reconstruct(*x0, &DVector::from_vec(x.clone()))
                        .map_err(|e| err(field, e))?
                }
            };
            Observable::new(mat, &basis).map_err(|e| err(field, e))
        };
        let x = self.observable_x.as_ref().map(|o| obs("observable_x", o)).transpose()?;
        let y = self.observable_y.as_ref().map(|o| obs("observable_y", o)).transpose()?;
        let meas = |field: &str, spec: &Vec<Vec<MatrixSpec>>| -> Result<KrausMeasurement, SpecError> {
            let mut outcomes = Vec::with_capacity(spec.len());
            for (i, ops) in spec.iter().enumerate() {
                let mut parsed = Vec::with_capacity(ops.len());
                for (a, op) in ops.iter().enumerate() {
                    parsed.push(parse_matrix(&format!("{field}[{i}][{a}]"), op, d)?);
                }
                outcomes.push(parsed);
            }
            KrausMeasurement::new(outcomes, d, d).map_err(|e| err(field, e))
        };
        let measurement = self.measurement.as_ref().map(|m| meas("measurement", m)).transpose()?;
        let measurement_n = self
            .measurement_n
            .as_ref()
            .map(|m| meas("measurement_n", m))
            .transpose()?;
        if let Some(w1) = self.params.w1 {
            if !(w1 > 0.0 && w1 < 1.0) {
                return Err(err("params.w1", format!("must lie in (0, 1), got {w1}")));
            }
        }
        Ok(Problem {
            basis,
            state,
            x,
            y,
            measurement,
            measurement_n,
            params: self.params.clone(),
        })
    }
}
