//! JSON file formats. Complex numbers are `[re, im]` pairs, matrices are
//! row-major arrays of rows, and every state on `A (x) B (x) C` is indexed
//! with `A` slowest, then `B`, then `C`.

use advbound::adversary::ConversionProblem;
use advbound::linalg::{basis_vector, ComplexMatrix, StateVector, SubsystemShape, C64};
use advbound::synthesis::AlgorithmPlan;
use advbound::tolerances::Tolerances;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "1";

pub type Complex = [f64; 2];
pub type Vector = Vec<Complex>;
pub type Matrix = Vec<Vec<Complex>>;

pub fn vector_to_wire(v: &StateVector) -> Vector {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn vector_from_wire(v: &[Complex]) -> StateVector {
    StateVector::from_iterator(v.len(), v.iter().map(|&[re, im]| C64::new(re, im)))
}

pub fn matrix_to_wire(m: &ComplexMatrix) -> Matrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

/// Rejects ragged rows; `what` names the field in the message.
pub fn matrix_from_wire(m: &Matrix, what: &str) -> Result<ComplexMatrix, String> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if let Some((i, row)) = m.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(format!("{what}: row {i} has {} entries, row 0 has {cols}", row.len()));
    }
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| C64::new(m[i][j][0], m[i][j][1])))
}

fn square(m: &Matrix, dim: usize, what: &str) -> Result<ComplexMatrix, String> {
    let out = matrix_from_wire(m, what)?;
    if out.nrows() != dim || out.ncols() != dim {
        return Err(format!("{what}: expected {dim}x{dim}, got {}x{}", out.nrows(), out.ncols()));
    }
    Ok(out)
}

pub fn check_schema(version: &str) -> Result<(), String> {
    if version == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(format!("unsupported schema_version {version:?}, expected {SCHEMA_VERSION:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

impl Dims {
    pub fn shape(&self) -> Result<SubsystemShape, String> {
        SubsystemShape::new(self.a, self.b, self.c).map_err(|e| e.to_string())
    }
}

impl From<SubsystemShape> for Dims {
    fn from(s: SubsystemShape) -> Self {
        Dims { a: s.dim_a, b: s.dim_b, c: s.dim_c }
    }
}

/// The idle state on `B`: a basis index or an explicit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Idle {
    Index(usize),
    Vector(Vector),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hermitian_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purify_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connect_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feas_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psd_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure_tol: Option<f64>,
}

impl ToleranceOverrides {
    pub fn apply(&self, base: Tolerances) -> Result<Tolerances, String> {
        let pick = |name: &str, over: Option<f64>, default: f64| match over {
            Some(v) if !(v.is_finite() && v > 0.0) => Err(format!("tolerance {name} must be positive, got {v}")),
            Some(v) => Ok(v),
            None => Ok(default),
        };
        Ok(Tolerances {
            hermitian_tol: pick("hermitian_tol", self.hermitian_tol, base.hermitian_tol)?,
            purify_tol: pick("purify_tol", self.purify_tol, base.purify_tol)?,
            match_tol: pick("match_tol", self.match_tol, base.match_tol)?,
            connect_tol: pick("connect_tol", self.connect_tol, base.connect_tol)?,
            rank_tol: pick("rank_tol", self.rank_tol, base.rank_tol)?,
            feas_tol: pick("feas_tol", self.feas_tol, base.feas_tol)?,
            gap_tol: pick("gap_tol", self.gap_tol, base.gap_tol)?,
            psd_tol: pick("psd_tol", self.psd_tol, base.psd_tol)?,
            structure_tol: pick("structure_tol", self.structure_tol, base.structure_tol)?,
        })
    }

    /// Overrides for every field that differs from `base`.
    pub fn diff(t: &Tolerances, base: &Tolerances) -> Option<Self> {
        let keep = |a: f64, b: f64| (a != b).then_some(a);
        let out = ToleranceOverrides {
            hermitian_tol: keep(t.hermitian_tol, base.hermitian_tol),
            purify_tol: keep(t.purify_tol, base.purify_tol),
            match_tol: keep(t.match_tol, base.match_tol),
            connect_tol: keep(t.connect_tol, base.connect_tol),
            rank_tol: keep(t.rank_tol, base.rank_tol),
            feas_tol: keep(t.feas_tol, base.feas_tol),
            gap_tol: keep(t.gap_tol, base.gap_tol),
            psd_tol: keep(t.psd_tol, base.psd_tol),
            structure_tol: keep(t.structure_tol, base.structure_tol),
        };
        (out != ToleranceOverrides::default()).then_some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: String,
    pub dims: Dims,
    #[serde(rename = "L")]
    pub interaction: Matrix,
    pub idle: Idle,
    pub xi: Vector,
    pub tau: Vector,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subspaces: Vec<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceOverrides>,
}

impl ProblemFile {
    pub fn from_problem(p: &ConversionProblem) -> Self {
        let b = p.shape.dim_b;
        let idle = (0..b)
            .find(|&k| p.idle == basis_vector(b, k))
            .map_or_else(|| Idle::Vector(vector_to_wire(&p.idle)), Idle::Index);
        ProblemFile {
            schema_version: SCHEMA_VERSION.into(),
            dims: p.shape.into(),
            interaction: matrix_to_wire(&p.interaction),
            idle,
            xi: vector_to_wire(&p.xi),
            tau: vector_to_wire(&p.tau),
            subspaces: p.subspaces.iter().map(matrix_to_wire).collect(),
            tolerances: ToleranceOverrides::diff(&p.tolerances, &Tolerances::default()),
        }
    }

    pub fn to_problem(&self) -> Result<ConversionProblem, String> {
        check_schema(&self.schema_version)?;
        let shape = self.dims.shape()?;
        let interaction = square(&self.interaction, shape.ab(), "L")?;
        let idle = match &self.idle {
            Idle::Index(k) if *k < shape.dim_b => basis_vector(shape.dim_b, *k),
            Idle::Index(k) => return Err(format!("idle index {k} is out of range for dim b = {}", shape.dim_b)),
            Idle::Vector(v) => vector_from_wire(v),
        };
        let subspaces = self
            .subspaces
            .iter()
            .enumerate()
            .map(|(k, m)| square(m, shape.dim_a, &format!("subspaces[{k}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let tolerances = self.tolerances.unwrap_or_default().apply(Tolerances::default())?;
        let problem = ConversionProblem::new(shape, interaction, idle, vector_from_wire(&self.xi), vector_from_wire(&self.tau))
            .map_err(|e| e.to_string())?;
        let problem = if subspaces.is_empty() { problem } else { problem.with_subspaces(subspaces).map_err(|e| e.to_string())? };
        Ok(problem.with_tolerances(tolerances))
    }
}

/// A catalyst and/or dual certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pibar: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Matrix>,
}

impl CertificateFile {
    pub fn new(pibar: Option<&ComplexMatrix>, gamma: Option<&ComplexMatrix>) -> Self {
        CertificateFile {
            schema_version: SCHEMA_VERSION.into(),
            pibar: pibar.map(matrix_to_wire),
            gamma: gamma.map(matrix_to_wire),
        }
    }
}

/// Where the final projection acts: the ancilla qubit is the last tensor
/// factor of `C'` and the kept outcome is `|keep>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectorSpec {
    pub ancilla: String,
    pub ancilla_dim: usize,
    pub keep: usize,
}

impl Default for ProjectorSpec {
    fn default() -> Self {
        ProjectorSpec { ancilla: "last".into(), ancilla_dim: 2, keep: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanMetadata {
    pub adv_value: f64,
    pub t_prime: usize,
    pub predicted_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// A compiled plan. `W_j` acts on `B (x) C'` with `C' = C_w (x) qubit`;
/// `L` and the idle state come from the problem file at simulation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub schema_version: String,
    pub dims: Dims,
    pub work_dim: usize,
    pub projector: ProjectorSpec,
    pub metadata: PlanMetadata,
    pub perturbed_input: Vector,
    pub perturbed_target: Vector,
    pub pibar: Matrix,
    pub unitaries: Vec<Matrix>,
}

impl PlanFile {
    pub fn from_plan(plan: &AlgorithmPlan, metadata: PlanMetadata) -> Self {
        PlanFile {
            schema_version: SCHEMA_VERSION.into(),
            dims: plan.shape.into(),
            work_dim: plan.work_dim,
            projector: ProjectorSpec::default(),
            metadata,
            perturbed_input: vector_to_wire(&plan.perturbed_input),
            perturbed_target: vector_to_wire(&plan.perturbed_target),
            pibar: matrix_to_wire(&plan.pibar),
            unitaries: plan.unitaries.iter().map(matrix_to_wire).collect(),
        }
    }

    /// Rebuilds the plan against `problem`, rejecting any shape disagreement.
    pub fn to_plan(&self, problem: &ConversionProblem) -> Result<AlgorithmPlan, String> {
        check_schema(&self.schema_version)?;
        if self.projector != ProjectorSpec::default() {
            return Err(format!("unsupported projector {:?}; only the last-factor qubit kept at |0> is defined", self.projector));
        }
        let shape = self.dims.shape()?;
        if shape != problem.shape {
            return Err(format!("plan dims {:?} do not match problem dims {:?}", self.dims, Dims::from(problem.shape)));
        }
        if self.work_dim < shape.dim_c {
            return Err(format!("work_dim {} is smaller than dim c = {}", self.work_dim, shape.dim_c));
        }
        if self.unitaries.len() < 2 {
            return Err(format!("a plan needs at least two unitaries, got {}", self.unitaries.len()));
        }
        let local = shape.dim_b * 2 * self.work_dim;
        let total = shape.dim_a * local;
        let unitaries = self
            .unitaries
            .iter()
            .enumerate()
            .map(|(j, w)| square(w, local, &format!("unitaries[{j}]")))
            .collect::<Result<Vec<_>, _>>()?;
        for (what, v) in [("perturbed_input", &self.perturbed_input), ("perturbed_target", &self.perturbed_target)] {
            if v.len() != total {
                return Err(format!("{what} has length {}, expected {total}", v.len()));
            }
        }
        Ok(AlgorithmPlan {
            shape,
            work_dim: self.work_dim,
            interaction: problem.interaction.clone(),
            idle: problem.idle.clone(),
            perturbed_input: vector_from_wire(&self.perturbed_input),
            perturbed_target: vector_from_wire(&self.perturbed_target),
            unitaries,
            checkpoints: Vec::new(),
            pibar: square(&self.pibar, shape.ab(), "pibar")?,
        })
    }
}
