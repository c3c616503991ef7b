//! The universal algorithm: an explicit sequence of reduced density matrices
//! built from a feasible catalyst, and its compilation into unitaries.
//!
//! For `T` steps the sequence is
//!
//! ```text
//! pi^j = ((T - j)/T rho_xi + j/T rho_tau) (x) |idle><idle| + pibar / T,   j = 0..T-1
//! ```
//!
//! which converts the perturbed pair `xi (x) |0> + v/sqrt(T) (x) |1>` into
//! `tau (x) |0> + v/sqrt(T) (x) |1>` exactly, where `v` purifies `pibar`.

use crate::adversary::{check_catalyst, ConversionProblem};
use crate::error::{Error, Result};
use crate::linalg::{
    apply_local, apply_system, connect_purifications, kron, kron_vec, max_abs, psd_check, purify,
    ComplexMatrix, StateVector, SubsystemShape, C64,
};
use crate::par::{self, Execution};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceSource {
    Synthesized,
    UserSupplied,
}

/// Reduced states `pi^0 .. pi^{T-1}` on `A (x) B` just before each query.
#[derive(Debug, Clone, PartialEq)]
pub struct RdmSequence {
    pub steps: Vec<ComplexMatrix>,
    pub shape: SubsystemShape,
    pub source: SequenceSource,
}

impl RdmSequence {
    pub fn user_supplied(shape: SubsystemShape, steps: Vec<ComplexMatrix>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidArgument("a sequence needs at least one step".into()));
        }
        let ab = shape.ab();
        if let Some(m) = steps.iter().find(|m| m.nrows() != ab || m.ncols() != ab) {
            return Err(Error::Dimension(format!("step is {}x{}, expected {ab}x{ab}", m.nrows(), m.ncols())));
        }
        Ok(Self { steps, shape, source: SequenceSource::UserSupplied })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepChoice {
    Epsilon(f64),
    Steps(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisConfig {
    pub choice: StepChoice,
    pub tolerances: Tolerances,
    pub execution: Execution,
}

impl SynthesisConfig {
    pub fn epsilon(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        Ok(Self::with(StepChoice::Epsilon(epsilon)))
    }

    pub fn steps(t_prime: usize) -> Result<Self> {
        if t_prime == 0 {
            return Err(Error::InvalidArgument("step count must be at least 1".into()));
        }
        Ok(Self::with(StepChoice::Steps(t_prime)))
    }

    fn with(choice: StepChoice) -> Self {
        Self { choice, tolerances: Tolerances::default(), execution: Execution::default() }
    }

    pub fn step_count(&self, adv_value: f64) -> Result<usize> {
        match self.choice {
            StepChoice::Epsilon(e) => steps_for_epsilon(adv_value, e),
            StepChoice::Steps(t) => Ok(t),
        }
    }
}

/// `ceil(adv / epsilon^2)`, at least one.
pub fn steps_for_epsilon(adv_value: f64, epsilon: f64) -> Result<usize> {
    if adv_value.is_infinite() {
        return Err(Error::InfiniteBound);
    }
    if !(adv_value >= 0.0) {
        return Err(Error::InvalidArgument(format!("bound must be non-negative, got {adv_value}")));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    // guard against 0.5 / 0.01 evaluating to 50.000000000000004
    let raw = adv_value / (epsilon * epsilon);
    let rounded = raw.round();
    let steps = if (raw - rounded).abs() <= 1e-9 * raw.max(1.0) { rounded } else { raw.ceil() };
    Ok((steps as usize).max(1))
}

/// The interpolating sequence for a feasible catalyst.
pub fn build_rdm_sequence(problem: &ConversionProblem, pibar: &ComplexMatrix, t_prime: usize) -> Result<RdmSequence> {
    if t_prime == 0 {
        return Err(Error::InvalidArgument("step count must be at least 1".into()));
    }
    let tol = &problem.tolerances;
    let catalyst = check_catalyst(problem, pibar)?;
    if catalyst.residual > tol.feas_tol {
        return Err(Error::InfeasibleCatalyst(format!(
            "constraint residual {:e} exceeds {:e}",
            catalyst.residual, tol.feas_tol
        )));
    }
    if catalyst.min_eigenvalue < -tol.psd_tol {
        return Err(Error::InfeasibleCatalyst(format!("catalyst has eigenvalue {:e}", catalyst.min_eigenvalue)));
    }
    let idle = &problem.idle * problem.idle.adjoint();
    let rho_xi = problem.rdm_xi();
    let rho_tau = problem.rdm_tau();
    let t = t_prime as f64;
    let share = pibar.unscale(t);
    let steps = (0..t_prime)
        .map(|j| {
            let j = j as f64;
            let mix = rho_xi.scale((t - j) / t) + rho_tau.scale(j / t);
            kron(&mix, &idle) + &share
        })
        .collect();
    Ok(RdmSequence { steps, shape: problem.shape, source: SequenceSource::Synthesized })
}

/// Per-step and per-pair residuals of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceReport {
    /// Smallest eigenvalue of each step.
    pub min_eigenvalues: Vec<f64>,
    /// `|tr_B pi^{j+1} - tr_B(L pi^j L^H)|_max` for `j = 0..T-2`.
    pub consistency: Vec<f64>,
    /// `|tr_B pi^0 - rho_initial|_max`.
    pub initial_residual: f64,
    /// `|tr_B(L pi^{T-1} L^H) - rho_final|_max`.
    pub final_residual: f64,
}

impl SequenceReport {
    pub fn max_psd_violation(&self) -> f64 {
        self.min_eigenvalues.iter().fold(0.0f64, |a, &l| a.max(-l))
    }

    pub fn max_consistency(&self) -> f64 {
        self.consistency.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_endpoint(&self) -> f64 {
        self.initial_residual.max(self.final_residual)
    }

    /// Index `j` of the first pair `(j, j + 1)` violating the update rule.
    pub fn first_inconsistent(&self, feas_tol: f64) -> Option<usize> {
        self.consistency.iter().position(|&r| r > feas_tol)
    }

    pub fn passed(&self, feas_tol: f64, psd_tol: f64) -> bool {
        self.max_psd_violation() <= psd_tol && self.max_consistency() <= feas_tol && self.max_endpoint() <= feas_tol
    }
}

fn partial_b(problem: &ConversionProblem, m: &ComplexMatrix) -> ComplexMatrix {
    crate::linalg::partial_trace(m, &[problem.shape.dim_a, problem.shape.dim_b], &[0]).expect("shape checked")
}

/// Checks a sequence against given endpoint states on `A`.
pub fn verify_sequence_against(
    seq: &RdmSequence,
    problem: &ConversionProblem,
    initial: &ComplexMatrix,
    target: &ComplexMatrix,
) -> Result<SequenceReport> {
    if seq.steps.is_empty() {
        return Err(Error::InvalidArgument("a sequence needs at least one step".into()));
    }
    let l = &problem.interaction;
    let after: Vec<ComplexMatrix> = seq.steps.iter().map(|p| partial_b(problem, &(l * p * l.adjoint()))).collect();
    let before: Vec<ComplexMatrix> = seq.steps.iter().map(|p| partial_b(problem, p)).collect();
    let min_eigenvalues =
        seq.steps.iter().map(|p| psd_check(p, 0.0).map(|r| r.min_eigenvalue)).collect::<Result<Vec<_>>>()?;
    let consistency = (1..seq.steps.len()).map(|j| max_abs(&(&before[j] - &after[j - 1]))).collect();
    Ok(SequenceReport {
        min_eigenvalues,
        consistency,
        initial_residual: max_abs(&(&before[0] - initial)),
        final_residual: max_abs(&(after.last().expect("non-empty") - target)),
    })
}

/// Checks a sequence against the problem's own endpoints `rho_xi`, `rho_tau`.
pub fn verify_sequence(seq: &RdmSequence, problem: &ConversionProblem) -> Result<SequenceReport> {
    verify_sequence_against(seq, problem, &problem.rdm_xi(), &problem.rdm_tau())
}

/// Checks a synthesized sequence against the endpoints shifted by `tr_B(pibar)/T`.
pub fn verify_synthesized(seq: &RdmSequence, problem: &ConversionProblem, pibar: &ComplexMatrix) -> Result<SequenceReport> {
    let shift = partial_b(problem, pibar).unscale(seq.steps.len() as f64);
    verify_sequence_against(seq, problem, &(problem.rdm_xi() + &shift), &(problem.rdm_tau() + shift))
}

/// Compiled schedule `W_0, L, W_1, L, ..., L, W_T` on `A (x) B (x) C'`.
///
/// `C' = C_w (x) Q` where `C_w` has dimension `max(dim_c, dim_a * dim_b)`, the
/// original `C` sits in its leading basis vectors, and `Q` is the ancilla
/// qubit, the last tensor factor. Every `W` acts on `B (x) C'`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmPlan {
    pub shape: SubsystemShape,
    /// Dimension of `C_w`.
    pub work_dim: usize,
    pub interaction: ComplexMatrix,
    pub idle: StateVector,
    pub perturbed_input: StateVector,
    pub perturbed_target: StateVector,
    pub unitaries: Vec<ComplexMatrix>,
    /// The purifications `Phi^j` the schedule passes through before each query.
    pub checkpoints: Vec<StateVector>,
    pub pibar: ComplexMatrix,
}

impl AlgorithmPlan {
    /// Number of queries `T`.
    pub fn steps(&self) -> usize {
        self.unitaries.len() - 1
    }

    pub fn pibar_trace(&self) -> f64 {
        self.pibar.trace().re
    }

    /// Dimension of `C'`.
    pub fn env_dim(&self) -> usize {
        2 * self.work_dim
    }

    pub fn total_dim(&self) -> usize {
        self.shape.ab() * self.env_dim()
    }

    /// `L (x) I_C'`.
    pub fn apply_interaction(&self, v: &StateVector) -> StateVector {
        apply_system(v, self.shape.ab(), self.env_dim(), &self.interaction)
    }

    /// `I_A (x) W_j`.
    pub fn apply_unitary(&self, j: usize, v: &StateVector) -> StateVector {
        apply_local(v, self.shape.dim_a, self.shape.dim_b * self.env_dim(), &self.unitaries[j])
    }

    /// `P_0`: projection of the ancilla onto `|0>`.
    pub fn project_ancilla(&self, v: &StateVector) -> StateVector {
        StateVector::from_fn(v.len(), |k, _| if k % 2 == 0 { v[k] } else { C64::new(0.0, 0.0) })
    }

    /// `|s> (x) |0>` for a state on `A (x) B (x) C`, with `C` padded into `C_w`.
    pub fn embed(&self, v: &StateVector) -> Result<StateVector> {
        embed_state(v, self.shape, self.work_dim)
    }
}

/// `|s> (x) |0>` on `A (x) B (x) C_w (x) Q` for `s` on `A (x) B (x) C`.
pub fn embed_state(v: &StateVector, shape: SubsystemShape, work_dim: usize) -> Result<StateVector> {
    if v.len() != shape.total() {
        return Err(Error::Dimension(format!("state has length {}, expected {}", v.len(), shape.total())));
    }
    let c = shape.dim_c;
    let mut out = StateVector::zeros(shape.ab() * work_dim * 2);
    for (k, z) in v.iter().enumerate() {
        let (ab, cc) = (k / c, k % c);
        out[(ab * work_dim + cc) * 2] = *z;
    }
    Ok(out)
}

/// Purifies every step and connects consecutive purifications.
pub fn compile_plan(
    problem: &ConversionProblem,
    seq: &RdmSequence,
    pibar: &ComplexMatrix,
    execution: Execution,
) -> Result<AlgorithmPlan> {
    let tol = &problem.tolerances;
    let shape = problem.shape;
    let t_prime = seq.steps.len();
    let report = verify_synthesized(seq, problem, pibar)?;
    if !report.passed(tol.feas_tol, tol.psd_tol) {
        return Err(Error::InfeasibleCatalyst(format!(
            "sequence fails the perturbed endpoint checks: psd {:e}, consistency {:e}, endpoints {:e}",
            report.max_psd_violation(),
            report.max_consistency(),
            report.max_endpoint()
        )));
    }

    let ab = shape.ab();
    let work_dim = shape.dim_c.max(ab);
    let env = 2 * work_dim;
    let sys_env = shape.dim_b * env;
    let scale = 1.0 / (t_prime as f64).sqrt();
    let ket1 = StateVector::from_column_slice(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);

    let v = purify(pibar, work_dim, tol.purify_tol, tol.rank_tol)?;
    let tail = kron_vec(&v, &ket1).scale(scale);
    let perturbed_input = embed_state(&problem.xi, shape, work_dim)? + &tail;
    let perturbed_target = embed_state(&problem.tau, shape, work_dim)? + &tail;

    let checkpoints = par::map_slice(execution, &seq.steps, |pi| purify(pi, env, tol.purify_tol, tol.rank_tol))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let lift = |s: &StateVector| apply_system(s, ab, env, &problem.interaction);
    let unitaries = par::map_range(execution, t_prime + 1, |j| {
        let (from, to) = if j == 0 {
            (perturbed_input.clone(), &checkpoints[0])
        } else if j < t_prime {
            (lift(&checkpoints[j - 1]), &checkpoints[j])
        } else {
            (lift(&checkpoints[t_prime - 1]), &perturbed_target)
        };
        connect_purifications(&from, to, shape.dim_a, sys_env, tol.match_tol, tol.connect_tol).map_err(|e| match e {
            Error::Connection { reason, .. } => Error::Connection { step: j, reason },
            Error::ReducedMismatch { residual } => Error::Connection {
                step: j,
                reason: format!("reduced states on A differ by {residual:e}"),
            },
            other => other,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    Ok(AlgorithmPlan {
        shape,
        work_dim,
        interaction: problem.interaction.clone(),
        idle: problem.idle.clone(),
        perturbed_input,
        perturbed_target,
        unitaries,
        checkpoints,
        pibar: pibar.clone(),
    })
}

/// `<v| I_A (x) (I - |idle><idle|) (x) I_env |v>` for `v` on `A (x) B (x) env`.
pub fn idle_complement_mass(v: &StateVector, dim_a: usize, dim_b: usize, env: usize, idle: &StateVector) -> f64 {
    let mut idle_part = 0.0;
    for a in 0..dim_a {
        for e in 0..env {
            let overlap: C64 = (0..dim_b).map(|b| idle[b].conj() * v[(a * dim_b + b) * env + e]).sum();
            idle_part += overlap.norm_sqr();
        }
    }
    v.norm_squared() - idle_part
}
