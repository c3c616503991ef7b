//! Runs a compiled plan on a state vector and measures the outcome.

use crate::adversary::ConversionProblem;
use crate::error::{Error, Result};
use crate::linalg::{identity, kron, StateVector};
use crate::synthesis::{idle_complement_mass, AlgorithmPlan, RdmSequence};

/// The states a run passes through.
///
/// `pre_query[j]` is the state directly before the `(j + 1)`-th application
/// of `L`, so `pre_query[0]` is the state right after `W_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub initial: StateVector,
    pub pre_query: Vec<StateVector>,
    /// State after `W_T`, before projection.
    pub final_state: StateVector,
    /// `P_0` applied to `final_state`.
    pub final_projected: StateVector,
    /// Squared norm after each operation, starting with the input:
    /// input, `W_0`, `L`, `W_1`, ..., `L`, `W_T`, `P_0`.
    pub norms: Vec<f64>,
    /// `<Phi^j| I - P_idle |Phi^j>` for every pre-query state.
    pub idle_mass: Vec<f64>,
    pub work_dim: usize,
    pub pibar_trace: f64,
}

impl SimulationTrace {
    pub fn steps(&self) -> usize {
        self.pre_query.len()
    }

    /// Largest increase of the squared norm between consecutive operations.
    pub fn max_norm_increase(&self) -> f64 {
        self.norms.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// Applies `W_0`, then `L` and `W_j` alternately, then `P_0`.
pub fn run(plan: &AlgorithmPlan, input: &StateVector) -> Result<SimulationTrace> {
    if input.len() != plan.total_dim() {
        return Err(Error::Dimension(format!("input has length {}, plan acts on {}", input.len(), plan.total_dim())));
    }
    let shape = plan.shape;
    let env = plan.env_dim();
    let mut norms = vec![input.norm_squared()];
    let mut pre_query = Vec::with_capacity(plan.steps());
    let mut state = plan.apply_unitary(0, input);
    norms.push(state.norm_squared());
    for j in 1..=plan.steps() {
        pre_query.push(state.clone());
        state = plan.apply_interaction(&state);
        norms.push(state.norm_squared());
        state = plan.apply_unitary(j, &state);
        norms.push(state.norm_squared());
    }
    let final_projected = plan.project_ancilla(&state);
    norms.push(final_projected.norm_squared());
    let idle_mass = pre_query
        .iter()
        .map(|v| idle_complement_mass(v, shape.dim_a, shape.dim_b, env, &plan.idle))
        .collect();
    Ok(SimulationTrace {
        initial: input.clone(),
        pre_query,
        final_state: state,
        final_projected,
        norms,
        idle_mass,
        work_dim: plan.work_dim,
        pibar_trace: plan.pibar_trace(),
    })
}

/// Runs the plan on `xi (x) |0>`.
pub fn run_on_input(plan: &AlgorithmPlan, problem: &ConversionProblem) -> Result<SimulationTrace> {
    run(plan, &plan.embed(&problem.xi)?)
}

fn embedded_target(trace: &SimulationTrace, problem: &ConversionProblem) -> Result<StateVector> {
    crate::synthesis::embed_state(&problem.tau, problem.shape, trace.work_dim)
}

/// `|P_0 E(xi (x) |0>) - tau (x) |0>| / |xi|`, from a run on `xi (x) |0>`.
pub fn final_error(trace: &SimulationTrace, problem: &ConversionProblem) -> Result<f64> {
    let target = embedded_target(trace, problem)?;
    Ok((&trace.final_projected - target).norm() / problem.xi.norm())
}

/// `sqrt(tr(pibar) / T) / |xi|`.
pub fn theoretical_bound(trace: &SimulationTrace, problem: &ConversionProblem) -> f64 {
    (trace.pibar_trace.max(0.0) / trace.steps() as f64).sqrt() / problem.xi.norm()
}

/// Error without the final ancilla projection. Unlike the projected error it
/// is not covered by the one-sided bound; the no-discard variant is expected
/// to stay within twice it.
pub fn unprojected_error(trace: &SimulationTrace, problem: &ConversionProblem) -> Result<f64> {
    let target = embedded_target(trace, problem)?;
    Ok((&trace.final_state - target).norm() / problem.xi.norm())
}

/// `sum_j <Phi^j| I - P_idle |Phi^j> / <xi|xi>` over the pre-query states.
pub fn las_vegas_mass(trace: &SimulationTrace, problem: &ConversionProblem) -> f64 {
    trace.idle_mass.iter().sum::<f64>() / problem.xi_norm_sq()
}

/// `sum_j tr((I - P_idle) pi^j) / <xi|xi>` for a sequence.
pub fn sequence_las_vegas_mass(seq: &RdmSequence, problem: &ConversionProblem) -> f64 {
    let complement = kron(&identity(problem.shape.dim_a), &(identity(problem.shape.dim_b) - &problem.idle * problem.idle.adjoint()));
    seq.steps.iter().map(|p| (&complement * p).trace().re).sum::<f64>() / problem.xi_norm_sq()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceError {
    pub index: usize,
    /// `|P (P_0 E(xi (x) |0>) - tau (x) |0>)| / |P xi|`.
    pub error: Option<f64>,
    /// `sqrt(tr(P pibar) / (T <xi|P|xi>))`.
    pub bound: Option<f64>,
    pub note: Option<String>,
}

/// Normalised error inside each refinement subspace, with its bound.
pub fn per_subspace_error(
    trace: &SimulationTrace,
    plan: &AlgorithmPlan,
    problem: &ConversionProblem,
) -> Result<Vec<SubspaceError>> {
    if problem.subspaces.is_empty() {
        return Err(Error::InvalidArgument("no refinement subspaces were supplied".into()));
    }
    let shape = problem.shape;
    let rest = shape.dim_b * 2 * trace.work_dim;
    let diff = &trace.final_projected - embedded_target(trace, problem)?;
    let eye_b = identity(shape.dim_b);
    let cut = (problem.tolerances.structure_tol * problem.xi.norm()).powi(2);
    let t = trace.steps() as f64;
    Ok(problem
        .subspaces
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let xi_mass = problem.xi_mass(p);
            if xi_mass <= cut {
                return SubspaceError {
                    index,
                    error: None,
                    bound: None,
                    note: Some("subspace carries no xi mass; skipped".into()),
                };
            }
            let restricted = crate::linalg::apply_system(&diff, shape.dim_a, rest, p);
            let pibar_mass = (kron(p, &eye_b) * &plan.pibar).trace().re.max(0.0);
            SubspaceError {
                index,
                error: Some(restricted.norm() / xi_mass.sqrt()),
                bound: Some((pibar_mass / (t * xi_mass)).sqrt()),
                note: None,
            }
        })
        .collect())
}

/// Headline numbers of a run on `xi (x) |0>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub final_error: f64,
    pub theoretical_bound: f64,
    pub las_vegas_mass: f64,
    pub unprojected_error: f64,
}

pub fn metrics(trace: &SimulationTrace, problem: &ConversionProblem) -> Result<Metrics> {
    Ok(Metrics {
        final_error: final_error(trace, problem)?,
        theoretical_bound: theoretical_bound(trace, problem),
        las_vegas_mass: las_vegas_mass(trace, problem),
        unprojected_error: unprojected_error(trace, problem)?,
    })
}
