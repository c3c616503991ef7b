//! The adversary bound of a state-conversion problem and its dual certificate.
//!
//! For a catalyst `pibar` on `A (x) B` the primal program is
//!
//! ```text
//! minimize   tr(pibar) / <xi|xi>
//! subject to tr_B(L pibar L^H - pibar) = tr_BC(|tau><tau| - |xi><xi|),  pibar >= 0
//! ```
//!
//! and the dual maximises `(<tau|G|tau> - <xi|G|xi>) / <xi|xi>` over Hermitian
//! `G` on `A` with `L^H (G (x) I) L - G (x) I <= I`.

use crate::error::{Error, Result};
use crate::linalg::{
    basis_vector, hermitian_basis, hermitize, identity, kron, kron_vec, max_abs, max_eigenvalue, partial_trace, psd_check,
    reduce_to_left, subunitarity_check, ComplexMatrix, StateVector, SubsystemShape,
};
use crate::par::{self, Execution};
use crate::sdp::{self, Constraint, SdpProblem, SdpStatus, SolverSettings};
use crate::tolerances::Tolerances;

/// A state-conversion control problem on `A (x) B (x) C`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversionProblem {
    pub shape: SubsystemShape,
    /// Interaction operator `L` on `A (x) B`.
    pub interaction: ComplexMatrix,
    /// Idle state in `B`.
    pub idle: StateVector,
    pub xi: StateVector,
    pub tau: StateVector,
    /// Optional projectors on `A` commuting with `L`.
    pub subspaces: Vec<ComplexMatrix>,
    pub tolerances: Tolerances,
}

impl ConversionProblem {
    /// Checks dimensions only; use [`validate`] for the structural invariants.
    pub fn new(
        shape: SubsystemShape,
        interaction: ComplexMatrix,
        idle: StateVector,
        xi: StateVector,
        tau: StateVector,
    ) -> Result<Self> {
        let ab = shape.ab();
        if interaction.nrows() != ab || interaction.ncols() != ab {
            return Err(Error::Dimension(format!(
                "L must be {ab}x{ab}, got {}x{}",
                interaction.nrows(),
                interaction.ncols()
            )));
        }
        if idle.len() != shape.dim_b {
            return Err(Error::Dimension(format!("idle state must have length {}", shape.dim_b)));
        }
        for (name, v) in [("xi", &xi), ("tau", &tau)] {
            if v.len() != shape.total() {
                return Err(Error::Dimension(format!(
                    "{name} must have length {}, got {}",
                    shape.total(),
                    v.len()
                )));
            }
        }
        Ok(Self { shape, interaction, idle, xi, tau, subspaces: Vec::new(), tolerances: Tolerances::default() })
    }

    pub fn with_subspaces(mut self, subspaces: Vec<ComplexMatrix>) -> Result<Self> {
        let a = self.shape.dim_a;
        if let Some(p) = subspaces.iter().find(|p| p.nrows() != a || p.ncols() != a) {
            return Err(Error::Dimension(format!("subspace projector is {}x{}, expected {a}x{a}", p.nrows(), p.ncols())));
        }
        self.subspaces = subspaces;
        Ok(self)
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Self {
        self.tolerances = tolerances;
        self
    }

    pub fn xi_norm_sq(&self) -> f64 {
        self.xi.norm_squared()
    }

    /// `tr_BC |xi><xi|`.
    pub fn rdm_xi(&self) -> ComplexMatrix {
        reduce_to_left(&self.xi, self.shape.dim_a, self.shape.dim_b * self.shape.dim_c).expect("shape checked")
    }

    /// `tr_BC |tau><tau|`.
    pub fn rdm_tau(&self) -> ComplexMatrix {
        reduce_to_left(&self.tau, self.shape.dim_a, self.shape.dim_b * self.shape.dim_c).expect("shape checked")
    }

    /// Required change of the reduced state on `A`.
    pub fn target_change(&self) -> ComplexMatrix {
        self.rdm_tau() - self.rdm_xi()
    }

    /// `tr_B(L x L^H - x)` for `x` on `A (x) B`.
    pub fn constraint_map(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let l = &self.interaction;
        let moved = l * x * l.adjoint() - x;
        partial_trace(&moved, &[self.shape.dim_a, self.shape.dim_b], &[0]).expect("shape checked")
    }

    /// Adjoint of [`constraint_map`](Self::constraint_map): `L^H (g (x) I) L - g (x) I`.
    pub fn constraint_adjoint(&self, g: &ComplexMatrix) -> ComplexMatrix {
        let lifted = kron(g, &identity(self.shape.dim_b));
        self.interaction.adjoint() * &lifted * &self.interaction - lifted
    }

    /// `I_A (x) |idle><idle|` on `A (x) B`.
    pub fn idle_projector(&self) -> ComplexMatrix {
        kron(&identity(self.shape.dim_a), &(&self.idle * self.idle.adjoint()))
    }

    /// `<xi| P (x) I_BC |xi>` for a projector on `A`.
    pub fn xi_mass(&self, p: &ComplexMatrix) -> f64 {
        (p * self.rdm_xi()).trace().re
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured quantity the check is decided on.
    pub residual: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, residual: f64, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, residual, detail: detail.into() });
    }
}

/// Checks every structural requirement on a problem and reports each one.
pub fn validate(problem: &ConversionProblem) -> ValidationReport {
    let tol = &problem.tolerances;
    let shape = problem.shape;
    let mut report = ValidationReport::default();

    let sub = subunitarity_check(&problem.interaction, tol.structure_tol);
    report.push(
        "subunitarity",
        sub.ok,
        sub.max_singular_value,
        format!("largest singular value of L is {:.12}", sub.max_singular_value),
    );

    let idle_norm = problem.idle.norm();
    report.push(
        "idle_normalized",
        (idle_norm - 1.0).abs() <= tol.structure_tol,
        (idle_norm - 1.0).abs(),
        format!("idle state has norm {idle_norm:.12}"),
    );

    let mut idle_dev = 0.0f64;
    for a in 0..shape.dim_a {
        let v = kron_vec(&basis_vector(shape.dim_a, a), &problem.idle);
        let moved = &problem.interaction * &v - &v;
        idle_dev = idle_dev.max(moved.norm());
    }
    report.push(
        "idle_triviality",
        idle_dev <= tol.structure_tol,
        idle_dev,
        "max over basis states |a> of |L(|a>|idle>) - |a>|idle>|",
    );

    let xi_norm = problem.xi.norm();
    report.push("xi_nonzero", xi_norm > 0.0, xi_norm, format!("|xi| = {xi_norm:.12}"));

    let lifted_i = identity(shape.dim_b);
    for (k, p) in problem.subspaces.iter().enumerate() {
        let projector_dev = max_abs(&(p * p - p)).max(max_abs(&(p - p.adjoint())));
        report.push(
            format!("subspace_{k}_projector"),
            projector_dev <= tol.structure_tol,
            projector_dev,
            "max entry of |P^2 - P| and |P - P^H|",
        );
        let lifted = kron(p, &lifted_i);
        let commutator = max_abs(&(&lifted * &problem.interaction - &problem.interaction * &lifted));
        report.push(
            format!("subspace_{k}_commutes"),
            commutator <= tol.structure_tol,
            commutator,
            "max entry of |(P (x) I) L - L (P (x) I)|",
        );
    }
    report
}

fn zero_mass_subspaces(problem: &ConversionProblem) -> Vec<&ComplexMatrix> {
    let cutoff = (problem.tolerances.structure_tol * problem.xi.norm()).powi(2);
    problem.subspaces.iter().filter(|p| problem.xi_mass(p) <= cutoff).collect()
}

/// Primal program over the catalyst `pibar` on `A (x) B`.
///
/// The Hermitian-valued constraint on `A` is expanded in the orthonormal basis
/// of [`hermitian_basis`]. Projectors whose subspace carries no `xi` mass add
/// `tr((P (x) I) pibar) = 0`.
pub fn build_primal(problem: &ConversionProblem) -> SdpProblem {
    let shape = problem.shape;
    let ab = shape.ab();
    let norm = problem.xi_norm_sq();
    let change = problem.target_change();
    let mut sdp = SdpProblem::new(identity(ab).unscale(norm));
    for h in hermitian_basis(shape.dim_a) {
        let rhs = (&h * &change).trace().re;
        sdp.add_equality(hermitize(&problem.constraint_adjoint(&h)), rhs);
    }
    for p in zero_mass_subspaces(problem) {
        sdp.add_equality(kron(p, &identity(shape.dim_b)), 0.0);
    }
    sdp
}

/// Dual program, written as a minimisation for the solver.
///
/// Block 0 is the slack `S = I - (L^H (G (x) I) L - G (x) I)`; the free
/// variables are the coordinates of `G` in [`hermitian_basis`], followed by one
/// multiplier per zero-mass subspace constraint of the primal. The solver
/// objective is the negated dual objective.
pub fn build_dual(problem: &ConversionProblem) -> SdpProblem {
    let shape = problem.shape;
    let ab = shape.ab();
    let norm = problem.xi_norm_sq();
    let change = problem.target_change();
    let gamma_basis = hermitian_basis(shape.dim_a);
    let images: Vec<ComplexMatrix> = gamma_basis.iter().map(|h| hermitize(&problem.constraint_adjoint(h))).collect();
    let extra: Vec<ComplexMatrix> = zero_mass_subspaces(problem)
        .into_iter()
        .map(|p| kron(p, &identity(shape.dim_b)))
        .collect();

    let mut sdp = SdpProblem::new(ComplexMatrix::zeros(ab, ab));
    let costs: Vec<f64> = gamma_basis
        .iter()
        .map(|h| -(h * &change).trace().re / norm)
        .chain(extra.iter().map(|_| 0.0))
        .collect();
    sdp.add_free_variables(&costs);

    let eye = identity(ab);
    for k in hermitian_basis(ab) {
        let free: Vec<(usize, f64)> = images
            .iter()
            .chain(&extra)
            .enumerate()
            .map(|(j, img)| (j, (&k * img).trace().re))
            .filter(|(_, v)| *v != 0.0)
            .collect();
        let rhs = (&k * &eye).trace().re;
        sdp.equalities.push(Constraint { terms: vec![(0, k)], free, rhs });
    }
    sdp
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversaryStatus {
    /// Primal and dual agree within the gap tolerance.
    Optimal,
    /// No catalyst exists: the bound is infinite.
    Infeasible { certified: bool },
    /// The primal was solved but no dual point closes the gap.
    Uncertified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceEntry {
    pub index: usize,
    /// `tr((P (x) I_B) pibar)`.
    pub pibar_mass: f64,
    /// `<xi| P (x) I_BC |xi>`.
    pub xi_mass: f64,
    /// `pibar_mass / xi_mass` when the subspace carries `xi` mass.
    pub ratio: Option<f64>,
    /// Zero `xi` mass but nonzero catalyst mass.
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinedReport {
    /// Supremum of the ratios over subspaces with `xi` mass.
    pub refined_value: Option<f64>,
    pub per_subspace: Vec<SubspaceEntry>,
}

impl RefinedReport {
    pub fn has_violation(&self) -> bool {
        self.per_subspace.iter().any(|e| e.violation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryResult {
    /// The bound; `f64::INFINITY` when the primal is infeasible.
    pub value: f64,
    pub pibar: ComplexMatrix,
    pub gamma: ComplexMatrix,
    /// Multipliers of the zero-mass subspace constraints, in subspace order.
    pub subspace_multipliers: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub status: AdversaryStatus,
    pub dual_route: DualRoute,
    /// Max entry of the primal constraint residual at `pibar`.
    pub primal_residual: f64,
    /// `-lambda_max(L^H (G (x) I) L - G (x) I + sum_P nu_P P (x) I - I)`.
    pub gamma_slack: f64,
    pub refined: Option<RefinedReport>,
    pub explanation: Option<String>,
}

impl AdversaryResult {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Solver-free check of a primal catalyst.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalystReport {
    pub residual: f64,
    pub min_eigenvalue: f64,
    /// `tr(pibar) / <xi|xi>`.
    pub objective: f64,
}

impl CatalystReport {
    pub fn feasible(&self, feas_tol: f64, psd_tol: f64) -> bool {
        self.residual <= feas_tol && self.min_eigenvalue >= -psd_tol
    }
}

pub fn check_catalyst(problem: &ConversionProblem, pibar: &ComplexMatrix) -> Result<CatalystReport> {
    let ab = problem.shape.ab();
    if pibar.nrows() != ab || pibar.ncols() != ab {
        return Err(Error::Dimension(format!("catalyst must be {ab}x{ab}")));
    }
    let residual = max_abs(&(problem.constraint_map(pibar) - problem.target_change()));
    let min_eigenvalue = psd_check(pibar, 0.0)?.min_eigenvalue;
    Ok(CatalystReport { residual, min_eigenvalue, objective: pibar.trace().re / problem.xi_norm_sq() })
}

/// Solver-free check of a dual certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaReport {
    /// `lambda_max(L^H (G (x) I) L - G (x) I - I)`; feasible when `<= 0`.
    pub max_eigenvalue: f64,
    pub slack: f64,
    /// `(<tau|G|tau> - <xi|G|xi>) / <xi|xi>`.
    pub objective: f64,
    pub hermitian_deviation: f64,
}

impl GammaReport {
    pub fn feasible(&self, psd_tol: f64, hermitian_tol: f64) -> bool {
        self.slack >= -psd_tol && self.hermitian_deviation <= hermitian_tol
    }
}

pub fn check_gamma(problem: &ConversionProblem, gamma: &ComplexMatrix) -> Result<GammaReport> {
    let a = problem.shape.dim_a;
    if gamma.nrows() != a || gamma.ncols() != a {
        return Err(Error::Dimension(format!("certificate must be {a}x{a}")));
    }
    let hermitian_deviation = crate::linalg::hermitian_deviation(gamma);
    let g = hermitize(gamma);
    let lhs = problem.constraint_adjoint(&g) - identity(problem.shape.ab());
    let max_eigenvalue = max_eigenvalue(&lhs);
    let objective = (&g * problem.target_change()).trace().re / problem.xi_norm_sq();
    Ok(GammaReport { max_eigenvalue, slack: -max_eigenvalue, objective, hermitian_deviation })
}

/// Per-subspace catalyst ratios and their supremum.
pub fn refined_objective(pibar: &ComplexMatrix, problem: &ConversionProblem) -> Result<RefinedReport> {
    if problem.subspaces.is_empty() {
        return Err(Error::InvalidArgument("no refinement subspaces were supplied".into()));
    }
    let tol = &problem.tolerances;
    let eye_b = identity(problem.shape.dim_b);
    let xi_cut = (tol.structure_tol * problem.xi.norm()).powi(2);
    let pibar_cut = tol.feas_tol * pibar.trace().re.abs().max(1.0);
    let per_subspace: Vec<SubspaceEntry> = problem
        .subspaces
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let pibar_mass = (kron(p, &eye_b) * pibar).trace().re;
            let xi_mass = problem.xi_mass(p);
            let (ratio, violation) = if xi_mass > xi_cut {
                (Some(pibar_mass / xi_mass), false)
            } else {
                (None, pibar_mass.abs() > pibar_cut)
            };
            SubspaceEntry { index, pibar_mass, xi_mass, ratio, violation }
        })
        .collect();
    let refined_value = per_subspace
        .iter()
        .filter_map(|e| e.ratio)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
    Ok(RefinedReport { refined_value, per_subspace })
}

/// Projects a near-feasible catalyst onto the primal constraint set by
/// alternating least-norm corrections and eigenvalue clipping, then removes
/// eigenvalues at the noise floor.
fn polish_catalyst(problem: &ConversionProblem, sdp: &SdpProblem, pibar: &ComplexMatrix) -> ComplexMatrix {
    let rows: Vec<&ComplexMatrix> = sdp.equalities.iter().map(|c| &c.terms[0].1).collect();
    let rhs: Vec<f64> = sdp.equalities.iter().map(|c| c.rhs).collect();
    let m = rows.len();
    let gram = nalgebra::DMatrix::from_fn(m, m, |i, j| (rows[i] * rows[j]).trace().re);
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(*v));
    let pinv = |r: &nalgebra::DVector<f64>| {
        let mut z = nalgebra::DVector::zeros(m);
        for k in 0..m {
            let lambda = eig.eigenvalues[k];
            if lambda > 1e-12 * top {
                let v = eig.eigenvectors.column(k);
                z += v * (v.dot(r) / lambda);
            }
        }
        z
    };
    let residual_of = |x: &ComplexMatrix| {
        nalgebra::DVector::from_fn(m, |i, _| rhs[i] - (rows[i] * x).trace().re)
    };
    let score = |x: &ComplexMatrix| {
        let r = residual_of(x).amax();
        let neg = (-psd_check(x, 0.0).map(|p| p.min_eigenvalue).unwrap_or(0.0)).max(0.0);
        r.max(neg)
    };

    let mut best = hermitize(pibar);
    let mut best_score = score(&best);
    let mut x = best.clone();
    for _ in 0..60 {
        let z = pinv(&residual_of(&x));
        for (k, row) in rows.iter().enumerate() {
            x += row.scale(z[k]);
        }
        x = hermitize(&x);
        let (values, vectors) = match crate::linalg::eigh_canonical(&x) {
            Ok(e) => e,
            Err(_) => break,
        };
        let clipped = nalgebra::DVector::from_iterator(
            values.len(),
            values.iter().map(|&l| crate::linalg::C64::new(l.max(0.0), 0.0)),
        );
        x = &vectors * ComplexMatrix::from_diagonal(&clipped) * vectors.adjoint();
        let s = score(&x);
        if s < best_score {
            best_score = s;
            best = x.clone();
        }
        if s <= 1e-15 * problem.xi_norm_sq().max(1.0) {
            break;
        }
    }

    // Eigenvalues at the noise floor would purify to amplitudes of order
    // sqrt(noise) and break the compiled connections. Drop them and restore
    // feasibility with corrections confined to the remaining support.
    let floor = problem.tolerances.rank_tol * problem.xi_norm_sq();
    let Ok((values, vectors)) = crate::linalg::eigh_canonical(&best) else {
        return best;
    };
    let support: Vec<usize> = (0..values.len()).filter(|&k| values[k] > floor).collect();
    let q = ComplexMatrix::from_fn(values.len(), support.len(), |i, k| vectors[(i, support[k])]);
    let mut inner = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        support.len(),
        support.iter().map(|&k| crate::linalg::C64::new(values[k], 0.0)),
    ));
    let inner_rows: Vec<ComplexMatrix> = rows.iter().map(|r| q.adjoint() * *r * &q).collect();
    let inner_gram = nalgebra::DMatrix::from_fn(m, m, |i, j| (&inner_rows[i] * &inner_rows[j]).trace().re);
    let inner_eig = inner_gram.symmetric_eigen();
    let inner_top = inner_eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(*v));
    for _ in 0..4 {
        let r = residual_of(&(&q * &inner * q.adjoint()));
        let mut z = nalgebra::DVector::zeros(m);
        for k in 0..m {
            let lambda = inner_eig.eigenvalues[k];
            if lambda > 1e-12 * inner_top {
                let v = inner_eig.eigenvectors.column(k);
                z += v * (v.dot(&r) / lambda);
            }
        }
        for (k, row) in inner_rows.iter().enumerate() {
            inner += row.scale(z[k]);
        }
        inner = hermitize(&inner);
    }
    let clean = hermitize(&(&q * &inner * q.adjoint()));
    if score(&clean) <= best_score.max(1e-13 * problem.xi_norm_sq().max(1.0)) {
        clean
    } else {
        best
    }
}

/// Where the reported dual certificate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualRoute {
    /// A separate solve of [`build_dual`].
    Separate,
    /// The equality multipliers of the primal solve.
    PrimalMultipliers,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    pub solver: SolverSettings,
    /// Largest `dim_a * dim_b` for which [`build_dual`] is solved on its own;
    /// its row count grows as `(dim_a * dim_b)^2`.
    pub separate_dual_max_ab: usize,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self { solver: SolverSettings::default(), separate_dual_max_ab: 20 }
    }
}

/// A dual point: `gamma` plus one multiplier per zero-mass subspace.
struct DualPoint {
    gamma: ComplexMatrix,
    nu: Vec<f64>,
    slack: f64,
    objective: f64,
}

fn dual_point(problem: &ConversionProblem, coords: &[f64], nu: Vec<f64>) -> Result<DualPoint> {
    let a = problem.shape.dim_a;
    let gamma = crate::linalg::from_hermitian_coordinates(a, &coords[..a * a]);
    let eye_b = identity(problem.shape.dim_b);
    let mut lhs = problem.constraint_adjoint(&gamma) - identity(problem.shape.ab());
    for (p, v) in zero_mass_subspaces(problem).into_iter().zip(&nu) {
        lhs += kron(p, &eye_b).scale(*v);
    }
    let slack = -max_eigenvalue(&hermitize(&lhs));
    let objective = check_gamma(problem, &gamma)?.objective;
    Ok(DualPoint { gamma, nu, slack, objective })
}

/// Solves the primal and dual programs and reports the certified bound.
pub fn adversary_bound(problem: &ConversionProblem, settings: &SolverSettings) -> Result<AdversaryResult> {
    adversary_bound_with(problem, &BoundOptions { solver: *settings, ..BoundOptions::default() })
}

pub fn adversary_bound_with(problem: &ConversionProblem, options: &BoundOptions) -> Result<AdversaryResult> {
    let settings = &options.solver;
    let report = validate(problem);
    if !report.passed() {
        let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        return Err(Error::InvalidArgument(format!("problem fails validation: {}", names.join(", "))));
    }
    let shape = problem.shape;
    let ab = shape.ab();
    let a2 = shape.dim_a * shape.dim_a;
    let norm = problem.xi_norm_sq();

    let primal_sdp = build_primal(problem);
    let primal = sdp::solve(&primal_sdp, settings)?;
    if let SdpStatus::Infeasible { certified } = primal.status {
        return Ok(AdversaryResult {
            value: f64::INFINITY,
            pibar: ComplexMatrix::zeros(ab, ab),
            gamma: ComplexMatrix::zeros(shape.dim_a, shape.dim_a),
            subspace_multipliers: Vec::new(),
            primal_objective: f64::INFINITY,
            dual_objective: f64::INFINITY,
            duality_gap: 0.0,
            status: AdversaryStatus::Infeasible { certified },
            dual_route: DualRoute::PrimalMultipliers,
            primal_residual: f64::INFINITY,
            gamma_slack: f64::NAN,
            refined: None,
            explanation: Some(
                "no positive semidefinite catalyst reproduces the required change of the reduced state on A; \
                 the conversion is impossible in any number of steps"
                    .into(),
            ),
        });
    }
    if primal.status != SdpStatus::Optimal {
        return Err(Error::Solver(format!("primal program ended with status {:?}", primal.status)));
    }

    let pibar = polish_catalyst(problem, &primal_sdp, &primal.x[0]);
    let catalyst = check_catalyst(problem, &pibar)?;
    let value = pibar.trace().re / norm;

    let coords: Vec<f64> = primal.y.iter().map(|v| v * norm).collect();
    let mut best = (dual_point(problem, &coords[..a2], coords[a2..].to_vec())?, DualRoute::PrimalMultipliers);
    let mut notes = Vec::new();
    if ab <= options.separate_dual_max_ab {
        let dual = sdp::solve(&build_dual(problem), settings)?;
        if dual.status == SdpStatus::Optimal {
            let point = dual_point(problem, &dual.free[..a2], dual.free[a2..].to_vec())?;
            if point.slack >= -settings.psd_tol && point.objective >= best.0.objective - settings.gap_tol {
                best = (point, DualRoute::Separate);
            }
        } else {
            notes.push(format!("separate dual program ended with status {:?}", dual.status));
        }
    }
    let (point, dual_route) = best;

    let gap = (value - point.objective).abs();
    let certified = point.slack >= -settings.psd_tol
        && gap <= settings.gap_tol * value.abs().max(1.0)
        && catalyst.feasible(settings.feas_tol, settings.psd_tol);
    if !certified {
        notes.push(format!("dual objective {:e} with slack {:e} leaves gap {gap:e}", point.objective, point.slack));
    }
    let refined = if problem.subspaces.is_empty() { None } else { Some(refined_objective(&pibar, problem)?) };

    Ok(AdversaryResult {
        value,
        pibar,
        gamma: point.gamma,
        subspace_multipliers: point.nu,
        primal_objective: value,
        dual_objective: point.objective,
        duality_gap: gap,
        status: if certified { AdversaryStatus::Optimal } else { AdversaryStatus::Uncertified },
        dual_route,
        primal_residual: catalyst.residual,
        gamma_slack: point.slack,
        refined,
        explanation: if notes.is_empty() { None } else { Some(notes.join("; ")) },
    })
}

/// Bounds for many independent problems, optionally in parallel.
pub fn bound_batch(
    problems: &[ConversionProblem],
    settings: &SolverSettings,
    exec: Execution,
) -> Vec<Result<AdversaryResult>> {
    par::map_slice(exec, problems, |p| adversary_bound(p, settings))
}
