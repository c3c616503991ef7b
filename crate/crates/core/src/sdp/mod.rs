//! Small dense semidefinite programs over the complex Hermitian PSD cone.
//!
//! Problems are stated over complex Hermitian blocks and lowered through the
//! real embedding `[[Re M, -Im M], [Im M, Re M]]`, with every coefficient
//! halved so that objective and constraint values match the complex
//! formulation. Callers never see embedded values.

mod ipm;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_deviation, max_eigenvalue, psd_check, ComplexMatrix, C64};
use crate::par::Execution;

use ipm::{Coeff, IpmSettings, RealConstraint, RealProblem, RealStatus};

/// One linear functional `sum_b tr(A_b X_b) + sum_j f_j w_j` and its bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// `(block index, Hermitian coefficient)` pairs; missing blocks are zero.
    pub terms: Vec<(usize, ComplexMatrix)>,
    /// `(free variable index, coefficient)` pairs.
    pub free: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Constraint {
    pub fn on_block(block: usize, coeff: ComplexMatrix, rhs: f64) -> Self {
        Self { terms: vec![(block, coeff)], free: Vec::new(), rhs }
    }
}

/// `minimize sum_b tr(C_b X_b) + c . w` subject to equalities
/// `<A, X> = b`, inequalities `<G, X> <= h`, every `X_b` PSD and `w` free.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    pub objective: Vec<ComplexMatrix>,
    pub free_objective: Vec<f64>,
    pub equalities: Vec<Constraint>,
    pub inequalities: Vec<Constraint>,
}

impl SdpProblem {
    /// Single PSD block with objective matrix `c`.
    pub fn new(c: ComplexMatrix) -> Self {
        Self::with_blocks(vec![c])
    }

    pub fn with_blocks(objective: Vec<ComplexMatrix>) -> Self {
        Self {
            blocks: objective.iter().map(|c| c.nrows()).collect(),
            objective,
            free_objective: Vec::new(),
            equalities: Vec::new(),
            inequalities: Vec::new(),
        }
    }

    /// Appends free real variables with the given costs; returns the first index.
    pub fn add_free_variables(&mut self, costs: &[f64]) -> usize {
        let first = self.free_objective.len();
        self.free_objective.extend_from_slice(costs);
        first
    }

    /// `tr(a X_0) = b` on the first block.
    pub fn add_equality(&mut self, a: ComplexMatrix, b: f64) {
        self.equalities.push(Constraint::on_block(0, a, b));
    }

    /// `tr(g X_0) <= h` on the first block.
    pub fn add_inequality(&mut self, g: ComplexMatrix, h: f64) {
        self.inequalities.push(Constraint::on_block(0, g, h));
    }

    pub fn validate(&self, hermitian_tol: f64) -> Result<()> {
        if self.blocks.len() != self.objective.len() {
            return Err(Error::Dimension("one objective matrix per block required".into()));
        }
        for (b, c) in self.objective.iter().enumerate() {
            self.check_matrix(b, c, hermitian_tol)?;
        }
        for con in self.equalities.iter().chain(&self.inequalities) {
            for (b, a) in &con.terms {
                if *b >= self.blocks.len() {
                    return Err(Error::Dimension(format!("constraint refers to missing block {b}")));
                }
                self.check_matrix(*b, a, hermitian_tol)?;
            }
            if let Some((j, _)) = con.free.iter().find(|(j, _)| *j >= self.free_objective.len()) {
                return Err(Error::Dimension(format!("constraint refers to missing free variable {j}")));
            }
        }
        Ok(())
    }

    fn check_matrix(&self, block: usize, m: &ComplexMatrix, tol: f64) -> Result<()> {
        let n = self.blocks[block];
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Dimension(format!(
                "block {block} has size {n} but a data matrix is {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let deviation = hermitian_deviation(m);
        if deviation > tol {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(())
    }

    /// Value of a linear functional at `(x, w)`.
    pub fn evaluate(con: &Constraint, x: &[ComplexMatrix], w: &[f64]) -> f64 {
        let mat: f64 = con.terms.iter().map(|(b, a)| (a * &x[*b]).trace().re).sum();
        let lin: f64 = con.free.iter().map(|&(j, f)| f * w[j]).sum();
        mat + lin
    }

    pub fn objective_value(&self, x: &[ComplexMatrix], w: &[f64]) -> f64 {
        let mat: f64 = self.objective.iter().zip(x).map(|(c, x)| (c * x).trace().re).sum();
        mat + self.free_objective.iter().zip(w).map(|(c, v)| c * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iter: usize,
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub psd_tol: f64,
    pub hermitian_tol: f64,
    /// Schur-complement assembly mode; results are identical in both modes.
    pub execution: Execution,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iter: 500,
            feas_tol: 1e-7,
            gap_tol: 1e-7,
            psd_tol: 1e-8,
            hermitian_tol: 1e-8,
            execution: Execution::available(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// `certified` when a Farkas ray was found, otherwise residuals stagnated.
    Infeasible { certified: bool },
    Unbounded { certified: bool },
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub x: Vec<ComplexMatrix>,
    pub free: Vec<f64>,
    /// Multipliers of the equalities.
    pub y: Vec<f64>,
    /// Multipliers of the inequalities (non-positive at optimality).
    pub inequality_multipliers: Vec<f64>,
    pub status: SdpStatus,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub max_constraint_residual: f64,
    pub iterations: usize,
    /// Multipliers `(equalities, inequalities)` of an infeasibility ray.
    pub farkas_ray: Option<(Vec<f64>, Vec<f64>)>,
}

/// Real symmetric embedding `[[Re M, -Im M], [Im M, Re M]]` of a Hermitian matrix.
pub fn embed_hermitian(m: &ComplexMatrix, hermitian_tol: f64) -> Result<DMatrix<f64>> {
    let deviation = hermitian_deviation(m);
    if deviation > hermitian_tol {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(embed_unchecked(m))
}

fn embed_unchecked(m: &ComplexMatrix) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = m[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

fn unembed(y: &DMatrix<f64>) -> ComplexMatrix {
    let n = y.nrows() / 2;
    ComplexMatrix::from_fn(n, n, |r, c| {
        let re = 0.5 * (y[(r, c)] + y[(r + n, c + n)]);
        let im = 0.5 * (y[(r + n, c)] - y[(r, c + n)]);
        C64::new(re, im)
    })
}

fn lower(p: &SdpProblem) -> RealProblem {
    let n_ineq = p.inequalities.len();
    let mut blocks: Vec<usize> = p.blocks.iter().map(|n| 2 * n).collect();
    let mut objective: Vec<DMatrix<f64>> = p.objective.iter().map(|c| embed_unchecked(c) * 0.5).collect();
    for _ in 0..n_ineq {
        blocks.push(2);
        objective.push(DMatrix::zeros(2, 2));
    }
    let f = p.free_objective.len();
    let convert = |con: &Constraint, slack: Option<usize>| {
        let mut parts: Vec<(usize, Coeff)> = con
            .terms
            .iter()
            .map(|(b, a)| (*b, Coeff::from_dense(embed_unchecked(a) * 0.5)))
            .collect();
        if let Some(s) = slack {
            parts.push((p.blocks.len() + s, Coeff::Dense(DMatrix::identity(2, 2) * 0.5)));
        }
        let mut free = vec![0.0; f];
        for &(j, v) in &con.free {
            free[j] += v;
        }
        RealConstraint { parts, free }
    };
    let mut constraints: Vec<RealConstraint> = p.equalities.iter().map(|c| convert(c, None)).collect();
    constraints.extend(p.inequalities.iter().enumerate().map(|(k, c)| convert(c, Some(k))));
    let rhs = p.equalities.iter().chain(&p.inequalities).map(|c| c.rhs).collect();
    RealProblem { blocks, objective, constraints, rhs, free_objective: p.free_objective.clone() }
}

/// Solves the problem with a primal-dual interior-point method.
///
/// Malformed problems are rejected with an error; infeasibility,
/// unboundedness and iteration exhaustion are reported through the status.
pub fn solve(p: &SdpProblem, settings: &SolverSettings) -> Result<SdpSolution> {
    p.validate(settings.hermitian_tol)?;
    let real = lower(p);
    let sol = ipm::solve(
        &real,
        &IpmSettings {
            max_iter: settings.max_iter,
            feas_tol: settings.feas_tol,
            gap_tol: settings.gap_tol,
            execution: settings.execution,
        },
    );

    let x: Vec<ComplexMatrix> = sol.x.iter().take(p.blocks.len()).map(unembed).collect();
    let n_eq = p.equalities.len();
    let y = sol.y[..n_eq].to_vec();
    let inequality_multipliers = sol.y[n_eq..].to_vec();
    let free = sol.free.clone();
    let farkas_ray = sol.ray.as_ref().map(|r| (r[..n_eq].to_vec(), r[n_eq..].to_vec()));

    let mut status = match sol.status {
        RealStatus::Optimal => SdpStatus::Optimal,
        RealStatus::Infeasible { certified } => SdpStatus::Infeasible { certified },
        RealStatus::Unbounded { certified } => SdpStatus::Unbounded { certified },
        RealStatus::MaxIter => SdpStatus::MaxIter,
    };

    let mut solution = SdpSolution {
        x,
        free,
        y,
        inequality_multipliers,
        status,
        primal_objective: 0.0,
        dual_objective: 0.0,
        duality_gap: 0.0,
        max_constraint_residual: 0.0,
        iterations: sol.iterations,
        farkas_ray,
    };
    let report = residual_report(p, &solution);
    solution.primal_objective = report.primal_objective;
    solution.dual_objective = report.dual_objective;
    solution.duality_gap = report.duality_gap;
    solution.max_constraint_residual = report.max_equality_residual.max(report.max_inequality_violation);

    if status == SdpStatus::Optimal
        && !(report.max_equality_residual <= settings.feas_tol
            && report.max_inequality_violation <= settings.feas_tol
            && report.duality_gap <= settings.gap_tol * report.primal_objective.abs().max(1.0)
            && report.min_primal_eigenvalue >= -settings.psd_tol)
    {
        status = SdpStatus::MaxIter;
    }
    solution.status = status;
    Ok(solution)
}

/// Residuals of a candidate solution, recomputed from the problem data alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    pub max_equality_residual: f64,
    pub max_inequality_violation: f64,
    pub min_primal_eigenvalue: f64,
    /// Smallest eigenvalue of `C - sum y A - sum u G` over the blocks.
    pub min_dual_slack_eigenvalue: f64,
    /// `max(0, max u)`: inequality multipliers must be non-positive.
    pub inequality_multiplier_violation: f64,
    /// `max |c_w - F^T y|` over free variables.
    pub free_dual_residual: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
}

pub fn residual_report(p: &SdpProblem, s: &SdpSolution) -> ResidualReport {
    let max_equality_residual = p
        .equalities
        .iter()
        .map(|c| (SdpProblem::evaluate(c, &s.x, &s.free) - c.rhs).abs())
        .fold(0.0, f64::max);
    let max_inequality_violation = p
        .inequalities
        .iter()
        .map(|c| (SdpProblem::evaluate(c, &s.x, &s.free) - c.rhs).max(0.0))
        .fold(0.0, f64::max);
    let min_primal_eigenvalue = s
        .x
        .iter()
        .map(|x| psd_check(x, 0.0).map(|r| r.min_eigenvalue).unwrap_or(f64::NEG_INFINITY))
        .fold(f64::INFINITY, f64::min);

    let mut slack: Vec<ComplexMatrix> = p.objective.clone();
    let mut free_dual: Vec<f64> = p.free_objective.clone();
    let multipliers = p
        .equalities
        .iter()
        .zip(&s.y)
        .chain(p.inequalities.iter().zip(&s.inequality_multipliers));
    for (con, &mult) in multipliers {
        for (b, a) in &con.terms {
            slack[*b] -= a.scale(mult);
        }
        for &(j, f) in &con.free {
            free_dual[j] -= f * mult;
        }
    }
    let min_dual_slack_eigenvalue = slack
        .iter()
        .map(|z| -max_eigenvalue(&(-z)))
        .fold(f64::INFINITY, f64::min);
    let free_dual_residual = free_dual.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let inequality_multiplier_violation = s.inequality_multipliers.iter().fold(0.0f64, |a, &u| a.max(u));

    let primal_objective = p.objective_value(&s.x, &s.free);
    let dual_objective: f64 = p.equalities.iter().zip(&s.y).map(|(c, y)| c.rhs * y).sum::<f64>()
        + p.inequalities.iter().zip(&s.inequality_multipliers).map(|(c, u)| c.rhs * u).sum::<f64>();
    ResidualReport {
        max_equality_residual,
        max_inequality_violation,
        min_primal_eigenvalue,
        min_dual_slack_eigenvalue,
        inequality_multiplier_violation,
        free_dual_residual,
        primal_objective,
        dual_objective,
        duality_gap: (primal_objective - dual_objective).abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, ONE, ZERO};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn unit(n: usize, i: usize, j: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        m[(i, j)] = ONE;
        m
    }

    #[test]
    fn embed_examples() {
        assert_eq!(embed_hermitian(&identity(2), 1e-12).unwrap(), DMatrix::identity(4, 4));
        let m = ComplexMatrix::from_row_slice(2, 2, &[ZERO, c(0.0, 1.0), c(0.0, -1.0), ZERO]);
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0],
        );
        assert_eq!(embed_hermitian(&m, 1e-12).unwrap(), expected);
        assert!(matches!(
            embed_hermitian(&unit(2, 0, 1), 1e-12),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn embedding_round_trips() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.3, -0.7), c(0.3, 0.7), c(-2.0, 0.0)]);
        assert_eq!(unembed(&embed_unchecked(&m)), m);
    }

    #[test]
    fn single_pin_constraint() {
        let mut p = SdpProblem::new(identity(2));
        p.add_equality(unit(2, 0, 0), 1.0);
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.primal_objective - 1.0).abs() < 1e-7);
        assert!((&s.x[0] - unit(2, 0, 0)).iter().all(|z| z.norm() < 1e-6));
        assert!(s.duality_gap <= 1e-7);
    }

    #[test]
    fn negative_trace_is_infeasible() {
        let mut p = SdpProblem::new(identity(2));
        p.add_equality(identity(2), -1.0);
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert!(matches!(s.status, SdpStatus::Infeasible { .. }), "{:?}", s.status);
    }

    #[test]
    fn complex_coupling_constraint() {
        // min tr X s.t. Im(X_01) = 1/2 : optimum X = [[1/2, i/2], [-i/2, 1/2]], value 1
        let mut p = SdpProblem::new(identity(2));
        let mut a = ComplexMatrix::zeros(2, 2);
        a[(0, 1)] = c(0.0, 0.5);
        a[(1, 0)] = c(0.0, -0.5);
        // tr(a X) = Re(i/2 X_10 - i/2 X_01) = Im(X_01)
        p.add_equality(a, 0.5);
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.primal_objective - 1.0).abs() < 1e-7, "{}", s.primal_objective);
        assert!((s.x[0][(0, 1)] - c(0.0, 0.5)).norm() < 1e-6);
    }

    #[test]
    fn inequality_constraints() {
        // min -X_00 s.t. tr X <= 2 -> X = 2 E_00, value -2, multiplier -1
        let mut p = SdpProblem::new(-unit(2, 0, 0));
        p.add_inequality(identity(2), 2.0);
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.primal_objective + 2.0).abs() < 1e-7);
        assert!((s.inequality_multipliers[0] + 1.0).abs() < 1e-6);
        let r = residual_report(&p, &s);
        assert!(r.inequality_multiplier_violation == 0.0);
        assert!(r.min_dual_slack_eigenvalue > -1e-7);
    }

    #[test]
    fn residual_report_is_independent_of_solver() {
        let mut p = SdpProblem::new(identity(2));
        p.add_equality(unit(2, 0, 0), 1.0);
        p.add_equality(identity(2), 1.5);
        let mut s = solve(&p, &SolverSettings::default()).unwrap();
        let r = residual_report(&p, &s);
        assert!(r.max_equality_residual <= 1e-7);
        assert!(r.duality_gap <= 1e-7 * r.primal_objective.abs().max(1.0));

        s.x[0] += unit(2, 0, 0).scale(0.1);
        let r = residual_report(&p, &s);
        assert!((r.max_equality_residual - 0.1).abs() < 1e-6);

        s.x[0] = ComplexMatrix::zeros(2, 2);
        let r = residual_report(&p, &s);
        assert!((r.max_equality_residual - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_malformed_problems() {
        let mut p = SdpProblem::new(identity(2));
        p.add_equality(identity(3), 1.0);
        assert!(matches!(solve(&p, &SolverSettings::default()), Err(Error::Dimension(_))));
        let mut p = SdpProblem::new(identity(2));
        p.add_equality(unit(2, 0, 1), 1.0);
        assert!(matches!(solve(&p, &SolverSettings::default()), Err(Error::NotHermitian { .. })));
    }
}
