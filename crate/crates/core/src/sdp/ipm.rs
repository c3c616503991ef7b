//! Real block-diagonal primal-dual interior-point method.
//!
//! Standard form, with `X = diag(X_1, .., X_p)` and free variables `w`:
//!
//! ```text
//! minimize   <C, X> + c_w . w
//! subject to <A_i, X> + f_i . w = b_i
//!            X_b >= 0
//! ```
//!
//! and its dual `maximize b . y` s.t. `Z = C - sum_i y_i A_i >= 0`,
//! `F^T y = c_w`. Search directions use the HKM scaling with a Mehrotra
//! predictor-corrector step.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::par::{self, Execution};

#[derive(Debug, Clone)]
pub(crate) enum Coeff {
    Dense(DMatrix<f64>),
    /// Entries `(row, col, value)`; both triangles are listed.
    Sparse(Vec<(usize, usize, f64)>),
}

impl Coeff {
    pub(crate) fn from_dense(m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        let nnz = m.iter().filter(|v| **v != 0.0).count();
        if nnz * 4 <= n * n {
            let mut entries = Vec::with_capacity(nnz);
            for c in 0..n {
                for r in 0..n {
                    let v = m[(r, c)];
                    if v != 0.0 {
                        entries.push((r, c, v));
                    }
                }
            }
            Coeff::Sparse(entries)
        } else {
            Coeff::Dense(m)
        }
    }

    fn inner(&self, x: &DMatrix<f64>) -> f64 {
        match self {
            Coeff::Dense(a) => a.dot(x),
            Coeff::Sparse(e) => e.iter().map(|&(r, c, v)| v * x[(r, c)]).sum(),
        }
    }

    fn add_scaled(&self, alpha: f64, out: &mut DMatrix<f64>) {
        match self {
            Coeff::Dense(a) => *out += a * alpha,
            Coeff::Sparse(e) => {
                for &(r, c, v) in e {
                    out[(r, c)] += alpha * v;
                }
            }
        }
    }

    fn scale(&mut self, s: f64) {
        match self {
            Coeff::Dense(a) => *a *= s,
            Coeff::Sparse(e) => e.iter_mut().for_each(|t| t.2 *= s),
        }
    }

    fn to_dense(&self, n: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(n, n);
        self.add_scaled(1.0, &mut out);
        out
    }

    fn inner_coeff(&self, other: &Coeff, n: usize) -> f64 {
        match (self, other) {
            (Coeff::Dense(a), _) => other.inner(a),
            (_, Coeff::Dense(b)) => self.inner(b),
            (Coeff::Sparse(_), Coeff::Sparse(_)) => other.inner(&self.to_dense(n)),
        }
    }

    /// `X A Zinv`.
    fn sandwich(&self, x: &DMatrix<f64>, zinv: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Coeff::Dense(a) => x * a * zinv,
            Coeff::Sparse(e) => {
                let n = x.nrows();
                let mut out = DMatrix::zeros(n, n);
                for &(r, c, v) in e {
                    out.ger(v, &x.column(r), &zinv.row(c).transpose(), 1.0);
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct RealConstraint {
    pub parts: Vec<(usize, Coeff)>,
    pub free: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct RealProblem {
    pub blocks: Vec<usize>,
    pub objective: Vec<DMatrix<f64>>,
    pub constraints: Vec<RealConstraint>,
    pub rhs: Vec<f64>,
    pub free_objective: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    pub max_iter: usize,
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub execution: Execution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RealStatus {
    Optimal,
    Infeasible { certified: bool },
    Unbounded { certified: bool },
    MaxIter,
}

#[derive(Debug, Clone)]
pub(crate) struct RealSolution {
    pub x: Vec<DMatrix<f64>>,
    pub free: Vec<f64>,
    pub y: Vec<f64>,
    pub status: RealStatus,
    pub iterations: usize,
    /// Farkas multipliers proving primal infeasibility, when found.
    pub ray: Option<Vec<f64>>,
}

const STEP_FRACTION: f64 = 0.95;
const STALL_WINDOW: usize = 50;

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    sym(m).symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_eig(m: &DMatrix<f64>) -> f64 {
    sym(m).symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Largest `alpha` keeping `x + alpha dx` positive semidefinite.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(chol) = Cholesky::new(x.clone()) else {
        return 0.0;
    };
    let l = chol.l();
    let Some(half) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(w) = l.solve_lower_triangular(&half.transpose()) else {
        return 0.0;
    };
    let lambda = min_eig(&w);
    if lambda >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lambda
    }
}

fn inverse_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::new(m.clone()).map(|c| c.inverse())
}

fn cholesky_regularized(m: &DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let scale = m.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut delta = 1e-14 * scale;
    for _ in 0..8 {
        let reg = m + DMatrix::identity(m.nrows(), m.ncols()) * delta;
        if let Some(c) = Cholesky::new(reg) {
            return Some(c);
        }
        delta *= 100.0;
    }
    None
}

struct Reduced {
    problem: RealProblem,
    /// Original row index and scale of every kept row.
    rows: Vec<(usize, f64)>,
    /// Columns spanning the identifiable free directions.
    free_basis: DMatrix<f64>,
}

enum Presolve {
    Ready(Reduced),
    Infeasible(Vec<f64>),
    Unbounded,
}

fn constraint_inner(p: &RealProblem, i: usize, j: usize) -> f64 {
    let (ci, cj) = (&p.constraints[i], &p.constraints[j]);
    let mut acc: f64 = ci.free.iter().zip(&cj.free).map(|(a, b)| a * b).sum();
    for (bi, ai) in &ci.parts {
        for (bj, aj) in &cj.parts {
            if bi == bj {
                acc += ai.inner_coeff(aj, p.blocks[*bi]);
            }
        }
    }
    acc
}

/// Normalises rows, drops linearly dependent ones (certifying infeasibility
/// when their right-hand sides disagree) and restricts the free variables to
/// directions the constraints can see.
fn presolve(p: &RealProblem, feas_tol: f64) -> Presolve {
    let m = p.constraints.len();
    let b_scale = 1.0 + p.rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let mut norms = vec![0.0; m];
    for i in 0..m {
        norms[i] = constraint_inner(p, i, i).sqrt();
        if norms[i] == 0.0 && p.rhs[i].abs() > feas_tol * b_scale {
            let mut ray = vec![0.0; m];
            ray[i] = p.rhs[i].signum();
            return Presolve::Infeasible(ray);
        }
    }
    let candidates: Vec<usize> = (0..m).filter(|&i| norms[i] > 0.0).collect();

    // Cholesky with skipped pivots over the normalised Gram matrix.
    let k = candidates.len();
    let gram = DMatrix::from_fn(k, k, |r, c| {
        constraint_inner(p, candidates[r], candidates[c]) / (norms[candidates[r]] * norms[candidates[c]])
    });
    let mut accepted: Vec<usize> = Vec::new();
    let mut lcols: Vec<DVector<f64>> = Vec::new();
    let mut rejected: Vec<usize> = Vec::new();
    for i in 0..k {
        let mut d = gram[(i, i)];
        for col in &lcols {
            d -= col[i] * col[i];
        }
        if d > 1e-10 * gram[(i, i)] {
            let s = d.sqrt();
            let mut col = DVector::zeros(k);
            col[i] = s;
            for r in (i + 1)..k {
                let mut v = gram[(r, i)];
                for c in &lcols {
                    v -= c[r] * c[i];
                }
                col[r] = v / s;
            }
            accepted.push(i);
            lcols.push(col);
        } else {
            rejected.push(i);
        }
    }

    let bn = |i: usize| p.rhs[candidates[i]] / norms[candidates[i]];
    if !rejected.is_empty() {
        let g_kk = DMatrix::from_fn(accepted.len(), accepted.len(), |r, c| gram[(accepted[r], accepted[c])]);
        let chol = cholesky_regularized(&g_kk);
        for &r in &rejected {
            let g = DVector::from_fn(accepted.len(), |a, _| gram[(accepted[a], r)]);
            let coef = match &chol {
                Some(c) => c.solve(&g),
                None => DVector::zeros(accepted.len()),
            };
            let predicted: f64 = accepted.iter().zip(coef.iter()).map(|(&a, c)| c * bn(a)).sum();
            let e = bn(r) - predicted;
            if e.abs() > feas_tol * b_scale {
                let mut ray = vec![0.0; m];
                ray[candidates[r]] = e / norms[candidates[r]];
                for (&a, c) in accepted.iter().zip(coef.iter()) {
                    ray[candidates[a]] -= e * c / norms[candidates[a]];
                }
                return Presolve::Infeasible(ray);
            }
        }
    }

    let rows: Vec<(usize, f64)> = accepted
        .iter()
        .map(|&a| (candidates[a], 1.0 / norms[candidates[a]]))
        .collect();

    // free columns
    let f = p.free_objective.len();
    let fmat = DMatrix::from_fn(rows.len(), f, |r, c| p.constraints[rows[r].0].free[c] * rows[r].1);
    let free_basis = if f == 0 {
        DMatrix::zeros(0, 0)
    } else {
        let eig = (fmat.transpose() * &fmat).symmetric_eigen();
        let top = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(*v));
        let c_scale = 1.0 + p.free_objective.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut keep = Vec::new();
        for j in 0..f {
            let v = eig.eigenvectors.column(j);
            if top > 0.0 && eig.eigenvalues[j] > 1e-12 * top {
                keep.push(j);
            } else {
                let drift: f64 = v.iter().zip(&p.free_objective).map(|(a, b)| a * b).sum();
                if drift.abs() > feas_tol * c_scale {
                    return Presolve::Unbounded;
                }
            }
        }
        DMatrix::from_fn(f, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])])
    };

    let constraints = rows
        .iter()
        .map(|&(i, s)| {
            let src = &p.constraints[i];
            let parts = src
                .parts
                .iter()
                .map(|(b, c)| {
                    let mut c = c.clone();
                    c.scale(s);
                    (*b, c)
                })
                .collect();
            let free = if f == 0 {
                Vec::new()
            } else {
                let row = DVector::from_fn(f, |c, _| src.free[c] * s);
                (free_basis.transpose() * row).iter().copied().collect()
            };
            RealConstraint { parts, free }
        })
        .collect();
    let free_objective = if f == 0 {
        Vec::new()
    } else {
        (free_basis.transpose() * DVector::from_column_slice(&p.free_objective))
            .iter()
            .copied()
            .collect()
    };
    Presolve::Ready(Reduced {
        problem: RealProblem {
            blocks: p.blocks.clone(),
            objective: p.objective.clone(),
            constraints,
            rhs: rows.iter().map(|&(i, s)| p.rhs[i] * s).collect(),
            free_objective,
        },
        rows,
        free_basis,
    })
}

struct Ops<'a> {
    p: &'a RealProblem,
    /// For every block, the constraints touching it with the part index.
    members: Vec<Vec<(usize, usize)>>,
}

impl<'a> Ops<'a> {
    fn new(p: &'a RealProblem) -> Self {
        let mut members = vec![Vec::new(); p.blocks.len()];
        for (i, c) in p.constraints.iter().enumerate() {
            for (k, (b, _)) in c.parts.iter().enumerate() {
                members[*b].push((i, k));
            }
        }
        Self { p, members }
    }

    fn apply(&self, x: &[DMatrix<f64>], w: &[f64]) -> Vec<f64> {
        self.p
            .constraints
            .iter()
            .map(|c| {
                let lin: f64 = c.free.iter().zip(w).map(|(a, b)| a * b).sum();
                lin + c.parts.iter().map(|(b, a)| a.inner(&x[*b])).sum::<f64>()
            })
            .collect()
    }

    fn adjoint(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.p.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (c, &yi) in self.p.constraints.iter().zip(y) {
            for (b, a) in &c.parts {
                a.add_scaled(yi, &mut out[*b]);
            }
        }
        out
    }

    fn adjoint_free(&self, y: &[f64]) -> Vec<f64> {
        let f = self.p.free_objective.len();
        let mut out = vec![0.0; f];
        for (c, &yi) in self.p.constraints.iter().zip(y) {
            for (o, a) in out.iter_mut().zip(&c.free) {
                *o += a * yi;
            }
        }
        out
    }

    fn schur(&self, x: &[DMatrix<f64>], zinv: &[DMatrix<f64>], exec: Execution) -> DMatrix<f64> {
        let m = self.p.constraints.len();
        let rows = par::map_range(exec, m, |i| {
            let mut row = vec![0.0; m];
            for (b, a) in &self.p.constraints[i].parts {
                let g = a.sandwich(&x[*b], &zinv[*b]);
                for &(j, k) in &self.members[*b] {
                    row[j] += self.p.constraints[j].parts[k].1.inner(&g);
                }
            }
            row
        });
        let mut out = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
        out = (&out + out.transpose()) * 0.5;
        out
    }
}

fn dot_blocks(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn frob_blocks(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
    dy: Vec<f64>,
    dw: Vec<f64>,
}

pub(crate) fn solve(problem: &RealProblem, settings: &IpmSettings) -> RealSolution {
    let m_orig = problem.constraints.len();
    let f_orig = problem.free_objective.len();
    let zeros_x = || problem.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect::<Vec<_>>();

    let reduced = match presolve(problem, settings.feas_tol) {
        Presolve::Ready(r) => r,
        Presolve::Infeasible(ray) => {
            return RealSolution {
                x: zeros_x(),
                free: vec![0.0; f_orig],
                y: vec![0.0; m_orig],
                status: RealStatus::Infeasible { certified: true },
                iterations: 0,
                ray: Some(ray),
            }
        }
        Presolve::Unbounded => {
            return RealSolution {
                x: zeros_x(),
                free: vec![0.0; f_orig],
                y: vec![0.0; m_orig],
                status: RealStatus::Unbounded { certified: true },
                iterations: 0,
                ray: None,
            }
        }
    };

    let mut sol = run(&reduced.problem, settings);

    let mut y = vec![0.0; m_orig];
    for (k, &(i, s)) in reduced.rows.iter().enumerate() {
        y[i] = sol.y[k] * s;
    }
    sol.y = y;
    if let Some(ray) = sol.ray.take() {
        let mut full = vec![0.0; m_orig];
        for (k, &(i, s)) in reduced.rows.iter().enumerate() {
            full[i] = ray[k] * s;
        }
        sol.ray = Some(full);
    }
    sol.free = if f_orig == 0 {
        Vec::new()
    } else {
        (&reduced.free_basis * DVector::from_column_slice(&sol.free)).iter().copied().collect()
    };
    sol
}

struct Saved {
    x: Vec<DMatrix<f64>>,
    y: Vec<f64>,
    w: Vec<f64>,
    score: f64,
}

fn run(p: &RealProblem, settings: &IpmSettings) -> RealSolution {
    let ops = Ops::new(p);
    let m = p.constraints.len();
    let f = p.free_objective.len();
    let nblocks = p.blocks.len();
    let total_dim: usize = p.blocks.iter().sum();

    let b_norm = norm(&p.rhs);
    let c_norm = frob_blocks(&p.objective) + norm(&p.free_objective);
    let b_max = p.rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let mut x: Vec<DMatrix<f64>> = p
        .blocks
        .iter()
        .map(|&n| {
            let nf = n as f64;
            DMatrix::identity(n, n) * (10.0f64).max(nf.sqrt()).max(nf * (1.0 + b_max))
        })
        .collect();
    let mut z: Vec<DMatrix<f64>> = p
        .blocks
        .iter()
        .zip(&p.objective)
        .map(|(&n, c)| DMatrix::identity(n, n) * (10.0f64).max((n as f64).sqrt()).max(1.0 + c.norm()))
        .collect();
    let mut y = vec![0.0; m];
    let mut w = vec![0.0; f];

    let mut status = RealStatus::MaxIter;
    let mut ray = None;
    let mut iterations = 0;
    let mut best_pinf = f64::INFINITY;
    let mut best_dinf = f64::INFINITY;
    let mut best_pinf_iter = 0;
    let mut best_dinf_iter = 0;
    let mut saved: Option<Saved> = None;

    for iter in 0..settings.max_iter {
        iterations = iter;
        let ax = ops.apply(&x, &w);
        let rp: Vec<f64> = p.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let aty = ops.adjoint(&y);
        let rd: Vec<DMatrix<f64>> = (0..nblocks).map(|b| &p.objective[b] - &z[b] - &aty[b]).collect();
        let fty = ops.adjoint_free(&y);
        let rw: Vec<f64> = p.free_objective.iter().zip(&fty).map(|(c, v)| c - v).collect();

        let pobj = dot_blocks(&p.objective, &x) + dot(&p.free_objective, &w);
        let dobj = dot(&p.rhs, &y);
        let pinf = norm(&rp) / (1.0 + b_norm);
        let dinf = (frob_blocks(&rd).powi(2) + norm(&rw).powi(2)).sqrt() / (1.0 + c_norm);
        let gap = (pobj - dobj).abs() / pobj.abs().max(1.0);

        if pinf <= 0.01 * settings.feas_tol && dinf <= 0.01 * settings.feas_tol && gap <= 0.01 * settings.gap_tol {
            status = RealStatus::Optimal;
            break;
        }
        // Late iterations can lose accuracy once the Schur complement is
        // badly conditioned; remember the best iterate that already meets the
        // requested tolerances and stop once residuals drift away from it.
        let score = (pinf / settings.feas_tol).max(dinf / settings.feas_tol).max(gap / settings.gap_tol);
        if score <= 1.0 && saved.as_ref().map_or(true, |s| score < s.score) {
            saved = Some(Saved { x: x.clone(), y: y.clone(), w: w.clone(), score });
        } else if saved.as_ref().is_some_and(|s| score > 100.0 * s.score.max(1e-3)) {
            break;
        }

        // infeasibility certificates
        if dobj > 0.0 && norm(&y) > 1e4 * (1.0 + c_norm) {
            let t: Vec<f64> = y.iter().map(|v| v / dobj).collect();
            let at = ops.adjoint(&t);
            let worst = at.iter().map(max_eig).fold(f64::NEG_INFINITY, f64::max);
            if worst <= 1e-8 && norm(&ops.adjoint_free(&t)) <= 1e-8 {
                status = RealStatus::Infeasible { certified: true };
                ray = Some(t);
                break;
            }
        }
        if pobj < 0.0 && frob_blocks(&x) > 1e6 * (1.0 + b_norm) {
            let s = -1.0 / pobj;
            if norm(&ax) * s <= 1e-8 {
                status = RealStatus::Unbounded { certified: true };
                break;
            }
        }
        if pinf < 0.9 * best_pinf {
            best_pinf = pinf;
            best_pinf_iter = iter;
        }
        if dinf < 0.9 * best_dinf {
            best_dinf = dinf;
            best_dinf_iter = iter;
        }
        if iter >= best_pinf_iter + STALL_WINDOW && pinf > 1e3 * settings.feas_tol {
            status = RealStatus::Infeasible { certified: false };
            break;
        }
        if iter >= best_dinf_iter + STALL_WINDOW && dinf > 1e3 * settings.feas_tol {
            status = RealStatus::Unbounded { certified: false };
            break;
        }

        let mu = dot_blocks(&x, &z) / total_dim as f64;
        let Some(zinv) = z.iter().map(inverse_spd).collect::<Option<Vec<_>>>() else {
            break;
        };
        let schur = ops.schur(&x, &zinv, settings.execution);
        let Some(chol) = cholesky_regularized(&schur) else {
            break;
        };
        // With free variables the Newton system is the saddle point
        // [[M, F], [F^T, 0]]; eliminating F through M^-1 loses accuracy once
        // M is badly conditioned, so it is factored as a whole.
        let augmented = if f > 0 {
            let mut k = DMatrix::zeros(m + f, m + f);
            k.view_mut((0, 0), (m, m)).copy_from(&schur);
            for r in 0..m {
                for c in 0..f {
                    k[(r, m + c)] = p.constraints[r].free[c];
                    k[(m + c, r)] = p.constraints[r].free[c];
                }
            }
            let lu = k.clone().lu();
            Some((k, lu))
        } else {
            None
        };
        let direction = |rc: &[DMatrix<f64>]| -> Direction {
            // H = Rc Zinv - X - X Rd Zinv
            let h: Vec<DMatrix<f64>> = (0..nblocks)
                .map(|b| &rc[b] * &zinv[b] - &x[b] - &x[b] * &rd[b] * &zinv[b])
                .collect();
            let ah = ops.apply(&h, &vec![0.0; f]);
            let r1 = DVector::from_iterator(m, rp.iter().zip(&ah).map(|(a, b)| a - b));
            let (dy, dw) = match &augmented {
                Some((k, lu)) => {
                    let mut rhs = DVector::zeros(m + f);
                    rhs.rows_mut(0, m).copy_from(&r1);
                    for (j, v) in rw.iter().enumerate() {
                        rhs[m + j] = *v;
                    }
                    let mut sol = lu.solve(&rhs).unwrap_or_else(|| DVector::zeros(m + f));
                    let resid = &rhs - k * &sol;
                    if let Some(fix) = lu.solve(&resid) {
                        sol += fix;
                    }
                    (sol.rows(0, m).into_owned(), sol.rows(m, f).into_owned())
                }
                None => (chol.solve(&r1), DVector::zeros(0)),
            };
            let dy: Vec<f64> = dy.iter().copied().collect();
            let atdy = ops.adjoint(&dy);
            let dz: Vec<DMatrix<f64>> = (0..nblocks).map(|b| &rd[b] - &atdy[b]).collect();
            let dx: Vec<DMatrix<f64>> = (0..nblocks)
                .map(|b| sym(&(&h[b] + &x[b] * &atdy[b] * &zinv[b])))
                .collect();
            Direction { dx, dz, dy, dw: dw.iter().copied().collect() }
        };

        let step_lengths = |d: &Direction| -> (f64, f64) {
            let ap = (0..nblocks).map(|b| max_step(&x[b], &d.dx[b])).fold(f64::INFINITY, f64::min);
            let ad = (0..nblocks).map(|b| max_step(&z[b], &d.dz[b])).fold(f64::INFINITY, f64::min);
            (ap, ad)
        };

        // predictor
        let rc_aff: Vec<DMatrix<f64>> = p.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        let aff = direction(&rc_aff);
        let (ap_aff, ad_aff) = step_lengths(&aff);
        let (ap_aff, ad_aff) = (ap_aff.min(1.0), ad_aff.min(1.0));
        let mu_aff: f64 = (0..nblocks)
            .map(|b| (&x[b] + &aff.dx[b] * ap_aff).dot(&(&z[b] + &aff.dz[b] * ad_aff)))
            .sum::<f64>()
            / total_dim as f64;
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        // corrector
        let rc: Vec<DMatrix<f64>> = (0..nblocks)
            .map(|b| DMatrix::identity(p.blocks[b], p.blocks[b]) * (sigma * mu) - &aff.dx[b] * &aff.dz[b])
            .collect();
        let dir = direction(&rc);
        let (ap, ad) = step_lengths(&dir);
        let ap = (STEP_FRACTION * ap).min(1.0);
        let ad = (STEP_FRACTION * ad).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            break;
        }

        for b in 0..nblocks {
            x[b] += &dir.dx[b] * ap;
            z[b] += &dir.dz[b] * ad;
        }
        for (wi, d) in w.iter_mut().zip(&dir.dw) {
            *wi += ap * d;
        }
        for (yi, d) in y.iter_mut().zip(&dir.dy) {
            *yi += ad * d;
        }
        iterations = iter + 1;
    }

    if status == RealStatus::MaxIter {
        if let Some(s) = saved {
            return RealSolution { x: s.x, free: s.w, y: s.y, status: RealStatus::Optimal, iterations, ray: None };
        }
    }
    if status == RealStatus::MaxIter {
        // accept the last iterate if it meets the requested tolerances
        let ax = ops.apply(&x, &w);
        let rp: Vec<f64> = p.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let aty = ops.adjoint(&y);
        let rd_norm = (0..nblocks)
            .map(|b| (&p.objective[b] - &z[b] - &aty[b]).norm_squared())
            .sum::<f64>()
            .sqrt();
        let fty = ops.adjoint_free(&y);
        let rw: Vec<f64> = p.free_objective.iter().zip(&fty).map(|(c, v)| c - v).collect();
        let pobj = dot_blocks(&p.objective, &x) + dot(&p.free_objective, &w);
        let dobj = dot(&p.rhs, &y);
        let pinf = norm(&rp) / (1.0 + b_norm);
        let dinf = (rd_norm.powi(2) + norm(&rw).powi(2)).sqrt() / (1.0 + c_norm);
        let gap = (pobj - dobj).abs() / pobj.abs().max(1.0);
        if pinf <= settings.feas_tol && dinf <= settings.feas_tol && gap <= settings.gap_tol {
            status = RealStatus::Optimal;
        }
    }

    RealSolution { x, free: w, y, status, iterations, ray }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> IpmSettings {
        IpmSettings { max_iter: 200, feas_tol: 1e-7, gap_tol: 1e-7, execution: Execution::Sequential }
    }

    fn e(n: usize, r: usize, c: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        m[(r, c)] = 0.5;
        m[(c, r)] += 0.5;
        m
    }

    #[test]
    fn pinned_entry() {
        // min tr X s.t. X_00 = 1
        let p = RealProblem {
            blocks: vec![2],
            objective: vec![DMatrix::identity(2, 2)],
            constraints: vec![RealConstraint { parts: vec![(0, Coeff::from_dense(e(2, 0, 0)))], free: vec![] }],
            rhs: vec![1.0],
            free_objective: vec![],
        };
        let s = solve(&p, &settings());
        assert_eq!(s.status, RealStatus::Optimal);
        assert!((s.x[0][(0, 0)] - 1.0).abs() < 1e-7);
        assert!(s.x[0][(1, 1)].abs() < 1e-7);
        assert!((s.y[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn free_variable_lp() {
        // min w + x00 s.t. x00 - w = 2, x00 >= 0 -> unbounded below? no: w = x00 - 2,
        // objective 2 x00 - 2, minimised at x00 = 0 -> -2.
        let p = RealProblem {
            blocks: vec![1],
            objective: vec![DMatrix::identity(1, 1)],
            constraints: vec![RealConstraint {
                parts: vec![(0, Coeff::Dense(DMatrix::identity(1, 1)))],
                free: vec![-1.0],
            }],
            rhs: vec![2.0],
            free_objective: vec![1.0],
        };
        let s = solve(&p, &settings());
        assert_eq!(s.status, RealStatus::Optimal);
        assert!((s.free[0] + 2.0).abs() < 1e-6);
        assert!((s.y[0] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn dependent_rows_are_dropped() {
        let a = Coeff::from_dense(e(2, 0, 0));
        let mut twice = a.clone();
        twice.scale(2.0);
        let p = RealProblem {
            blocks: vec![2],
            objective: vec![DMatrix::identity(2, 2)],
            constraints: vec![
                RealConstraint { parts: vec![(0, a)], free: vec![] },
                RealConstraint { parts: vec![(0, twice)], free: vec![] },
            ],
            rhs: vec![1.0, 2.0],
            free_objective: vec![],
        };
        let s = solve(&p, &settings());
        assert_eq!(s.status, RealStatus::Optimal);
        assert!((s.x[0][(0, 0)] - 1.0).abs() < 1e-7);

        let mut bad = p.clone();
        bad.rhs[1] = 3.0;
        let s = solve(&bad, &settings());
        assert_eq!(s.status, RealStatus::Infeasible { certified: true });
        let ray = s.ray.unwrap();
        // A^T ray = 0 and b . ray > 0
        assert!((ray[0] + 2.0 * ray[1]).abs() < 1e-12);
        assert!(ray[0] * 1.0 + ray[1] * 3.0 > 0.0);
    }

    #[test]
    fn negative_trace_is_infeasible() {
        let p = RealProblem {
            blocks: vec![2],
            objective: vec![DMatrix::identity(2, 2)],
            constraints: vec![RealConstraint { parts: vec![(0, Coeff::Dense(DMatrix::identity(2, 2)))], free: vec![] }],
            rhs: vec![-1.0],
            free_objective: vec![],
        };
        let s = solve(&p, &settings());
        assert!(matches!(s.status, RealStatus::Infeasible { .. }), "{:?}", s.status);
    }

    #[test]
    fn sparse_and_dense_coefficients_agree() {
        let m = e(4, 1, 3);
        let sparse = Coeff::from_dense(m.clone());
        assert!(matches!(sparse, Coeff::Sparse(_)));
        let dense = Coeff::Dense(m);
        let x = DMatrix::from_fn(4, 4, |i, j| (i * 4 + j) as f64 + 1.0);
        let x = &x * x.transpose();
        let zinv = DMatrix::from_fn(4, 4, |i, j| if i == j { 2.0 } else { 0.1 });
        assert!((sparse.sandwich(&x, &zinv) - dense.sandwich(&x, &zinv)).norm() < 1e-10);
        assert!((sparse.inner(&x) - dense.inner(&x)).abs() < 1e-12);
    }
}
