//! Dense complex linear algebra over tensor-product spaces.
//!
//! Tensor factors are ordered left to right with the leftmost factor varying
//! slowest, so a state on `A (x) B (x) C` has amplitude index
//! `(a * dim_b + b) * dim_c + c`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type StateVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Dimensions of the three tensor factors `A`, `B`, `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsystemShape {
    pub dim_a: usize,
    pub dim_b: usize,
    pub dim_c: usize,
}

impl SubsystemShape {
    pub fn new(dim_a: usize, dim_b: usize, dim_c: usize) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 || dim_c == 0 {
            return Err(Error::InvalidArgument(format!(
                "subsystem dimensions must be positive, got ({dim_a}, {dim_b}, {dim_c})"
            )));
        }
        Ok(Self { dim_a, dim_b, dim_c })
    }

    pub fn ab(&self) -> usize {
        self.dim_a * self.dim_b
    }

    pub fn total(&self) -> usize {
        self.dim_a * self.dim_b * self.dim_c
    }

    /// Whether `C` is large enough to purify any operator on `A (x) B`.
    pub fn can_purify_ab(&self) -> bool {
        self.dim_c >= self.ab()
    }
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn kron(x: &ComplexMatrix, y: &ComplexMatrix) -> ComplexMatrix {
    x.kronecker(y)
}

pub fn kron_vec(x: &StateVector, y: &StateVector) -> StateVector {
    x.kronecker(y)
}

/// `I_left (x) op (x) I_right`.
pub fn lift(op: &ComplexMatrix, left: usize, right: usize) -> ComplexMatrix {
    let inner = if right == 1 { op.clone() } else { kron(op, &identity(right)) };
    if left == 1 {
        inner
    } else {
        kron(&identity(left), &inner)
    }
}

pub fn basis_vector(dim: usize, index: usize) -> StateVector {
    let mut v = StateVector::zeros(dim);
    v[index] = ONE;
    v
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_vec(v: &StateVector) -> f64 {
    v.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    max_abs(&(m - m.adjoint()))
}

pub fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn unitarity_deviation(w: &ComplexMatrix) -> f64 {
    max_abs(&(w.adjoint() * w - identity(w.ncols())))
}

pub fn trace_re(m: &ComplexMatrix) -> f64 {
    m.trace().re
}

fn ensure_square(m: &ComplexMatrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() })
    }
}

/// Orthonormal Hermitian basis of `d x d` matrices: diagonal units first, then
/// for each `i < j` the pair `(E_ij + E_ji)/sqrt2`, `i(E_ij - E_ji)/sqrt2`.
pub fn hermitian_basis(d: usize) -> Vec<ComplexMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut basis = Vec::with_capacity(d * d);
    for i in 0..d {
        let mut e = ComplexMatrix::zeros(d, d);
        e[(i, i)] = ONE;
        basis.push(e);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut re = ComplexMatrix::zeros(d, d);
            re[(i, j)] = C64::new(s, 0.0);
            re[(j, i)] = C64::new(s, 0.0);
            basis.push(re);
            let mut im = ComplexMatrix::zeros(d, d);
            im[(i, j)] = C64::new(0.0, s);
            im[(j, i)] = C64::new(0.0, -s);
            basis.push(im);
        }
    }
    basis
}

/// Coordinates of a Hermitian matrix in [`hermitian_basis`].
pub fn hermitian_coordinates(m: &ComplexMatrix) -> Vec<f64> {
    hermitian_basis(m.nrows())
        .iter()
        .map(|h| (h.adjoint() * m).trace().re)
        .collect()
}

pub fn from_hermitian_coordinates(d: usize, coords: &[f64]) -> ComplexMatrix {
    hermitian_basis(d)
        .iter()
        .zip(coords)
        .fold(ComplexMatrix::zeros(d, d), |acc, (h, &c)| acc + h.scale(c))
}

fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
}

/// Partial trace of `rho` over every factor of `dims` not listed in `keep`.
///
/// `keep` holds factor indices; the kept factors stay in their original
/// order.
pub fn partial_trace(rho: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    ensure_square(rho)?;
    let total: usize = dims.iter().product();
    if rho.nrows() != total {
        return Err(Error::Dimension(format!(
            "operator of size {} does not match factor dimensions {:?}",
            rho.nrows(),
            dims
        )));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::Dimension(format!("factor index {bad} out of range")));
    }
    let kept: Vec<bool> = (0..dims.len()).map(|k| keep.contains(&k)).collect();
    let kept_dims: Vec<usize> = (0..dims.len()).filter(|&k| kept[k]).map(|k| dims[k]).collect();
    let traced_dims: Vec<usize> = (0..dims.len()).filter(|&k| !kept[k]).map(|k| dims[k]).collect();
    let dk: usize = kept_dims.iter().product();
    let dt: usize = traced_dims.iter().product();

    // full index of (kept multi-index, traced multi-index)
    let mut compose = vec![0usize; dk * dt];
    let mut kd = vec![0; kept_dims.len()];
    let mut td = vec![0; traced_dims.len()];
    for i in 0..dk {
        digits(i, &kept_dims, &mut kd);
        for t in 0..dt {
            digits(t, &traced_dims, &mut td);
            let (mut ki, mut ti, mut full) = (0, 0, 0);
            for k in 0..dims.len() {
                let d = if kept[k] {
                    ki += 1;
                    kd[ki - 1]
                } else {
                    ti += 1;
                    td[ti - 1]
                };
                full = full * dims[k] + d;
            }
            compose[i * dt + t] = full;
        }
    }

    let mut out = ComplexMatrix::zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = ZERO;
            for t in 0..dt {
                acc += rho[(compose[i * dt + t], compose[j * dt + t])];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Reduced operator on the left factor of `|v><v|` for `v` on `left (x) right`.
pub fn reduce_to_left(v: &StateVector, left: usize, right: usize) -> Result<ComplexMatrix> {
    if v.len() != left * right {
        return Err(Error::Dimension(format!(
            "vector of length {} does not split as {left} x {right}",
            v.len()
        )));
    }
    let m = ComplexMatrix::from_fn(left, right, |i, j| v[i * right + j]);
    Ok(&m * m.adjoint())
}

/// Applies `I_sys (x) w` to `v` on `sys (x) env`.
pub fn apply_local(v: &StateVector, sys_dim: usize, env_dim: usize, w: &ComplexMatrix) -> StateVector {
    assert_eq!(v.len(), sys_dim * env_dim);
    assert_eq!(w.nrows(), env_dim);
    // columns of `m` are the environment vectors attached to each system index
    let m = ComplexMatrix::from_fn(env_dim, sys_dim, |e, s| v[s * env_dim + e]);
    let out = w * m;
    StateVector::from_fn(sys_dim * env_dim, |k, _| out[(k % env_dim, k / env_dim)])
}

/// Applies `op (x) I_env` to `v` on `sys (x) env`.
pub fn apply_system(v: &StateVector, sys_dim: usize, env_dim: usize, op: &ComplexMatrix) -> StateVector {
    assert_eq!(v.len(), sys_dim * env_dim);
    assert_eq!(op.ncols(), sys_dim);
    let m = ComplexMatrix::from_fn(sys_dim, env_dim, |s, e| v[s * env_dim + e]);
    let out = op * m;
    StateVector::from_fn(op.nrows() * env_dim, |k, _| out[(k / env_dim, k % env_dim)])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdReport {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
}

pub fn psd_check(m: &ComplexMatrix, tol: f64) -> Result<PsdReport> {
    ensure_square(m)?;
    if m.nrows() == 0 {
        return Ok(PsdReport { is_psd: true, min_eigenvalue: 0.0 });
    }
    let (eig, _) = hermitian_eigen(m);
    let min_eigenvalue = eig.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PsdReport { is_psd: min_eigenvalue >= -tol, min_eigenvalue })
}

pub fn max_eigenvalue(m: &ComplexMatrix) -> f64 {
    hermitian_eigen(m).0.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Eigenvalues and orthonormal eigenvectors of the Hermitian part of `m`.
///
/// nalgebra's complex `symmetric_eigen` can return a wrong basis when the
/// spectrum is exactly degenerate, so its output only seeds cyclic complex
/// Jacobi sweeps on `V^H m V`. When the seed is already diagonal the sweeps
/// cost a single scan.
pub fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let h = hermitize(m);
    let n = h.nrows();
    let mut v = h.clone().symmetric_eigen().eigenvectors;
    let mut a = hermitize(&(v.adjoint() * &h * &v));
    let scale = h.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    let target = f64::EPSILON * scale;
    for _ in 0..64 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(a[(p, q)].norm());
            }
        }
        if off <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let b = apq.norm();
                if b <= target {
                    continue;
                }
                // diag(1, e^{-i phi}) makes the pivot real, then a real rotation
                let phase = apq / b;
                let theta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * b);
                let t = if theta == 0.0 { 1.0 } else { theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt()) };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let (up, uq) = (C64::new(-s, 0.0) * phase.conj(), C64::new(c, 0.0) * phase.conj());
                for k in 0..n {
                    let (x, y) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = x * c + y * up;
                    a[(k, q)] = x * s + y * uq;
                    let (x, y) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = x * c + y * up;
                    v[(k, q)] = x * s + y * uq;
                }
                for k in 0..n {
                    let (x, y) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = x * c + y * up.conj();
                    a[(q, k)] = x * s + y * uq.conj();
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
            }
        }
    }
    ((0..n).map(|k| a[(k, k)].re).collect(), v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubunitarityReport {
    pub ok: bool,
    pub max_singular_value: f64,
}

pub fn subunitarity_check(l: &ComplexMatrix, tol: f64) -> SubunitarityReport {
    let max_singular_value = max_eigenvalue(&(l.adjoint() * l)).max(0.0).sqrt();
    SubunitarityReport { ok: max_singular_value <= 1.0 + tol, max_singular_value }
}

fn lexicographic(a: &[C64], b: &[C64]) -> Ordering {
    const EPS: f64 = 1e-12;
    for (x, y) in a.iter().zip(b) {
        for (p, q) in [(x.re, y.re), (x.im, y.im)] {
            if (p - q).abs() > EPS {
                return p.partial_cmp(&q).unwrap_or(Ordering::Equal);
            }
        }
    }
    Ordering::Equal
}

/// Eigendecomposition of a Hermitian matrix in canonical form.
///
/// Eigenvalues are sorted descending; near-equal eigenvalues are ordered by
/// descending lexicographic comparison of their eigenvectors. Each eigenvector
/// has its first non-negligible component real and positive.
pub fn eigh_canonical(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    ensure_square(m)?;
    let n = m.nrows();
    let (eigenvalues, eigenvectors) = hermitian_eigen(m);
    let scale = eigenvalues.iter().fold(0.0f64, |acc, l| acc.max(l.abs())).max(1.0);

    let mut pairs: Vec<(f64, Vec<C64>)> = (0..n)
        .map(|k| {
            let mut v: Vec<C64> = eigenvectors.column(k).iter().copied().collect();
            let vmax = v.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
            if let Some(first) = v.iter().copied().find(|z| z.norm() > 1e-10 * vmax) {
                let phase = first.conj() / first.norm();
                v.iter_mut().for_each(|z| *z *= phase);
            }
            (eigenvalues[k], v)
        })
        .collect();

    let tie = 1e-12 * scale;
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (pairs[end - 1].0 - pairs[end].0).abs() <= tie {
            end += 1;
        }
        pairs[start..end].sort_by(|a, b| lexicographic(&b.1, &a.1));
        start = end;
    }

    let values = pairs.iter().map(|p| p.0).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, k| pairs[k].1[i]);
    Ok((values, vectors))
}

pub fn numerical_rank(eigenvalues: &[f64], rank_tol: f64) -> usize {
    let top = eigenvalues.iter().copied().fold(0.0f64, f64::max);
    if top <= 0.0 {
        return 0;
    }
    eigenvalues.iter().filter(|&&l| l > rank_tol * top).count()
}

/// Canonical purification `sum_i sqrt(lambda_i) |u_i> (x) |i>` of a PSD operator.
///
/// The returned vector lives on `sys (x) env` with `sys = rho.nrows()`.
/// Eigenvalues at or below `rank_tol * lambda_max` are treated as zero.
pub fn purify(rho: &ComplexMatrix, env_dim: usize, purify_tol: f64, rank_tol: f64) -> Result<StateVector> {
    ensure_square(rho)?;
    let n = rho.nrows();
    let (values, vectors) = eigh_canonical(rho)?;
    let top = values.iter().copied().fold(0.0f64, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if n > 0 && min < -purify_tol * top.max(1.0) {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let rank = numerical_rank(&values, rank_tol);
    if env_dim < rank {
        return Err(Error::EnvironmentTooSmall { env_dim, rank });
    }
    // eigenvalues under the rank cut are rounding noise; their square roots
    // would be far larger than the noise itself
    let cut = rank_tol * top;
    let mut out = StateVector::zeros(n * env_dim);
    for (k, &lambda) in values.iter().enumerate().take(env_dim) {
        if lambda <= cut {
            continue;
        }
        let w = lambda.sqrt();
        for s in 0..n {
            out[s * env_dim + k] += vectors[(s, k)] * w;
        }
    }
    Ok(out)
}

/// Householder reflectors `H_i = I - beta_i v_i v_i^H` with
/// `H_k ... H_1 m = [r; 0]`.
struct Reflectors {
    vs: Vec<(StateVector, f64)>,
    r: ComplexMatrix,
}

impl Reflectors {
    fn of(m: &ComplexMatrix) -> Self {
        let (rows, cols) = m.shape();
        let k = rows.min(cols);
        let mut work = m.clone();
        let mut vs = Vec::with_capacity(k);
        for i in 0..k {
            let x = work.view((i, i), (rows - i, 1)).clone_owned();
            let norm = x.norm();
            let mut v = StateVector::zeros(rows);
            if norm == 0.0 {
                vs.push((v, 0.0));
                continue;
            }
            let phase = if x[(0, 0)].norm() > 0.0 { x[(0, 0)] / x[(0, 0)].norm() } else { ONE };
            let alpha = -phase * norm;
            for r in i..rows {
                v[r] = x[(r - i, 0)];
            }
            v[i] -= alpha;
            let beta = 2.0 / v.norm_squared();
            let vh_w = v.adjoint() * &work;
            work -= (&v * vh_w).scale(beta);
            vs.push((v, beta));
        }
        let r = work.view((0, 0), (k, cols)).clone_owned();
        Self { vs, r }
    }

    /// `x <- Q x` with `Q = H_1 ... H_k`.
    fn apply_q(&self, x: &mut ComplexMatrix) {
        for (v, beta) in self.vs.iter().rev() {
            if *beta != 0.0 {
                let vh_x = v.adjoint() * &*x;
                *x -= (v * vh_x).scale(*beta);
            }
        }
    }

    /// `x <- x Q^H`.
    fn apply_qh_right(&self, x: &mut ComplexMatrix) {
        for (v, beta) in self.vs.iter().rev() {
            if *beta != 0.0 {
                let xv = &*x * v;
                *x -= (xv * v.adjoint()).scale(*beta);
            }
        }
    }
}

/// Unitary `W` on the environment with `(I_sys (x) W)|phi> = |psi>`.
///
/// Both states must reduce to the same operator on `sys`. The environment
/// vectors attached to each system basis state are orthonormalised by
/// Householder QR; the supported parts are matched by the polar factor of
/// the small coupling matrix and the complements by the reflectors' own
/// completion, so `W = Q_psi diag(Omega, I) Q_phi^H`.
pub fn connect_purifications(
    phi: &StateVector,
    psi: &StateVector,
    sys_dim: usize,
    env_dim: usize,
    match_tol: f64,
    connect_tol: f64,
) -> Result<ComplexMatrix> {
    let n = sys_dim * env_dim;
    if phi.len() != n || psi.len() != n {
        return Err(Error::Dimension(format!(
            "states of length {} and {} do not match {sys_dim} x {env_dim}",
            phi.len(),
            psi.len()
        )));
    }
    let rho_phi = reduce_to_left(phi, sys_dim, env_dim)?;
    let rho_psi = reduce_to_left(psi, sys_dim, env_dim)?;
    let residual = max_abs(&(&rho_phi - &rho_psi));
    if residual > match_tol * max_abs(&rho_phi).max(1.0) {
        return Err(Error::ReducedMismatch { residual });
    }

    // column s holds the environment vector attached to system state s
    let frame = |v: &StateVector| Reflectors::of(&ComplexMatrix::from_fn(env_dim, sys_dim, |e, s| v[s * env_dim + e]));
    let f_phi = frame(phi);
    let f_psi = frame(psi);

    let k = sys_dim.min(env_dim);
    let coupling = &f_psi.r * f_phi.r.adjoint();
    let svd = coupling.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Solver("SVD failed in connect_purifications".into())),
    };
    let mut w = identity(env_dim);
    w.view_mut((0, 0), (k, k)).copy_from(&(u * v_t));
    f_phi.apply_qh_right(&mut w);
    f_psi.apply_q(&mut w);

    let err = (apply_local(phi, sys_dim, env_dim, &w) - psi).norm();
    if err > connect_tol * phi.norm().max(1.0) {
        return Err(Error::Connection {
            step: 0,
            reason: format!("connecting unitary misses the target by {err:e}"),
        });
    }
    Ok(w)
}
