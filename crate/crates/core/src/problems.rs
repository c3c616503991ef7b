//! Worked instances with known bounds and hand-derived certificates.
//!
//! Every expected bound here has a closed form that was also reproduced by an
//! independent convex solver (`tests/oracle/adversary_oracle.py`).

use crate::adversary::ConversionProblem;
use crate::error::{Error, Result};
use crate::linalg::{basis_vector, kron, kron_vec, ComplexMatrix, StateVector, SubsystemShape, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedBound {
    pub value: f64,
    pub provenance: &'static str,
}

/// Feasible primal and dual points attaining the expected bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificates {
    pub pibar: ComplexMatrix,
    pub gamma: ComplexMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedInstance {
    pub name: String,
    pub problem: ConversionProblem,
    pub expected_bound: Option<ExpectedBound>,
    pub certificates: Option<Certificates>,
}

const ORACLE_NOTE: &str = "closed form; matches reference convex solver (cvxpy/Clarabel) to 1e-8";

fn real_diag(values: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&StateVector::from_iterator(values.len(), values.iter().map(|&v| C64::new(v, 0.0))))
}

fn ket(dim: usize, i: usize) -> StateVector {
    basis_vector(dim, i)
}

fn projector(v: &StateVector) -> ComplexMatrix {
    v * v.adjoint()
}

/// `sum_x |x>_A |0>_B |0>_C / sqrt(n)` and `sum_x |x>_A |0>_B |x>_C / sqrt(n)`.
fn copy_states(n: usize, b: usize) -> (StateVector, StateVector) {
    let scale = 1.0 / (n as f64).sqrt();
    let mut xi = StateVector::zeros(n * b * n);
    let mut tau = StateVector::zeros(n * b * n);
    for x in 0..n {
        xi += kron_vec(&kron_vec(&ket(n, x), &ket(b, 0)), &ket(n, 0)).scale(scale);
        tau += kron_vec(&kron_vec(&ket(n, x), &ket(b, 0)), &ket(n, x)).scale(scale);
    }
    (xi, tau)
}

/// One-query phase oracle on a qubit input: `L = diag(1, 1, 1, -1)` with idle
/// state `|0>_B`, converting `|+>` on `A` into a Bell pair with `C`.
pub fn deutsch_phase() -> NamedInstance {
    let mut inst = noisy_damp(0.0).expect("p = 0 is in range");
    inst.name = "deutsch_phase".into();
    let x = ComplexMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    if let Some(c) = inst.certificates.as_mut() {
        c.gamma = x.scale(-0.5);
    }
    inst
}

/// Phase oracle marking `x` on `A` when `B` holds `|x + 1>`; `|0>_B` is idle.
/// The target entangles `A` with a copy in `C`. Bound `sqrt(n - 1) / 2`.
pub fn grover_phase(n: usize) -> Result<NamedInstance> {
    if !(2..=8).contains(&n) {
        return Err(Error::InvalidArgument(format!("grover_phase needs 2 <= n <= 8, got {n}")));
    }
    let b = n + 1;
    let shape = SubsystemShape::new(n, b, n)?;
    let mut diag = vec![1.0; n * b];
    for x in 0..n {
        diag[x * b + x + 1] = -1.0;
    }
    let (xi, tau) = copy_states(n, b);
    let problem = ConversionProblem::new(shape, real_diag(&diag), ket(b, 0), xi, tau)?;

    let nf = n as f64;
    let root = (nf - 1.0).sqrt();
    let alpha = (root / (4.0 * nf)).sqrt();
    let beta = (1.0 / (4.0 * nf * root)).sqrt();
    let mut pibar = ComplexMatrix::zeros(n * b, n * b);
    for y in 0..n {
        let v = StateVector::from_fn(n, |x, _| C64::new(if x == y { alpha } else { beta }, 0.0));
        pibar += kron(&projector(&v), &projector(&ket(b, y + 1)));
    }
    let uniform = StateVector::from_element(n, C64::new(1.0 / nf.sqrt(), 0.0));
    let gamma = projector(&uniform).scale(-nf / (2.0 * root));

    Ok(NamedInstance {
        name: format!("grover_phase({n})"),
        problem,
        expected_bound: Some(ExpectedBound { value: root / 2.0, provenance: ORACLE_NOTE }),
        certificates: Some(Certificates { pibar, gamma }),
    })
}

/// The phase-oracle instance with amplitude damping `sqrt(1 - p)` on the
/// active query and a target scaled so the conversion stays reachable.
/// Bound `1 / (2 - p)`.
pub fn noisy_damp(p: f64) -> Result<NamedInstance> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("noisy_damp needs 0 <= p < 1, got {p}")));
    }
    let shape = SubsystemShape::new(2, 2, 2)?;
    let damp = (1.0 - p).sqrt();
    let l = real_diag(&[1.0, damp, 1.0, -damp]);
    let (xi, tau) = copy_states(2, 2);
    let tau = tau.scale((2.0 * (1.0 - p) / (2.0 - p)).sqrt());
    let problem = ConversionProblem::new(shape, l, ket(2, 0), xi, tau)?;

    let weight = 1.0 / (2.0 - p);
    let plus = StateVector::from_element(2, C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
    let pibar = kron(&projector(&plus), &projector(&ket(2, 1))).scale(weight);
    let gamma = -projector(&plus);

    Ok(NamedInstance {
        name: format!("noisy_damp({p})"),
        problem,
        expected_bound: Some(ExpectedBound { value: weight, provenance: ORACLE_NOTE }),
        certificates: Some(Certificates { pibar, gamma }),
    })
}

/// Every named instance at the parameters the oracle was run on.
pub fn corpus() -> Vec<NamedInstance> {
    let mut out = vec![deutsch_phase()];
    out.extend((2..=8).map(|n| grover_phase(n).expect("in range")));
    out.extend([0.1, 0.3, 0.5, 0.9].iter().map(|&p| noisy_damp(p).expect("in range")));
    out
}

/// Looks an instance up by its CLI name, e.g. `grover_phase:4` or `noisy_damp:0.3`.
pub fn by_name(spec: &str) -> Result<NamedInstance> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    let bad = |a: &str| Error::InvalidArgument(format!("cannot parse parameter {a:?} of {name}"));
    match (name, arg) {
        ("deutsch_phase", None) => Ok(deutsch_phase()),
        ("grover_phase", Some(a)) => grover_phase(a.parse().map_err(|_| bad(a))?),
        ("noisy_damp", Some(a)) => noisy_damp(a.parse().map_err(|_| bad(a))?),
        _ => Err(Error::InvalidArgument(format!(
            "unknown instance {spec:?}; expected deutsch_phase, grover_phase:N or noisy_damp:P"
        ))),
    }
}
