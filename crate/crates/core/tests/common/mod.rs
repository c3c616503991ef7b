#![allow(dead_code)]

use advbound::adversary::ConversionProblem;
use advbound::linalg::{apply_local, apply_system, basis_vector, reduce_to_left, ComplexMatrix, StateVector, SubsystemShape, C64};
use advbound::synthesis::RdmSequence;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

pub fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> StateVector {
    let v = StateVector::from_fn(dim, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    v.unscale(v.norm())
}

/// Haar-distributed unitary from the QR of a Gaussian matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> ComplexMatrix {
    let qr = gaussian_matrix(rng, dim, dim).qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = StateVector::from_fn(dim, |i, _| {
        let d = r[(i, i)];
        if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) }
    });
    q * ComplexMatrix::from_diagonal(&phases)
}

/// Random PSD matrix of the given rank and trace.
pub fn random_psd(rng: &mut ChaCha8Rng, dim: usize, rank: usize, trace: f64) -> ComplexMatrix {
    let g = gaussian_matrix(rng, dim, rank);
    let m = &g * g.adjoint();
    let t = m.trace().re;
    m.scale(trace / t)
}

/// A feasible instance produced by running a random two-query algorithm,
/// together with the exact sequence of that algorithm.
pub struct RandomInstance {
    pub problem: ConversionProblem,
    pub sequence: RdmSequence,
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> RandomInstance {
    let dim_a = rng.gen_range(2..=3);
    let dim_b = rng.gen_range(2..=3);
    let dim_c = rng.gen_range(2..=3);
    let shape = SubsystemShape::new(dim_a, dim_b, dim_c).unwrap();
    let ab = shape.ab();

    // identity on A (x) |idle>, a random unitary on the complement
    let active: Vec<usize> = (0..ab).filter(|k| k % dim_b != 0).collect();
    let u = random_unitary(rng, active.len());
    let mut l = ComplexMatrix::zeros(ab, ab);
    for k in (0..ab).filter(|k| k % dim_b == 0) {
        l[(k, k)] = C64::new(1.0, 0.0);
    }
    for (i, &r) in active.iter().enumerate() {
        for (j, &c) in active.iter().enumerate() {
            l[(r, c)] = u[(i, j)];
        }
    }

    let xi = random_state(rng, shape.total()).scale(rng.gen_range(0.5..1.5));
    let env = dim_b * dim_c;
    let mut state = apply_local(&xi, dim_a, env, &random_unitary(rng, env));
    let mut steps = Vec::new();
    for _ in 0..2 {
        steps.push(reduce_to_left(&state, ab, dim_c).unwrap());
        state = apply_system(&state, ab, dim_c, &l);
        state = apply_local(&state, dim_a, env, &random_unitary(rng, env));
    }
    let problem = ConversionProblem::new(shape, l, basis_vector(dim_b, 0), xi, state).unwrap();
    let sequence = RdmSequence::user_supplied(shape, steps).unwrap();
    RandomInstance { problem, sequence }
}
