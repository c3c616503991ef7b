"""Reference values for the bundled conversion instances.

Solves the primal (minimum-trace catalyst) and the dual (Gamma) programs with
cvxpy, independently of the Rust solver, and prints the optimal values. The
numbers printed here are frozen into `tests/problems.rs` and
`tests/acceptance.rs`; rerun with `python3 adversary_oracle.py` to regenerate.

Index convention: A slowest, then B, then C.
"""
import numpy as np
import cvxpy as cp


def deutsch_phase():
    a, b, c = 2, 2, 2
    L = np.diag([1, 1, 1, -1]).astype(complex)
    xi = np.zeros(a * b * c, complex)
    tau = np.zeros(a * b * c, complex)
    for x in range(a):
        xi[(x * b + 0) * c + 0] = 1 / np.sqrt(2)
        tau[(x * b + 0) * c + x] = 1 / np.sqrt(2)
    return a, b, c, L, xi, tau


def grover_phase(n):
    a, b, c = n, n + 1, n
    diag = []
    for x in range(a):
        for y in range(b):
            diag.append(-1 if y == x + 1 else 1)
    L = np.diag(diag).astype(complex)
    xi = np.zeros(a * b * c, complex)
    tau = np.zeros(a * b * c, complex)
    for x in range(a):
        xi[(x * b + 0) * c + 0] = 1 / np.sqrt(n)
        tau[(x * b + 0) * c + x] = 1 / np.sqrt(n)
    return a, b, c, L, xi, tau


def noisy_damp(p):
    a, b, c, _, xi, tau = deutsch_phase()
    s = np.sqrt(1 - p)
    L = np.diag([1, s, 1, -s]).astype(complex)
    tau = tau * np.sqrt(2 * (1 - p) / (2 - p))
    return a, b, c, L, xi, tau


def rdm_a(v, a, rest):
    m = v.reshape(a, rest)
    return m @ m.conj().T


def ptrace_b(x, a, b):
    return cp.partial_trace(x, [a, b], axis=1)


def solve(inst):
    a, b, c, L, xi, tau = inst
    rhs = rdm_a(tau, a, b * c) - rdm_a(xi, a, b * c)
    norm = np.vdot(xi, xi).real

    x = cp.Variable((a * b, a * b), hermitian=True)
    cons = [x >> 0, ptrace_b(L @ x @ L.conj().T - x, a, b) == rhs]
    primal = cp.Problem(cp.Minimize(cp.real(cp.trace(x)) / norm), cons)
    primal.solve(solver=cp.CLARABEL, tol_gap_abs=1e-11, tol_gap_rel=1e-11, tol_feas=1e-11)

    g = cp.Variable((a, a), hermitian=True)
    gl = cp.kron(g, np.eye(b))
    lhs = L.conj().T @ gl @ L - gl
    obj = cp.real(cp.trace(g @ rhs)) / norm
    dual = cp.Problem(cp.Maximize(obj), [lhs << np.eye(a * b)])
    dual.solve(solver=cp.CLARABEL, tol_gap_abs=1e-11, tol_gap_rel=1e-11, tol_feas=1e-11)
    return primal.value, dual.value


if __name__ == "__main__":
    print("deutsch_phase", *solve(deutsch_phase()))
    for n in range(2, 9):
        print(f"grover_phase({n})", *solve(grover_phase(n)))
    for p in (0.0, 0.1, 0.3, 0.5, 0.9):
        print(f"noisy_damp({p})", *solve(noisy_damp(p)))
