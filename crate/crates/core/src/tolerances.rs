/// Numerical tolerances shared by every layer.
///
/// All of these are configuration values; problem files may override them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max |M - M^H| entry accepted for matrices claimed Hermitian.
    pub hermitian_tol: f64,
    /// Reduced-state accuracy required of a purification.
    pub purify_tol: f64,
    /// Max reduced-operator difference accepted when connecting purifications.
    pub match_tol: f64,
    /// Max vector error (relative to max(1, |phi|)) of a connecting unitary.
    pub connect_tol: f64,
    /// Eigenvalues below `rank_tol * lambda_max` count as zero.
    pub rank_tol: f64,
    /// Primal feasibility of SDP solutions and catalysts.
    pub feas_tol: f64,
    /// Relative duality gap of SDP solutions.
    pub gap_tol: f64,
    /// Semidefiniteness slack.
    pub psd_tol: f64,
    /// Allowed deviation of L from the identity on the idle subspace, and of
    /// refinement projectors from commuting with L.
    pub structure_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian_tol: 1e-8,
            purify_tol: 1e-8,
            match_tol: 1e-8,
            connect_tol: 1e-8,
            rank_tol: 1e-9,
            feas_tol: 1e-7,
            gap_tol: 1e-7,
            psd_tol: 1e-8,
            structure_tol: 1e-8,
        }
    }
}
