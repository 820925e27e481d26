use serde::{Deserialize, Serialize};

/// Numerical thresholds shared by every top-level operation.
///
/// Absolute tolerances are Frobenius norms unless stated otherwise. The
/// relative ones (`eig`, `cluster_rel`, `rank_rel`, `herm`) scale with the
/// norm or the largest eigenvalue of the matrix under inspection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceConfig {
    /// Relative off-diagonal norm at which the Jacobi sweep is considered converged.
    pub eig: f64,
    /// Eigenvalues closer than `cluster_rel * max(1, ‖A‖_F)` share one eigenspace.
    pub cluster_rel: f64,
    /// Eigenvalues at or below `rank_rel * λ_max` count as zero.
    pub rank_rel: f64,
    /// Relative anti-Hermitian residual accepted as Hermitian.
    pub herm: f64,
    /// Most negative eigenvalue accepted as positive semidefinite.
    pub psd: f64,
    pub trace: f64,
    pub tp: f64,
    pub cj: f64,
    pub inv: f64,
    pub etdb: f64,
    pub sqdb: f64,
    /// Frobenius distance under which two rank-one projectors are the same transition.
    pub projector: f64,
    /// Absolute tolerance on classical probability identities.
    pub classical: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            eig: 1e-11,
            cluster_rel: 1e-8,
            rank_rel: 1e-10,
            herm: 1e-10,
            psd: 1e-9,
            trace: 1e-9,
            tp: 1e-9,
            cj: 1e-9,
            inv: 1e-9,
            etdb: 1e-9,
            sqdb: 1e-9,
            projector: 1e-9,
            classical: 1e-12,
        }
    }
}

impl ToleranceConfig {
    /// Overrides the pass/fail thresholds of the balance checks with one value.
    pub fn with_check_tolerance(mut self, tol: f64) -> Self {
        self.inv = tol;
        self.etdb = tol;
        self.sqdb = tol;
        self
    }

    pub fn validate(&self) -> crate::Result<()> {
        let all = [
            self.eig,
            self.cluster_rel,
            self.rank_rel,
            self.herm,
            self.psd,
            self.trace,
            self.tp,
            self.cj,
            self.inv,
            self.etdb,
            self.sqdb,
            self.projector,
            self.classical,
        ];
        if all.iter().all(|t| t.is_finite() && *t > 0.0) {
            Ok(())
        } else {
            Err(crate::Error::InvalidInput(
                "tolerances must be positive and finite".into(),
            ))
        }
    }
}
