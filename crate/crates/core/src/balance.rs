//! Detailed-balance checks and the duals of a channel relative to a state.
//!
//! `dual_channel` builds `ℰ′` from the swapped Choi state `ℛ(κ)`, while
//! `ac_dual` evaluates the Accardi–Cecchini closed form directly. The two are
//! computed independently and compared in tests.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::channel::{cj_invert, cj_relative_in_basis, Channel, DensityMatrix, RelativeChoi};
use crate::linalg::{
    canonical_basis, swap_conjugate, swap_operator, transpose_in_basis, vec_inner, CMatrix,
    KernelPolicy,
};
use crate::transitions::{decompose, swap_vector, CJDecomposition, ElementaryTransition};
use crate::{Error, Result, ToleranceConfig};

/// Outcome of a check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotEvaluable,
}

/// A residual compared against a tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(residual: f64, tolerance: f64) -> Self {
        Self {
            residual,
            tolerance,
            passed: residual <= tolerance,
        }
    }

    pub fn verdict(&self) -> Verdict {
        if self.passed {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Full-precision decimal rendering used in every report.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Serialize, Deserialize)]
struct CheckRepr {
    residual: String,
    tolerance: String,
    verdict: Verdict,
}

impl Serialize for Check {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CheckRepr {
            residual: fmt_real(self.residual),
            tolerance: fmt_real(self.tolerance),
            verdict: self.verdict(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Check {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = CheckRepr::deserialize(d)?;
        let residual: f64 = repr.residual.parse().map_err(serde::de::Error::custom)?;
        let tolerance: f64 = repr.tolerance.parse().map_err(serde::de::Error::custom)?;
        Ok(Self {
            residual,
            tolerance,
            passed: repr.verdict == Verdict::Pass,
        })
    }
}

/// A check that either ran or could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Outcome {
    Evaluated(Check),
    NotEvaluable { verdict: Verdict, reason: String },
}

impl Outcome {
    pub fn not_evaluable(reason: impl Into<String>) -> Self {
        Outcome::NotEvaluable {
            verdict: Verdict::NotEvaluable,
            reason: reason.into(),
        }
    }

    pub fn verdict(&self) -> Verdict {
        match self {
            Outcome::Evaluated(c) => c.verdict(),
            Outcome::NotEvaluable { .. } => Verdict::NotEvaluable,
        }
    }

    pub fn check(&self) -> Option<&Check> {
        match self {
            Outcome::Evaluated(c) => Some(c),
            Outcome::NotEvaluable { .. } => None,
        }
    }
}

fn require_square(ch: &Channel) -> Result<()> {
    if ch.is_square() {
        Ok(())
    } else {
        Err(Error::NonSquare {
            dim_in: ch.dim_in(),
            dim_out: ch.dim_out(),
        })
    }
}

fn require_state_dim(ch: &Channel, rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != ch.dim_in() {
        return Err(Error::DimensionMismatch(format!(
            "state has dimension {}, channel input {}",
            rho.dim(),
            ch.dim_in()
        )));
    }
    Ok(())
}

/// `σ = ℰ(ρ)`, which need not have unit trace.
pub fn output_state(
    ch: &Channel,
    rho: &DensityMatrix,
    tol: &ToleranceConfig,
) -> Result<DensityMatrix> {
    require_state_dim(ch, rho)?;
    DensityMatrix::unnormalized(ch.apply(rho.matrix())?, tol)
}

/// `σ = ℰ(ρ)`, required to be invertible.
pub fn invertible_output_state(
    ch: &Channel,
    rho: &DensityMatrix,
    tol: &ToleranceConfig,
) -> Result<DensityMatrix> {
    let sigma = output_state(ch, rho, tol)?;
    if !sigma.is_invertible(tol) {
        return Err(Error::NonInvertibleSigma {
            eigenvalue: sigma.spectral().min_eigenvalue(),
        });
    }
    Ok(sigma)
}

/// `‖ℰ(ρ) − ρ‖_F`.
pub fn check_invariance(ch: &Channel, rho: &DensityMatrix, tol: &ToleranceConfig) -> Result<Check> {
    require_square(ch)?;
    require_state_dim(ch, rho)?;
    let residual = ch.apply(rho.matrix())?.distance(rho.matrix());
    Ok(Check::new(residual, tol.inv))
}

/// `‖RκR − κ‖_F` with `κ` built in the canonical eigenbasis of `ρ`.
pub fn check_etdb(ch: &Channel, rho: &DensityMatrix, tol: &ToleranceConfig) -> Result<Check> {
    check_etdb_in_basis(ch, rho, rho.basis(), tol)
}

pub fn check_etdb_in_basis(
    ch: &Channel,
    rho: &DensityMatrix,
    basis: &CMatrix,
    tol: &ToleranceConfig,
) -> Result<Check> {
    require_square(ch)?;
    let rc = cj_relative_in_basis(ch, rho, basis, tol)?;
    Ok(Check::new(etdb_residual(&rc), tol.etdb))
}

pub fn etdb_residual(rc: &RelativeChoi) -> f64 {
    let m = rc.dim_in();
    let swapped = swap_conjugate(&rc.kappa, m, m).expect("square kappa");
    swapped.distance(&rc.kappa)
}

/// Decomposition witnessing ETDB.
#[derive(Debug, Clone)]
pub struct EtdbDecomposition {
    /// Items are eigenvectors of `R`, so `ℛ(κ_α) = κ_α`.
    pub fixed: CJDecomposition,
    /// `+1` or `−1` for each item of `fixed`.
    pub swap_signs: Vec<i8>,
    /// Items regrouped as `(φ ± χ)/√2` pairs with `ℛ(κ_α) = κ_β`, `p_α = p_β`.
    pub paired: CJDecomposition,
    /// Partner index in `paired`, `None` for items that stay swap-fixed.
    pub partners: Vec<Option<usize>>,
}

/// A decomposition of an R-invariant `κ` into swap eigenvectors, plus the
/// re-paired form that exhibits reversed transitions explicitly.
pub fn etdb_decomposition(
    ch: &Channel,
    rho: &DensityMatrix,
    tol: &ToleranceConfig,
) -> Result<EtdbDecomposition> {
    require_square(ch)?;
    let rc = cj_relative_in_basis(ch, rho, rho.basis(), tol)?;
    let residual = etdb_residual(&rc);
    if residual > tol.etdb {
        return Err(Error::EtdbNotSatisfied { residual });
    }
    let m = rc.dim_in();
    let dim = m * m;
    let spectral = decompose(&rc, tol)?;
    let gap = tol.cluster_rel * rc.kappa.frobenius_norm().max(1.0);
    let swap = swap_operator(m, m);

    let mut fixed = Vec::new();
    let mut signs = Vec::new();
    let mut paired = Vec::new();
    let mut partners = Vec::new();
    let items = spectral.items();
    let mut start = 0;
    while start < items.len() {
        let mut end = start + 1;
        while end < items.len()
            && (items[end - 1].probability - items[end].probability).abs() <= gap
        {
            end += 1;
        }
        let cluster = &items[start..end];
        let mut proj = CMatrix::zeros(dim, dim);
        for it in cluster {
            proj = &proj + &it.projector();
        }
        // For R-invariant κ the eigenprojector commutes with R.
        let plus = (&proj + &(&(&proj * &swap) * &proj))
            .scale_real(0.5)
            .hermitian_part();
        let minus = (&proj - &plus).hermitian_part();
        let r_plus = plus.trace().re.round() as usize;
        let r_minus = cluster.len().saturating_sub(r_plus);
        let f = canonical_basis(&plus, r_plus);
        let g = canonical_basis(&minus, r_minus);
        if f.len() + g.len() != cluster.len() {
            return Err(Error::InvalidInput(
                "could not split an eigenspace of kappa into swap eigenvectors".into(),
            ));
        }
        let rayleigh = |v: &[C64]| vec_inner(v, &rc.kappa.mul_vec(v)).re;
        for v in &f {
            fixed.push(ElementaryTransition {
                psi: v.clone(),
                probability: rayleigh(v),
            });
            signs.push(1);
        }
        for v in &g {
            fixed.push(ElementaryTransition {
                psi: v.clone(),
                probability: rayleigh(v),
            });
            signs.push(-1);
        }
        let pairs = f.len().min(g.len());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for k in 0..pairs {
            let phi: Vec<C64> = f[k].iter().zip(&g[k]).map(|(a, b)| (a + b) * h).collect();
            let chi = swap_vector(&phi, m);
            let p = 0.5 * (rayleigh(&phi) + rayleigh(&chi));
            let base = paired.len();
            paired.push(ElementaryTransition {
                psi: phi,
                probability: p,
            });
            paired.push(ElementaryTransition {
                psi: chi,
                probability: p,
            });
            partners.push(Some(base + 1));
            partners.push(Some(base));
        }
        for v in f[pairs..].iter().chain(&g[pairs..]) {
            paired.push(ElementaryTransition {
                psi: v.clone(),
                probability: rayleigh(v),
            });
            partners.push(None);
        }
        start = end;
    }
    Ok(EtdbDecomposition {
        fixed: CJDecomposition::new(fixed, rc.clone(), tol)?,
        swap_signs: signs,
        paired: CJDecomposition::new(paired, rc, tol)?,
        partners,
    })
}

/// `ℰ′`, the map represented by `ℛ(κ)` relative to `σ = ℰ(ρ)`, with both
/// states in their canonical eigenbases.
pub fn dual_channel(ch: &Channel, rho: &DensityMatrix, tol: &ToleranceConfig) -> Result<Channel> {
    let sigma = invertible_output_state(ch, rho, tol)?;
    dual_channel_in_bases(ch, rho, rho.basis(), &sigma, sigma.basis(), tol)
}

pub fn dual_channel_in_bases(
    ch: &Channel,
    rho: &DensityMatrix,
    rho_basis: &CMatrix,
    sigma: &DensityMatrix,
    sigma_basis: &CMatrix,
    tol: &ToleranceConfig,
) -> Result<Channel> {
    let (m, n) = (ch.dim_in(), ch.dim_out());
    if !sigma.is_invertible(tol) {
        return Err(Error::NonInvertibleSigma {
            eigenvalue: sigma.spectral().min_eigenvalue(),
        });
    }
    let rc = cj_relative_in_basis(ch, rho, rho_basis, tol)?;
    let reversed = swap_conjugate(&rc.kappa, m, n)?;
    let rc_dual = RelativeChoi::new(reversed, sigma.clone(), sigma_basis.clone(), m, tol)?;
    cj_invert(&rc_dual, tol)
}

/// Accardi–Cecchini dual
/// `ℰ^AC(Y) = ρ^{1/2} [ℰ†(σ^{-1/2} Y^{T_σ} σ^{-1/2})]^{T_ρ} ρ^{1/2}`.
pub fn ac_dual(ch: &Channel, rho: &DensityMatrix, tol: &ToleranceConfig) -> Result<Channel> {
    let sigma = invertible_output_state(ch, rho, tol)?;
    ac_dual_in_bases(ch, rho, rho.basis(), &sigma, sigma.basis(), tol)
}

pub fn ac_dual_in_bases(
    ch: &Channel,
    rho: &DensityMatrix,
    rho_basis: &CMatrix,
    sigma: &DensityMatrix,
    sigma_basis: &CMatrix,
    tol: &ToleranceConfig,
) -> Result<Channel> {
    rho.eigenvalues_in_basis(rho_basis, tol)?;
    sigma.eigenvalues_in_basis(sigma_basis, tol)?;
    ac_formula(ch, rho, rho_basis, sigma, sigma_basis, tol)
}

/// The AC closed form with transposes in the given bases, without checking
/// that they diagonalize `ρ` and `σ`.
pub(crate) fn ac_formula(
    ch: &Channel,
    rho: &DensityMatrix,
    rho_basis: &CMatrix,
    sigma: &DensityMatrix,
    sigma_basis: &CMatrix,
    tol: &ToleranceConfig,
) -> Result<Channel> {
    let sigma_inv_sqrt = sigma_inverse_sqrt(sigma, tol)?;
    let rho_sqrt = rho.power(0.5, KernelPolicy::Pseudo, tol)?;
    let adj = ch.adjoint();
    Channel::from_fn(ch.dim_out(), ch.dim_in(), |y| {
        let yt = transpose_in_basis(y, sigma_basis);
        let inner = &(&sigma_inv_sqrt * &yt) * &sigma_inv_sqrt;
        let pulled = transpose_in_basis(&adj.apply(&inner)?, rho_basis);
        Ok(&(&rho_sqrt * &pulled) * &rho_sqrt)
    })
}

/// KMS dual (Petz recovery map) `ℰ^KMS(Y) = ρ^{1/2} ℰ†(σ^{-1/2} Y σ^{-1/2}) ρ^{1/2}`.
pub fn kms_dual(ch: &Channel, rho: &DensityMatrix, tol: &ToleranceConfig) -> Result<Channel> {
    let sigma = invertible_output_state(ch, rho, tol)?;
    let sigma_inv_sqrt = sigma_inverse_sqrt(&sigma, tol)?;
    let rho_sqrt = rho.power(0.5, KernelPolicy::Pseudo, tol)?;
    let adj = ch.adjoint();
    Channel::from_fn(ch.dim_out(), ch.dim_in(), |y| {
        let inner = &(&sigma_inv_sqrt * y) * &sigma_inv_sqrt;
        Ok(&(&rho_sqrt * &adj.apply(&inner)?) * &rho_sqrt)
    })
}

/// Heisenberg-picture KMS dual `a ↦ σ^{-1/2} ℰ(ρ^{1/2} a ρ^{1/2}) σ^{-1/2}`,
/// the Hilbert–Schmidt adjoint of [`kms_dual`].
pub fn kms_dual_heisenberg(
    ch: &Channel,
    rho: &DensityMatrix,
    tol: &ToleranceConfig,
) -> Result<Channel> {
    let sigma = invertible_output_state(ch, rho, tol)?;
    let sigma_inv_sqrt = sigma_inverse_sqrt(&sigma, tol)?;
    let rho_sqrt = rho.power(0.5, KernelPolicy::Pseudo, tol)?;
    Channel::from_fn(ch.dim_in(), ch.dim_out(), |a| {
        let inner = &(&rho_sqrt * a) * &rho_sqrt;
        Ok(&(&sigma_inv_sqrt * &ch.apply(&inner)?) * &sigma_inv_sqrt)
    })
}

fn sigma_inverse_sqrt(sigma: &DensityMatrix, tol: &ToleranceConfig) -> Result<CMatrix> {
    sigma
        .power(-0.5, KernelPolicy::Reject, tol)
        .map_err(|e| match e {
            Error::SingularPower => Error::NonInvertibleSigma {
                eigenvalue: sigma.spectral().min_eigenvalue(),
            },
            other => other,
        })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqdbCheck {
    pub invariance: Check,
    /// `‖choi(ℰ^AC) − choi(ℰ)‖_F`.
    pub dual: Check,
    pub passed: bool,
}

/// Standard quantum detailed balance: `ℰ(ρ) = ρ` and `ℰ^AC = ℰ`.
pub fn check_sqdb(ch: &Channel, rho: &DensityMatrix, tol: &ToleranceConfig) -> Result<SqdbCheck> {
    let invariance = check_invariance(ch, rho, tol)?;
    let ac = ac_dual(ch, rho, tol)?;
    let dual = Check::new(ac.distance(ch), tol.sqdb);
    Ok(SqdbCheck {
        invariance,
        dual,
        passed: invariance.passed && dual.passed,
    })
}

/// All balance checks of a channel relative to a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub invariance: Outcome,
    pub etdb: Outcome,
    pub sqdb: Outcome,
    pub basis: CMatrix,
    pub tolerances: ToleranceConfig,
}

impl BalanceReport {
    pub fn summary(&self) -> Vec<(&'static str, Verdict)> {
        vec![
            ("invariance", self.invariance.verdict()),
            ("etdb", self.etdb.verdict()),
            ("sqdb", self.sqdb.verdict()),
        ]
    }
}

pub fn balance_report(
    ch: &Channel,
    rho: &DensityMatrix,
    tol: &ToleranceConfig,
) -> Result<BalanceReport> {
    let invariance = check_invariance(ch, rho, tol)?;
    let etdb = check_etdb(ch, rho, tol)?;
    let sqdb = match check_sqdb(ch, rho, tol) {
        Ok(s) => Outcome::Evaluated(Check {
            passed: s.passed,
            ..s.dual
        }),
        Err(e @ Error::NonInvertibleSigma { .. }) => Outcome::not_evaluable(e.to_string()),
        Err(e) => return Err(e),
    };
    Ok(BalanceReport {
        invariance: Outcome::Evaluated(invariance),
        etdb: Outcome::Evaluated(etdb),
        sqdb,
        basis: rho.basis().clone(),
        tolerances: *tol,
    })
}
