//! Parity operators, the parity-twisted swap `𝒬`, reversing operations
//! `θ(X) = ΘX†Θ` and their factorization into a transpose and a parity.
//!
//! An antiunitary operator is stored as a matrix `M` acting by
//! `v ↦ M v̄`. On operators this gives `X ↦ M X̄ M̄` for the parity and
//! `X ↦ M Xᵀ M̄` for the reversing operation.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::balance::{
    ac_formula, check_invariance, dual_channel, invertible_output_state, kms_dual_heisenberg, Check,
};
use crate::channel::{
    cj_invert, cj_relative, cj_relative_in_basis, Channel, DensityMatrix, RelativeChoi,
};
use crate::linalg::{
    canonical_basis, swap_conjugate, tensor, transpose_in_basis, unitarity_residual, vec_inner,
    vec_norm, CMatrix,
};
use crate::{Error, Result, ToleranceConfig};

const INVOLUTION_TOL: f64 = 1e-10;
const SEED_THRESHOLD: f64 = 1e-3;

fn check_involution(matrix: &CMatrix, antiunitary: bool) -> Result<()> {
    if !matrix.is_square() {
        return Err(Error::NotInvolution(format!(
            "matrix is {}x{}",
            matrix.rows(),
            matrix.cols()
        )));
    }
    let u = unitarity_residual(matrix);
    if u > INVOLUTION_TOL {
        return Err(Error::NotInvolution(format!(
            "matrix is not unitary (residual {u:e})"
        )));
    }
    let square = if antiunitary {
        matrix * &matrix.conj()
    } else {
        matrix * matrix
    };
    let r = square.distance(&CMatrix::identity(matrix.rows()));
    if r > INVOLUTION_TOL {
        return Err(Error::NotInvolution(format!(
            "operator does not square to I (residual {r:e})"
        )));
    }
    Ok(())
}

/// A parity `𝒫`: conjugation by a unitary or antiunitary involution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityOp {
    matrix: CMatrix,
    antiunitary: bool,
}

impl ParityOp {
    pub fn new(matrix: CMatrix, antiunitary: bool) -> Result<Self> {
        check_involution(&matrix, antiunitary)?;
        Ok(Self {
            matrix,
            antiunitary,
        })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            matrix: CMatrix::identity(m),
            antiunitary: false,
        }
    }

    /// Componentwise complex conjugation `C`.
    pub fn conjugation(m: usize) -> Self {
        Self {
            matrix: CMatrix::identity(m),
            antiunitary: true,
        }
    }

    /// Permutation parity `P e_i = e_{π(i)}` for a 0-based involution `π`.
    pub fn permutation(pi: &[usize]) -> Result<Self> {
        let m = pi.len();
        if pi.iter().any(|&k| k >= m) || (0..m).any(|i| pi[pi[i]] != i) {
            return Err(Error::NotInvolution(format!(
                "{pi:?} is not an involutive permutation"
            )));
        }
        let mut p = CMatrix::zeros(m, m);
        for (i, &k) in pi.iter().enumerate() {
            p[(k, i)] = C64::new(1.0, 0.0);
        }
        Ok(Self {
            matrix: p,
            antiunitary: false,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn is_antiunitary(&self) -> bool {
        self.antiunitary
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        if self.antiunitary {
            let c: Vec<C64> = v.iter().map(|z| z.conj()).collect();
            self.matrix.mul_vec(&c)
        } else {
            self.matrix.mul_vec(v)
        }
    }

    /// `𝒫(X)`: `PXP` for unitary `P`, `M X̄ M̄` for antiunitary `P = MC`.
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        self.check_dim(x)?;
        Ok(if self.antiunitary {
            &(&self.matrix * &x.conj()) * &self.matrix.conj()
        } else {
            &(&self.matrix * x) * &self.matrix
        })
    }

    /// Image `P W` (or `M W̄`) of an orthonormal basis.
    pub fn apply_basis(&self, basis: &CMatrix) -> CMatrix {
        if self.antiunitary {
            &self.matrix * &basis.conj()
        } else {
            &self.matrix * basis
        }
    }

    /// `‖𝒫(ρ) − ρ‖_F`; zero exactly when `P` commutes with `ρ`.
    pub fn commutation_residual(&self, rho: &CMatrix) -> Result<f64> {
        Ok(self.apply(rho)?.distance(rho))
    }

    fn check_dim(&self, x: &CMatrix) -> Result<()> {
        let d = self.dim();
        if x.rows() != d || x.cols() != d {
            return Err(Error::DimensionMismatch(format!(
                "parity acts on {d}x{d} matrices, got {}x{}",
                x.rows(),
                x.cols()
            )));
        }
        Ok(())
    }
}

/// A reversing operation `θ(X) = ΘX†Θ` for an (anti)unitary involution `Θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversingOp {
    matrix: CMatrix,
    antiunitary: bool,
}

impl ReversingOp {
    pub fn new(matrix: CMatrix, antiunitary: bool) -> Result<Self> {
        check_involution(&matrix, antiunitary)?;
        Ok(Self {
            matrix,
            antiunitary,
        })
    }

    /// `Θ = C`, for which `θ` is the transpose.
    pub fn transposition(m: usize) -> Self {
        Self {
            matrix: CMatrix::identity(m),
            antiunitary: true,
        }
    }

    /// `Θ = I`, for which `θ(X) = X†`.
    pub fn adjoint(m: usize) -> Self {
        Self {
            matrix: CMatrix::identity(m),
            antiunitary: false,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn is_antiunitary(&self) -> bool {
        self.antiunitary
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        if self.antiunitary {
            let c: Vec<C64> = v.iter().map(|z| z.conj()).collect();
            self.matrix.mul_vec(&c)
        } else {
            self.matrix.mul_vec(v)
        }
    }

    /// `θ(X)`: `M X† M` for unitary `Θ`, `M Xᵀ M̄` for antiunitary `Θ = MC`.
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        let d = self.dim();
        if x.rows() != d || x.cols() != d {
            return Err(Error::DimensionMismatch(format!(
                "reversing operation acts on {d}x{d} matrices, got {}x{}",
                x.rows(),
                x.cols()
            )));
        }
        Ok(if self.antiunitary {
            &(&self.matrix * &x.transpose()) * &self.matrix.conj()
        } else {
            &(&self.matrix * &x.adjoint()) * &self.matrix
        })
    }
}

/// `𝒫(X)`.
pub fn apply_parity(p: &ParityOp, x: &CMatrix) -> Result<CMatrix> {
    p.apply(x)
}

/// `𝒬 = ℛ ∘ (𝒫_A ⊗ 𝒫_B)` on `L(H_A ⊗ H_B)`, landing in `L(H_B ⊗ H_A)`.
pub fn q_map_pair(pa: &ParityOp, pb: &ParityOp, z: &CMatrix) -> Result<CMatrix> {
    if pa.antiunitary != pb.antiunitary {
        return Err(Error::InvalidInput(
            "both parities must be unitary or both antiunitary".into(),
        ));
    }
    let (m, n) = (pa.dim(), pb.dim());
    let pp = tensor(&pa.matrix, &pb.matrix);
    let local = if pa.antiunitary {
        &(&pp * &z.conj()) * &pp.conj()
    } else {
        &(&pp * z) * &pp.adjoint()
    };
    swap_conjugate(&local, m, n)
}

/// `𝒬(Z)` for one parity on both factors.
pub fn q_map(p: &ParityOp, z: &CMatrix) -> Result<CMatrix> {
    q_map_pair(p, p, z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtdbPCheck {
    /// `‖𝒬(κ) − κ‖_F`.
    pub check: Check,
    /// `‖𝒫(ρ) − ρ‖_F`.
    pub commutation_residual: f64,
    /// False when `𝒫(ρ) ≠ ρ`; the invariance and dual characterizations then
    /// do not apply even if the check passes.
    pub commutes: bool,
}

/// ETDB under a parity: `𝒬(κ) = κ` with `κ` in the canonical eigenbasis of `ρ`.
pub fn check_etdb_p(
    ch: &Channel,
    rho: &DensityMatrix,
    p: &ParityOp,
    tol: &ToleranceConfig,
) -> Result<EtdbPCheck> {
    check_etdb_p_in_basis(ch, rho, p, rho.basis(), tol)
}

pub fn check_etdb_p_in_basis(
    ch: &Channel,
    rho: &DensityMatrix,
    p: &ParityOp,
    basis: &CMatrix,
    tol: &ToleranceConfig,
) -> Result<EtdbPCheck> {
    if !ch.is_square() {
        return Err(Error::NonSquare {
            dim_in: ch.dim_in(),
            dim_out: ch.dim_out(),
        });
    }
    if p.dim() != ch.dim_in() {
        return Err(Error::DimensionMismatch(format!(
            "parity has dimension {}, channel {}",
            p.dim(),
            ch.dim_in()
        )));
    }
    let rc = cj_relative_in_basis(ch, rho, basis, tol)?;
    let residual = q_map(p, &rc.kappa)?.distance(&rc.kappa);
    let commutation_residual = p.commutation_residual(rho.matrix())?;
    Ok(EtdbPCheck {
        check: Check::new(residual, tol.etdb),
        commutation_residual,
        commutes: commutation_residual <= tol.inv,
    })
}

/// Parity dual `ℰ^𝒫 = 𝒫_A ∘ ℰ′ ∘ 𝒫_B`, with `ℰ′` in the canonical bases.
pub fn parity_dual(
    ch: &Channel,
    rho: &DensityMatrix,
    pa: &ParityOp,
    pb: &ParityOp,
    tol: &ToleranceConfig,
) -> Result<Channel> {
    check_parity_pair(ch, pa, pb)?;
    let dual = dual_channel(ch, rho, tol)?;
    Channel::from_fn(ch.dim_out(), ch.dim_in(), |y| {
        pa.apply(&dual.apply(&pb.apply(y)?)?)
    })
}

/// `ℰ^𝒫` computed as the map represented by `𝒬(κ)` relative to `𝒫_B(σ)`.
pub fn parity_dual_direct(
    ch: &Channel,
    rho: &DensityMatrix,
    pa: &ParityOp,
    pb: &ParityOp,
    tol: &ToleranceConfig,
) -> Result<Channel> {
    check_parity_pair(ch, pa, pb)?;
    let sigma = invertible_output_state(ch, rho, tol)?;
    let rc = cj_relative(ch, rho, tol)?;
    let twisted = q_map_pair(pa, pb, &rc.kappa)?;
    let sigma_p = DensityMatrix::unnormalized(pb.apply(sigma.matrix())?, tol)?;
    let basis = pb.apply_basis(sigma.basis());
    let rc_p = RelativeChoi::new(twisted, sigma_p, basis, ch.dim_in(), tol)?;
    cj_invert(&rc_p, tol)
}

fn check_parity_pair(ch: &Channel, pa: &ParityOp, pb: &ParityOp) -> Result<()> {
    if pa.dim() != ch.dim_in() || pb.dim() != ch.dim_out() {
        return Err(Error::DimensionMismatch(format!(
            "parities of dimension {} and {} for a {}->{} channel",
            pa.dim(),
            pb.dim(),
            ch.dim_in(),
            ch.dim_out()
        )));
    }
    if pa.antiunitary != pb.antiunitary {
        return Err(Error::InvalidInput(
            "both parities must be unitary or both antiunitary".into(),
        ));
    }
    Ok(())
}

/// `‖θ(ρ) − ρ‖_F`.
pub fn theta_state_residual(th: &ReversingOp, rho: &DensityMatrix) -> Result<f64> {
    Ok(th.apply(rho.matrix())?.distance(rho.matrix()))
}

/// Orthonormal eigenbasis of `ρ` in which `Θ` is diagonal.
///
/// Within each eigenspace of `ρ`: a unitary `Θ` is split into its `±1`
/// eigenspaces, each given its canonical basis; an antiunitary `Θ` gets a
/// basis of fixed vectors `Θv = v` orthonormalized from the seeds `b + Θb`
/// and `i(b − Θb)`.
pub fn joint_basis(
    rho: &DensityMatrix,
    th: &ReversingOp,
    tol: &ToleranceConfig,
) -> Result<CMatrix> {
    let d = rho.dim();
    if th.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "reversing operation has dimension {}, state {d}",
            th.dim()
        )));
    }
    let residual = theta_state_residual(th, rho)?;
    if residual > tol.inv {
        return Err(Error::ThetaStateMismatch { residual });
    }
    let spectral = rho.spectral();
    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(d);
    for range in spectral.clusters(tol, rho.matrix().frobenius_norm()) {
        let block: Vec<Vec<C64>> = range.clone().map(|k| spectral.vector(k)).collect();
        let found = if th.antiunitary {
            fixed_vector_basis(&block, th)
        } else {
            sign_split_basis(&block, th)
        };
        if found.len() != block.len() {
            return Err(Error::NotDiagonalizedJointly {
                residual: (block.len() - found.len()) as f64,
            });
        }
        columns.extend(found);
    }
    CMatrix::from_columns(&columns)
}

fn sign_split_basis(block: &[Vec<C64>], th: &ReversingOp) -> Vec<Vec<C64>> {
    let d = th.dim();
    let mut proj = CMatrix::zeros(d, d);
    for b in block {
        proj = &proj + &CMatrix::outer(b, b);
    }
    let restricted = &(&proj * &th.matrix) * &proj;
    let plus = (&proj + &restricted).scale_real(0.5).hermitian_part();
    let minus = (&proj - &restricted).scale_real(0.5).hermitian_part();
    let r_plus = plus.trace().re.round().max(0.0) as usize;
    let r_minus = minus.trace().re.round().max(0.0) as usize;
    let mut out = canonical_basis(&plus, r_plus);
    out.extend(canonical_basis(&minus, r_minus));
    out
}

fn fixed_vector_basis(block: &[Vec<C64>], th: &ReversingOp) -> Vec<Vec<C64>> {
    let i = C64::new(0.0, 1.0);
    let mut out: Vec<Vec<C64>> = Vec::with_capacity(block.len());
    for b in block {
        let tb = th.apply_vec(b);
        let seeds = [
            b.iter().zip(&tb).map(|(x, y)| x + y).collect::<Vec<_>>(),
            b.iter()
                .zip(&tb)
                .map(|(x, y)| (x - y) * i)
                .collect::<Vec<_>>(),
        ];
        for mut w in seeds {
            if out.len() == block.len() {
                break;
            }
            for u in &out {
                // Overlaps of fixed vectors are real, which keeps `w` fixed.
                let c = vec_inner(u, &w).re;
                for (wi, ui) in w.iter_mut().zip(u) {
                    *wi -= ui * c;
                }
            }
            let norm = vec_norm(&w);
            if norm > SEED_THRESHOLD {
                let sign = w.iter().find(|z| z.norm() > 1e-8).map_or(1.0, |z| {
                    if z.re < 0.0 || (z.re == 0.0 && z.im < 0.0) {
                        -1.0
                    } else {
                        1.0
                    }
                });
                out.push(w.iter().map(|z| z * (sign / norm)).collect());
            }
        }
    }
    out
}

/// Factor `θ = 𝒫 ∘ T = T ∘ 𝒫`, with `T` the transpose in `basis`.
///
/// The returned parity has matrix `W Wᵀ M̄` and the opposite conjugation
/// flag to `Θ`; `Θ` must be diagonal in `basis`.
pub fn factor_theta(th: &ReversingOp, basis: &CMatrix, tol: &ToleranceConfig) -> Result<ParityOp> {
    let d = th.dim();
    if basis.rows() != d || basis.cols() != d || unitarity_residual(basis) > tol.projector {
        return Err(Error::InvalidBasis(
            "factorization basis must be a unitary of matching size".into(),
        ));
    }
    let in_basis = if th.antiunitary {
        &(&basis.adjoint() * &th.matrix) * &basis.conj()
    } else {
        &(&basis.adjoint() * &th.matrix) * basis
    };
    let off = in_basis.off_diagonal_norm();
    if off > tol.projector {
        return Err(Error::NotDiagonalizedJointly { residual: off });
    }
    let s = basis * &basis.transpose();
    let parity = ParityOp::new(&s * &th.matrix.conj(), !th.antiunitary)?;
    let mut worst: f64 = 0.0;
    for r in 0..d {
        for c in 0..d {
            let e = CMatrix::unit(d, d, r, c);
            let target = th.apply(&e)?;
            let left = parity.apply(&transpose_in_basis(&e, basis))?;
            let right = transpose_in_basis(&parity.apply(&e)?, basis);
            worst = worst
                .max(left.distance(&target))
                .max(right.distance(&target));
        }
    }
    if worst > tol.projector {
        return Err(Error::NotDiagonalizedJointly { residual: worst });
    }
    Ok(parity)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqdbThetaCheck {
    pub invariance: Check,
    /// `‖θ ∘ E^KMS ∘ θ − ℰ†‖` in the Heisenberg picture.
    pub kms_form: Check,
    /// `‖𝒫 ∘ ℰ^AC ∘ 𝒫 − ℰ‖` in the Schrödinger picture.
    pub ac_form: Check,
    /// Distance between the adjoint of the KMS-form map and the AC-form map.
    pub form_discrepancy: f64,
    pub basis: CMatrix,
    pub parity: ParityOp,
    pub passed: bool,
}

/// SQDB-θ: `ℰ(ρ) = ρ` and `θ ∘ E^KMS ∘ θ = E` (equivalently
/// `𝒫 ∘ ℰ^AC ∘ 𝒫 = ℰ` with `𝒫 = factor_theta(θ)`).
///
/// Transposes in the AC form are taken in the joint eigenbasis of `ρ` and
/// `Θ` on both sides, which diagonalizes `σ` whenever `ℰ(ρ) = ρ`.
pub fn check_sqdb_theta(
    ch: &Channel,
    rho: &DensityMatrix,
    th: &ReversingOp,
    tol: &ToleranceConfig,
) -> Result<SqdbThetaCheck> {
    let invariance = check_invariance(ch, rho, tol)?;
    let basis = joint_basis(rho, th, tol)?;
    let parity = factor_theta(th, &basis, tol)?;
    let sigma = invertible_output_state(ch, rho, tol)?;
    let m = ch.dim_in();

    let heis = kms_dual_heisenberg(ch, rho, tol)?;
    let lifted = Channel::from_fn(m, m, |a| th.apply(&heis.apply(&th.apply(a)?)?))?;
    let kms_residual = lifted.distance(&ch.adjoint());

    let ac = ac_formula(ch, rho, &basis, &sigma, &basis, tol)?;
    let twisted = Channel::from_fn(m, m, |x| parity.apply(&ac.apply(&parity.apply(x)?)?))?;
    let ac_residual = twisted.distance(ch);

    let form_discrepancy = lifted.adjoint().distance(&twisted);
    let kms_form = Check::new(kms_residual, tol.sqdb);
    let ac_form = Check::new(ac_residual, tol.sqdb);
    Ok(SqdbThetaCheck {
        invariance,
        kms_form,
        ac_form,
        form_discrepancy,
        basis,
        parity,
        passed: invariance.passed && kms_form.passed,
    })
}

/// Cyclic shift `U e_k = e_{k+1}`, clock `V = diag(r^k)` with `r = e^{2πi/m}`,
/// and Fourier matrix `F_kl = r^{-kl}/√m`, indices from 0.
pub fn shift_clock(m: usize) -> (CMatrix, CMatrix, CMatrix) {
    let mut u = CMatrix::zeros(m, m);
    for k in 0..m {
        u[((k + 1) % m, k)] = C64::new(1.0, 0.0);
    }
    let r = |k: usize| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k % m) as f64 / m as f64);
    let v = CMatrix::diag(&(0..m).map(r).collect::<Vec<_>>());
    let s = 1.0 / (m as f64).sqrt();
    let f = CMatrix::from_fn(m, m, |k, l| r(m - (k * l) % m) * s);
    (u, v, f)
}

/// Reflection `k ↦ −k mod m` as a permutation parity.
pub fn reflection_parity(m: usize) -> ParityOp {
    let pi: Vec<usize> = (0..m).map(|k| (m - k) % m).collect();
    ParityOp::permutation(&pi).expect("reflection is an involution")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::{check_etdb, check_sqdb, dual_channel};
    use crate::catalog;
    use crate::classical::{embed, MarkovChain};
    use crate::random::SeededRng;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn conjugation_negates_clock_phases() {
        let (_, v, _) = shift_clock(5);
        let c = ParityOp::conjugation(5);
        assert!(c.apply(&v).unwrap().distance(&v.adjoint()) < 1e-15);
        let mut rng = SeededRng::new(30);
        let x = rng.gaussian_matrix(3, 3);
        assert_eq!(ParityOp::identity(3).apply(&x).unwrap(), x);
        let swap12 = ParityOp::permutation(&[1, 0, 2]).unwrap();
        assert_eq!(
            swap12.apply(&CMatrix::unit(3, 3, 0, 0)).unwrap(),
            CMatrix::unit(3, 3, 1, 1)
        );
    }

    #[test]
    fn operator_action_matches_vector_action() {
        // Θ|u⟩⟨v|Θ⁻¹ = |Θu⟩⟨Θv| for both kinds of involution.
        let mut rng = SeededRng::new(31);
        let u0 = rng.haar_unitary(3);
        let d = CMatrix::diag_real(&[1.0, -1.0, 1.0]);
        let hermitian_involution = &(&u0 * &d) * &u0.adjoint();
        let symmetric = &(&u0
            * &CMatrix::diag(&[
                C64::from_polar(1.0, 0.3),
                C64::from_polar(1.0, 1.1),
                C64::new(-1.0, 0.0),
            ]))
            * &u0.transpose();
        for (mat, anti) in [(hermitian_involution, false), (symmetric, true)] {
            let p = ParityOp::new(mat, anti).unwrap();
            let u: Vec<C64> = (0..3).map(|_| rng.complex_normal()).collect();
            let v: Vec<C64> = (0..3).map(|_| rng.complex_normal()).collect();
            let lhs = p.apply(&CMatrix::outer(&u, &v)).unwrap();
            let rhs = CMatrix::outer(&p.apply_vec(&u), &p.apply_vec(&v));
            assert!(lhs.distance(&rhs) < 1e-12);
        }
    }

    #[test]
    fn involution_is_checked() {
        let (u, _, _) = shift_clock(3);
        assert!(matches!(
            ParityOp::new(u, false),
            Err(Error::NotInvolution(_))
        ));
        assert!(matches!(
            ParityOp::permutation(&[1, 2, 0]),
            Err(Error::NotInvolution(_))
        ));
        let i = CMatrix::identity(2).scale(C64::new(0.0, 1.0));
        assert!(ParityOp::new(i.clone(), false).is_err());
        assert!(ParityOp::new(i, true).is_ok());
    }

    #[test]
    fn q_map_basics() {
        let mut rng = SeededRng::new(32);
        let z = rng.gaussian_matrix(9, 9);
        let q = q_map(&ParityOp::identity(3), &z).unwrap();
        assert!(q.distance(&swap_conjugate(&z, 3, 3).unwrap()) < 1e-15);
        for p in [
            ParityOp::conjugation(3),
            ParityOp::permutation(&[2, 1, 0]).unwrap(),
        ] {
            let twice = q_map(&p, &q_map(&p, &z).unwrap()).unwrap();
            assert!(twice.distance(&z) <= 1e-12);
        }
    }

    #[test]
    fn q_map_on_product_operators() {
        // 𝒬(X ⊗ Y) = 𝒫(Y) ⊗ 𝒫(X), and 𝒬 = ℛ∘(𝒫⊗𝒫) = (𝒫⊗𝒫)∘ℛ.
        let mut rng = SeededRng::new(33);
        let h = CMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, -1.0])
            .unwrap()
            .scale_real(std::f64::consts::FRAC_1_SQRT_2);
        let p = ParityOp::new(h, false).unwrap();
        for parity in [p, ParityOp::conjugation(2)] {
            let x = rng.gaussian_matrix(2, 2);
            let y = rng.gaussian_matrix(2, 2);
            let lhs = q_map(&parity, &tensor(&x, &y)).unwrap();
            let rhs = tensor(&parity.apply(&y).unwrap(), &parity.apply(&x).unwrap());
            assert!(lhs.distance(&rhs) < 1e-13);
            let swapped_first = swap_conjugate(&tensor(&x, &y), 2, 2).unwrap();
            let alt = tensor(&parity.apply(&y).unwrap(), &parity.apply(&x).unwrap());
            let via_swap = {
                let pp = tensor(parity.matrix(), parity.matrix());
                if parity.is_antiunitary() {
                    &(&pp * &swapped_first.conj()) * &pp.conj()
                } else {
                    &(&pp * &swapped_first) * &pp.adjoint()
                }
            };
            assert!(via_swap.distance(&alt) < 1e-13);
        }
    }

    #[test]
    fn classical_q_map_reverses_and_permutes() {
        let p = ParityOp::permutation(&[1, 0, 2]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let k = CMatrix::unit(9, 9, i * 3 + j, i * 3 + j);
                let pi = |x: usize| [1, 0, 2][x];
                let expected = CMatrix::unit(9, 9, pi(j) * 3 + pi(i), pi(j) * 3 + pi(i));
                assert_eq!(q_map(&p, &k).unwrap(), expected);
            }
        }
    }

    #[test]
    fn etdb_p_with_identity_parity_is_etdb() {
        let mut rng = SeededRng::new(34);
        for _ in 0..5 {
            let ch = rng.random_channel(3, 3, 2);
            let rho = rng.random_state(3);
            let a = check_etdb(&ch, &rho, &tol()).unwrap();
            let b = check_etdb_p(&ch, &rho, &ParityOp::identity(3), &tol()).unwrap();
            assert!((a.residual - b.check.residual).abs() <= 1e-12);
            assert_eq!(a.passed, b.check.passed);
        }
        let (ch, rho) = catalog::cycle3(0.5);
        assert!(
            check_etdb_p(&ch, &rho, &ParityOp::identity(3), &tol())
                .unwrap()
                .check
                .passed
        );
    }

    #[test]
    fn shift_channel_and_conjugation_parity() {
        // κ of the shift channel at I/m is real, so 𝒬 with P = C acts as ℛ
        // and the two checks agree.
        for m in [3, 5] {
            let (ch, rho) = catalog::shift_channel(m);
            let plain = check_etdb(&ch, &rho, &tol()).unwrap();
            let with_c = check_etdb_p(&ch, &rho, &ParityOp::conjugation(m), &tol()).unwrap();
            assert!(!plain.passed);
            assert_eq!(plain.residual, with_c.check.residual);
            let reflected = check_etdb_p(&ch, &rho, &reflection_parity(m), &tol()).unwrap();
            assert!(reflected.check.passed && reflected.commutes);
        }
        let (ch, rho) = catalog::shift_channel(2);
        assert!(
            check_etdb_p(&ch, &rho, &ParityOp::conjugation(2), &tol())
                .unwrap()
                .check
                .passed
        );
    }

    #[test]
    fn classical_parity_chain_passes() {
        // ρ_i τ_ij = ρ_{π(j)} τ_{π(j)π(i)} with π swapping states 0 and 1.
        let mc = MarkovChain::new(
            vec![0.25, 0.25, 0.5],
            vec![
                vec![0.0, 0.2, 0.8],
                vec![0.6, 0.0, 0.4],
                vec![0.2, 0.4, 0.4],
            ],
        )
        .unwrap();
        let pi = [1, 0, 2];
        assert!(
            crate::classical::check_classical_db_parity(&mc, &pi)
                .unwrap()
                .passed
        );
        let rho = DensityMatrix::diagonal(mc.rho(), &tol()).unwrap();
        let p = ParityOp::permutation(&pi).unwrap();
        assert!(
            check_etdb_p(&embed(&mc).unwrap(), &rho, &p, &tol())
                .unwrap()
                .check
                .passed
        );
    }

    #[test]
    fn non_commuting_parity_is_flagged() {
        let rho = DensityMatrix::diagonal(&[0.7, 0.3], &tol()).unwrap();
        let p = ParityOp::permutation(&[1, 0]).unwrap();
        let r = check_etdb_p(&Channel::identity(2), &rho, &p, &tol()).unwrap();
        assert!(!r.commutes);
    }

    #[test]
    fn parity_dual_routes_agree() {
        let mut rng = SeededRng::new(35);
        let ch = rng.random_channel(3, 3, 2);
        let rho = rng.random_state(3);
        let id = ParityOp::identity(3);
        let plain = dual_channel(&ch, &rho, &tol()).unwrap();
        assert!(
            parity_dual(&ch, &rho, &id, &id, &tol())
                .unwrap()
                .distance(&plain)
                < 1e-12
        );
        let perm = ParityOp::permutation(&[2, 1, 0]).unwrap();
        let c = ParityOp::conjugation(3);
        for p in [perm, c] {
            let a = parity_dual(&ch, &rho, &p, &p, &tol()).unwrap();
            let b = parity_dual_direct(&ch, &rho, &p, &p, &tol()).unwrap();
            assert!(a.distance(&b) < 1e-9, "{}", a.distance(&b));
            assert!(a.is_trace_preserving(&tol()));
        }
    }

    #[test]
    fn parity_dual_of_shift_channel() {
        // With P = C the parity dual of the shift is its inverse, as for ℰ′.
        let (ch, rho) = catalog::shift_channel(3);
        let c = ParityOp::conjugation(3);
        let pd = parity_dual(&ch, &rho, &c, &c, &tol()).unwrap();
        let back = Channel::unitary(&catalog::cycle3_unitary().adjoint()).unwrap();
        assert!(pd.distance(&back) < 1e-12);
        let r = reflection_parity(3);
        assert!(
            parity_dual(&ch, &rho, &r, &r, &tol())
                .unwrap()
                .distance(&ch)
                < 1e-12
        );
    }

    #[test]
    fn factor_theta_examples() {
        let id = CMatrix::identity(2);
        let p = factor_theta(&ReversingOp::transposition(2), &id, &tol()).unwrap();
        assert_eq!(p, ParityOp::identity(2));
        let p = factor_theta(&ReversingOp::adjoint(2), &id, &tol()).unwrap();
        assert_eq!(p, ParityOp::conjugation(2));
        let z = CMatrix::diag_real(&[1.0, -1.0]);
        let p = factor_theta(&ReversingOp::new(z.clone(), true).unwrap(), &id, &tol()).unwrap();
        assert_eq!(p, ParityOp::new(z, false).unwrap());
        let x = CMatrix::from_real(2, 2, &[0., 1., 1., 0.]).unwrap();
        assert!(matches!(
            factor_theta(&ReversingOp::new(x, false).unwrap(), &id, &tol()),
            Err(Error::NotDiagonalizedJointly { .. })
        ));
    }

    #[test]
    fn joint_basis_diagonalizes_both() {
        let mut rng = SeededRng::new(36);
        let w0 = rng.haar_unitary(4);
        let rho = DensityMatrix::new(
            &(&w0 * &CMatrix::diag_real(&[0.4, 0.2, 0.2, 0.2])) * &w0.adjoint(),
            &tol(),
        )
        .unwrap();
        let unitary = &(&w0 * &CMatrix::diag_real(&[1.0, -1.0, 1.0, -1.0])) * &w0.adjoint();
        let phases: Vec<C64> = (0..4)
            .map(|k| C64::from_polar(1.0, 0.7 * k as f64))
            .collect();
        let anti = &(&w0 * &CMatrix::diag(&phases)) * &w0.transpose();
        for th in [
            ReversingOp::new(unitary, false).unwrap(),
            ReversingOp::new(anti, true).unwrap(),
        ] {
            let w = joint_basis(&rho, &th, &tol()).unwrap();
            assert!(unitarity_residual(&w) < 1e-10);
            rho.eigenvalues_in_basis(&w, &tol()).unwrap();
            let p = factor_theta(&th, &w, &tol()).unwrap();
            assert_eq!(p.is_antiunitary(), !th.is_antiunitary());
        }
    }

    #[test]
    fn theta_must_fix_state() {
        let rho = DensityMatrix::diagonal(&[0.7, 0.3], &tol()).unwrap();
        let x = CMatrix::from_real(2, 2, &[0., 1., 1., 0.]).unwrap();
        let th = ReversingOp::new(x, false).unwrap();
        let ch = Channel::identity(2);
        assert!(matches!(
            check_sqdb_theta(&ch, &rho, &th, &tol()),
            Err(Error::ThetaStateMismatch { .. })
        ));
    }

    #[test]
    fn sqdb_theta_examples() {
        let (ch, rho) = catalog::cycle3(0.5);
        let r = check_sqdb_theta(&ch, &rho, &ReversingOp::transposition(3), &tol()).unwrap();
        assert!(r.passed);
        assert_eq!(r.passed, check_sqdb(&ch, &rho, &tol()).unwrap().passed);
        assert!(r.form_discrepancy <= 1e-10);

        let (shift, rho) = catalog::shift_channel(3);
        let r = check_sqdb_theta(&shift, &rho, &ReversingOp::transposition(3), &tol()).unwrap();
        assert!(!r.passed);
        // θ(X) = X† factors through P = C, which acts as ℛ on this real κ.
        let r = check_sqdb_theta(&shift, &rho, &ReversingOp::adjoint(3), &tol()).unwrap();
        assert!(!r.passed);
        assert!((r.kms_form.residual - r.ac_form.residual).abs() < 1e-10);
    }

    #[test]
    fn shift_clock_identities() {
        for m in [2, 3, 5, 8] {
            let (u, v, f) = shift_clock(m);
            let r = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / m as f64);
            assert!((&v * &u).distance(&(&u * &v).scale(r)) <= 1e-12);
            assert!((&(&f.adjoint() * &u) * &f).distance(&v) <= 1e-12);
        }
        let (u, v, _) = shift_clock(2);
        assert_eq!(u, CMatrix::from_real(2, 2, &[0., 1., 1., 0.]).unwrap());
        assert!(v.distance(&CMatrix::diag_real(&[1.0, -1.0])) < 1e-15);
    }
}
