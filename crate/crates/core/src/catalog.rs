//! Small named instances used throughout the tests, the CLI and the demo.

use num_complex::Complex64 as C64;

use crate::channel::{cj_relative, Channel, DensityMatrix};
use crate::classical::MarkovChain;
use crate::linalg::CMatrix;
use crate::parity::shift_clock;
use crate::transitions::{CJDecomposition, ElementaryTransition};
use crate::{Result, ToleranceConfig};

/// Cyclic shift on three levels, `U e_k = e_{k+1 mod 3}`.
pub fn cycle3_unitary() -> CMatrix {
    shift_clock(3).0
}

/// `ℰ(η) = p UηU† + (1 − p) U†ηU` on three levels, with `ρ = I/3`.
pub fn cycle3(p: f64) -> (Channel, DensityMatrix) {
    let u = cycle3_unitary();
    let ch = Channel::from_kraus(&[
        u.scale_real(p.sqrt()),
        u.adjoint().scale_real((1.0 - p).sqrt()),
    ])
    .expect("consistent Kraus shapes");
    (ch, DensityMatrix::maximally_mixed(3))
}

/// The two elementary transitions of the cycle channel:
/// `ψ = (|0,1⟩ + |1,2⟩ + |2,0⟩)/√3` and its reverse `ψ′`.
pub fn cycle3_transitions() -> (Vec<C64>, Vec<C64>) {
    let s = C64::new(1.0 / 3f64.sqrt(), 0.0);
    let mut psi = vec![C64::new(0.0, 0.0); 9];
    let mut rev = psi.clone();
    for i in 0..3 {
        let j = (i + 1) % 3;
        psi[i * 3 + j] = s;
        rev[j * 3 + i] = s;
    }
    (psi, rev)
}

/// Completely depolarizing qubit channel `ℰ(X) = ½ Tr(X) I₂`, with `ρ = I/2`.
pub fn depolarizing2() -> (Channel, DensityMatrix) {
    let ch = Channel::from_fn(2, 2, |x| Ok(CMatrix::identity(2).scale(x.trace() * 0.5)))
        .expect("well-formed map");
    (ch, DensityMatrix::maximally_mixed(2))
}

/// Decomposition of `¼ I₂ ⊗ I₂` into `|00⟩`, `|11⟩`, `a(|01⟩ + c|10⟩)` and
/// `b(|01⟩ − |10⟩/c̄)`, all with weight ¼.
pub fn depolarizing2_decomposition(c: C64, tol: &ToleranceConfig) -> Result<CJDecomposition> {
    let (ch, rho) = depolarizing2();
    let source = cj_relative(&ch, &rho, tol)?;
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let a = 1.0 / (1.0 + c.norm_sqr()).sqrt();
    let d = -one / c.conj();
    let b = 1.0 / (1.0 + d.norm_sqr()).sqrt();
    // Coordinates are ordered |00⟩, |01⟩, |10⟩, |11⟩.
    let vectors = [
        vec![one, zero, zero, zero],
        vec![zero, zero, zero, one],
        vec![zero, one * a, c * a, zero],
        vec![zero, one * b, d * b, zero],
    ];
    let items = vectors
        .into_iter()
        .map(|psi| ElementaryTransition::new(psi, 0.25))
        .collect::<Result<Vec<_>>>()?;
    CJDecomposition::new(items, source, tol)
}

/// Three states, uniform distribution, every off-diagonal transition ½.
pub fn classical_db3() -> MarkovChain {
    let tau = vec![
        vec![0.0, 0.5, 0.5],
        vec![0.5, 0.0, 0.5],
        vec![0.5, 0.5, 0.0],
    ];
    MarkovChain::new(vec![1.0 / 3.0; 3], tau).expect("valid chain")
}

/// Deterministic cycle `0 → 1 → 2 → 0` with uniform distribution.
pub fn classical_cycle3() -> MarkovChain {
    let tau = vec![
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
        vec![1.0, 0.0, 0.0],
    ];
    MarkovChain::new(vec![1.0 / 3.0; 3], tau).expect("valid chain")
}

/// Single-shift channel `X ↦ UXU†` on `m` levels with `ρ = I/m`.
pub fn shift_channel(m: usize) -> (Channel, DensityMatrix) {
    let u = shift_clock(m).0;
    (
        Channel::unitary(&u).expect("square unitary"),
        DensityMatrix::maximally_mixed(m),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_unitary_matches_displayed_matrix() {
        let expected = CMatrix::from_real(3, 3, &[0., 0., 1., 1., 0., 0., 0., 1., 0.]).unwrap();
        assert_eq!(cycle3_unitary(), expected);
    }

    #[test]
    fn cycle_channel_from_two_kraus_operators() {
        let u = cycle3_unitary();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let ch = Channel::from_kraus(&[u.scale_real(h), u.adjoint().scale_real(h)]).unwrap();
        assert!(ch.distance(&cycle3(0.5).0) < 1e-15);
    }

    #[test]
    fn c_decomposition_vectors() {
        let tol = ToleranceConfig::default();
        let dec = depolarizing2_decomposition(C64::new(2.0, 0.0), &tol).unwrap();
        let v = &dec.items()[2].psi;
        assert!((v[1].re - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        assert!((v[2].re - 2.0 / 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(v[0], C64::new(0.0, 0.0));
    }
}
