//! Decompositions of `κ` into orthogonal pure states (elementary
//! transitions), the maps they induce, and completeness under the swap.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::channel::{cj_invert, Channel, RelativeChoi};
use crate::linalg::{herm_eig, partial_trace, vec_inner, vec_norm, CMatrix, Factor};
use crate::{Error, Result, ToleranceConfig};

const NORM_TOL: f64 = 1e-12;
const ORTHO_TOL: f64 = 1e-9;

/// A unit vector on `H_A ⊗ H_B` with its weight `p_α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementaryTransition {
    pub psi: Vec<C64>,
    pub probability: f64,
}

impl ElementaryTransition {
    pub fn new(psi: Vec<C64>, probability: f64) -> Result<Self> {
        let norm = vec_norm(&psi);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidInput(format!(
                "transition vector has norm {norm}, expected 1"
            )));
        }
        if !(probability > 0.0 && probability.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "transition probability must be positive, got {probability}"
            )));
        }
        Ok(Self { psi, probability })
    }

    /// `κ_α = |ψ_α⟩⟨ψ_α|`.
    pub fn projector(&self) -> CMatrix {
        CMatrix::outer(&self.psi, &self.psi)
    }

    /// Reduction of `κ_α` to the output system.
    pub fn reduction_b(&self, dim_a: usize, dim_b: usize) -> Result<CMatrix> {
        partial_trace(&self.projector(), dim_a, dim_b, Factor::First)
    }

    /// Reduction of `κ_α` to the input system.
    pub fn reduction_a(&self, dim_a: usize, dim_b: usize) -> Result<CMatrix> {
        partial_trace(&self.projector(), dim_a, dim_b, Factor::Second)
    }
}

/// `‖|u⟩⟨u| − |v⟩⟨v|‖_F`, insensitive to global phases.
pub fn projector_distance(u: &[C64], v: &[C64]) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        for j in 0..u.len() {
            s += (u[i] * u[j].conj() - v[i] * v[j].conj()).norm_sqr();
        }
    }
    s.sqrt()
}

/// `R ψ` for `ψ ∈ C^m ⊗ C^m`.
pub fn swap_vector(psi: &[C64], m: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    for i in 0..m {
        for j in 0..m {
            out[j * m + i] = psi[i * m + j];
        }
    }
    out
}

/// Transition in the opposite direction: `ψ ↦ Rψ` with the same weight.
pub fn reverse_transition(et: &ElementaryTransition, m: usize) -> Result<ElementaryTransition> {
    if et.psi.len() != m * m {
        return Err(Error::NonSquare {
            dim_in: m,
            dim_out: et.psi.len() / m.max(1),
        });
    }
    Ok(ElementaryTransition {
        psi: swap_vector(&et.psi, m),
        probability: et.probability,
    })
}

/// An orthogonal decomposition `κ = Σ p_α |ψ_α⟩⟨ψ_α|`.
#[derive(Debug, Clone)]
pub struct CJDecomposition {
    items: Vec<ElementaryTransition>,
    source: RelativeChoi,
}

impl CJDecomposition {
    /// Validates orthonormality of the vectors and reconstruction of `κ`.
    pub fn new(
        items: Vec<ElementaryTransition>,
        source: RelativeChoi,
        tol: &ToleranceConfig,
    ) -> Result<Self> {
        let dim = source.kappa.rows();
        if let Some(bad) = items.iter().find(|it| it.psi.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "transition vector of length {}, expected {dim}",
                bad.psi.len()
            )));
        }
        for (a, x) in items.iter().enumerate() {
            for y in &items[a + 1..] {
                let overlap = vec_inner(&x.psi, &y.psi).norm();
                if overlap > ORTHO_TOL {
                    return Err(Error::InvalidInput(format!(
                        "transition vectors overlap by {overlap:e}"
                    )));
                }
            }
        }
        let rebuilt = items.iter().fold(CMatrix::zeros(dim, dim), |acc, it| {
            &acc + &it.projector().scale_real(it.probability)
        });
        let residual = rebuilt.distance(&source.kappa);
        if residual > tol.cj {
            return Err(Error::InvalidInput(format!(
                "decomposition does not reconstruct kappa (residual {residual:e})"
            )));
        }
        let total: f64 = items.iter().map(|it| it.probability).sum();
        let trace = source.kappa.trace().re;
        if (total - trace).abs() > tol.trace {
            return Err(Error::InvalidInput(format!(
                "weights sum to {total}, kappa has trace {trace}"
            )));
        }
        Ok(Self { items, source })
    }

    pub fn items(&self) -> &[ElementaryTransition] {
        &self.items
    }

    pub fn source(&self) -> &RelativeChoi {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let dim = self.source.kappa.rows();
        self.items.iter().fold(CMatrix::zeros(dim, dim), |acc, it| {
            &acc + &it.projector().scale_real(it.probability)
        })
    }

    /// The unweighted map `ε_α`, so that `Σ p_α ε_α = ℰ`.
    pub fn elementary_map(&self, alpha: usize, tol: &ToleranceConfig) -> Result<Channel> {
        elementary_map(&self.items[alpha], &self.source, tol)
    }

    /// Partner structure under the swap; see [`is_complete`].
    pub fn completeness(&self) -> Result<Completeness> {
        is_complete(self)
    }

    pub fn report(&self) -> Result<DecompositionReport> {
        let completeness = if self.source.dim_in() == self.source.dim_out {
            Some(is_complete(self)?)
        } else {
            None
        };
        let items = self
            .items
            .iter()
            .enumerate()
            .map(|(a, it)| DecompositionItem {
                p: it.probability,
                psi: it.psi.clone(),
                reversed_partner_index: completeness.as_ref().and_then(|c| match c.partners[a] {
                    Partner::Item(b) => Some(b),
                    _ => None,
                }),
            })
            .collect();
        Ok(DecompositionReport {
            dim_in: self.source.dim_in(),
            dim_out: self.source.dim_out,
            items,
            complete: completeness.as_ref().map(|c| c.complete),
            witness: completeness.and_then(|c| c.witness),
        })
    }
}

/// Spectral decomposition of `κ`, keeping eigenvalues above the rank
/// threshold. Degenerate eigenspaces use the canonical basis of `herm_eig`.
pub fn decompose(rc: &RelativeChoi, tol: &ToleranceConfig) -> Result<CJDecomposition> {
    let eig = herm_eig(&rc.kappa, tol)?;
    let cutoff = eig.rank_threshold(tol);
    let items = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > cutoff)
        .map(|(k, &p)| ElementaryTransition {
            psi: eig.vector(k),
            probability: p,
        })
        .collect();
    CJDecomposition::new(items, rc.clone(), tol)
}

/// `ε_α`: the inverse CJ map applied to `|ψ_α⟩⟨ψ_α|` in the basis recorded
/// on `source`.
pub fn elementary_map(
    et: &ElementaryTransition,
    source: &RelativeChoi,
    tol: &ToleranceConfig,
) -> Result<Channel> {
    let rc = RelativeChoi {
        kappa: et.projector(),
        ..source.clone()
    };
    cj_invert(&rc, tol)
}

/// Where the reverse of a transition lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum Partner {
    /// `ℛ(κ_α) = κ_β`.
    Item(usize),
    /// `Rψ_α` is orthogonal to every item and lies in the kernel of `κ`.
    Kernel,
    /// Neither; the decomposition is not complete.
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completeness {
    pub complete: bool,
    pub partners: Vec<Partner>,
    /// First item whose reverse is unavailable.
    pub witness: Option<usize>,
}

/// Closure of the decomposition under `ℛ`, possibly after extending it by
/// weight-zero vectors from the kernel of `κ`.
pub fn is_complete(dec: &CJDecomposition) -> Result<Completeness> {
    let m = dec.source.dim_in();
    if dec.source.dim_out != m {
        return Err(Error::NonSquare {
            dim_in: m,
            dim_out: dec.source.dim_out,
        });
    }
    let reversed: Vec<Vec<C64>> = dec.items.iter().map(|it| swap_vector(&it.psi, m)).collect();
    let mut partners = Vec::with_capacity(dec.items.len());
    for phi in &reversed {
        let matched = dec
            .items
            .iter()
            .position(|it| projector_distance(phi, &it.psi) <= ORTHO_TOL);
        let partner = match matched {
            Some(b) => Partner::Item(b),
            None if dec
                .items
                .iter()
                .all(|it| vec_inner(&it.psi, phi).norm() <= ORTHO_TOL) =>
            {
                Partner::Kernel
            }
            None => Partner::Missing,
        };
        partners.push(partner);
    }
    // Kernel-side extension vectors must themselves be orthonormal.
    let kernel: Vec<usize> = (0..partners.len())
        .filter(|&a| partners[a] == Partner::Kernel)
        .collect();
    for (x, &a) in kernel.iter().enumerate() {
        for &b in &kernel[x + 1..] {
            if vec_inner(&reversed[a], &reversed[b]).norm() > ORTHO_TOL {
                partners[b] = Partner::Missing;
            }
        }
    }
    let witness = partners.iter().position(|p| *p == Partner::Missing);
    Ok(Completeness {
        complete: witness.is_none(),
        partners,
        witness,
    })
}

/// One row of a decomposition report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionItem {
    pub p: f64,
    pub psi: Vec<C64>,
    pub reversed_partner_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub dim_in: usize,
    pub dim_out: usize,
    pub items: Vec<DecompositionItem>,
    pub complete: Option<bool>,
    pub witness: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::channel::{cj_relative, DensityMatrix};
    use crate::classical::embed;
    use crate::linalg::{herm_eig, partial_transpose, tensor};
    use crate::random::SeededRng;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn cycle_decomposes_into_the_two_cycles() {
        let (ch, rho) = catalog::cycle3(0.5);
        let dec = decompose(&cj_relative(&ch, &rho, &tol()).unwrap(), &tol()).unwrap();
        assert_eq!(dec.len(), 2);
        let (psi, rev) = catalog::cycle3_transitions();
        for it in dec.items() {
            assert!((it.probability - 0.5).abs() < 1e-12);
        }
        let hits_psi = dec
            .items()
            .iter()
            .filter(|it| projector_distance(&it.psi, &psi) < 1e-10);
        let hits_rev = dec
            .items()
            .iter()
            .filter(|it| projector_distance(&it.psi, &rev) < 1e-10);
        assert_eq!(hits_psi.count(), 1);
        assert_eq!(hits_rev.count(), 1);
    }

    #[test]
    fn pure_kappa_gives_single_item() {
        let rho = DensityMatrix::diagonal(&[1.0, 0.0], &tol()).unwrap();
        let rc = cj_relative(&Channel::identity(2), &rho, &tol()).unwrap();
        let dec = decompose(&rc, &tol()).unwrap();
        assert_eq!(dec.len(), 1);
        assert!((dec.items()[0].probability - 1.0).abs() < 1e-14);
    }

    #[test]
    fn depolarizing_gives_four_quarters() {
        let (ch, rho) = catalog::depolarizing2();
        let rc = cj_relative(&ch, &rho, &tol()).unwrap();
        assert!(rc.kappa.distance(&CMatrix::identity(4).scale_real(0.25)) < 1e-15);
        let dec = decompose(&rc, &tol()).unwrap();
        assert_eq!(dec.len(), 4);
        assert!(dec
            .items()
            .iter()
            .all(|it| (it.probability - 0.25).abs() < 1e-14));
        assert!(is_complete(&dec).unwrap().complete);
    }

    #[test]
    fn classical_elementary_maps() {
        let mc = catalog::classical_db3();
        let rho = DensityMatrix::diagonal(mc.rho(), &tol()).unwrap();
        let rc = cj_relative(&embed(&mc).unwrap(), &rho, &tol()).unwrap();
        // κ_(0,1) = |0,1⟩⟨0,1|.
        let mut psi = vec![C64::new(0.0, 0.0); 9];
        psi[1] = C64::new(1.0, 0.0);
        let et = ElementaryTransition::new(psi, 1.0 / 6.0).unwrap();
        let eps = elementary_map(&et, &rc, &tol()).unwrap();
        let out = eps
            .apply(&CMatrix::unit(3, 3, 0, 0).scale_real(1.0 / 3.0))
            .unwrap();
        assert!(out.distance(&CMatrix::unit(3, 3, 1, 1)) < 1e-14);
        for j in 1..3 {
            let out = eps.apply(&CMatrix::unit(3, 3, j, j)).unwrap();
            assert!(out.frobenius_norm() < 1e-14);
        }
    }

    #[test]
    fn elementary_maps_sum_to_channel() {
        let mut rng = SeededRng::new(12);
        let ch = rng.random_channel(3, 3, 2);
        let rho = rng.random_state(3);
        let rc = cj_relative(&ch, &rho, &tol()).unwrap();
        let dec = decompose(&rc, &tol()).unwrap();
        let mut total = Channel::from_choi(3, 3, CMatrix::zeros(9, 9)).unwrap();
        for (a, it) in dec.items().iter().enumerate() {
            let eps = dec.elementary_map(a, &tol()).unwrap();
            assert!(eps.is_completely_positive(&tol()).unwrap());
            let reduced = eps.apply(rho.matrix()).unwrap();
            assert!(reduced.distance(&it.reduction_b(3, 3).unwrap()) < 1e-10);
            total = total.add(&eps.scale(it.probability)).unwrap();
        }
        assert!(total.distance(&ch) < 1e-9);
    }

    #[test]
    fn cycle_elementary_map_is_weighted_unitary() {
        let (ch, rho) = catalog::cycle3(0.5);
        let rc = cj_relative(&ch, &rho, &tol()).unwrap();
        let (psi, _) = catalog::cycle3_transitions();
        let et = ElementaryTransition::new(psi, 0.5).unwrap();
        let eps = elementary_map(&et, &rc, &tol()).unwrap();
        let u = Channel::unitary(&catalog::cycle3_unitary()).unwrap();
        assert!(eps.scale(0.5).distance(&u.scale(0.5)) < 1e-13);
    }

    #[test]
    fn elementary_map_partial_transpose_oracle() {
        let mut rng = SeededRng::new(13);
        let ch = rng.random_channel(2, 2, 2);
        let rho = rng.random_state(2);
        let rc = cj_relative(&ch, &rho, &tol()).unwrap();
        let dec = decompose(&rc, &tol()).unwrap();
        let w = &rc.basis;
        let rot = tensor(&w.adjoint(), &CMatrix::identity(2));
        for (a, it) in dec.items().iter().enumerate() {
            let eps = dec.elementary_map(a, &tol()).unwrap();
            let k = &(&rot * &it.projector()) * &rot.adjoint();
            let kt = partial_transpose(&k, 2, 2, Factor::First).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let s = 1.0 / (rc.weights[i] * rc.weights[j]).sqrt();
                    let expected = kt.block(j, i, 2, 2).scale_real(s);
                    let got = eps
                        .apply(&CMatrix::outer(&w.column(i), &w.column(j)))
                        .unwrap();
                    assert!(got.distance(&expected) < 1e-11);
                }
            }
        }
    }

    #[test]
    fn reverse_of_product_and_cycle() {
        let mut psi = vec![C64::new(0.0, 0.0); 9];
        psi[1] = C64::new(1.0, 0.0);
        let rev = reverse_transition(&ElementaryTransition::new(psi, 1.0).unwrap(), 3).unwrap();
        assert_eq!(rev.psi[3], C64::new(1.0, 0.0));
        let (psi, psi_rev) = catalog::cycle3_transitions();
        let rev = reverse_transition(&ElementaryTransition::new(psi, 0.5).unwrap(), 3).unwrap();
        assert!(projector_distance(&rev.psi, &psi_rev) < 1e-15);
    }

    #[test]
    fn reverse_requires_square_system() {
        let psi = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        assert!(matches!(
            reverse_transition(&ElementaryTransition::new(psi, 1.0).unwrap(), 3),
            Err(Error::NonSquare { .. })
        ));
    }

    #[test]
    fn c_decompositions_and_completeness() {
        let imaginary = catalog::depolarizing2_decomposition(C64::new(0.0, 1.0), &tol()).unwrap();
        assert!(is_complete(&imaginary).unwrap().complete);
        let two = catalog::depolarizing2_decomposition(C64::new(2.0, 0.0), &tol()).unwrap();
        let c = is_complete(&two).unwrap();
        assert!(!c.complete);
        assert_eq!(c.witness, Some(2));
        let one = catalog::depolarizing2_decomposition(C64::new(1.0, 0.0), &tol()).unwrap();
        assert!(is_complete(&one).unwrap().complete);
    }

    #[test]
    fn kernel_partners_count_as_complete() {
        // ρ = |0⟩⟨0| with the identity channel: κ = |00⟩⟨00| is R-fixed.
        // The shift channel on a pure state: κ = |0,1⟩⟨0,1|, reverse in the kernel.
        let rho = DensityMatrix::diagonal(&[1.0, 0.0, 0.0], &tol()).unwrap();
        let (shift, _) = catalog::shift_channel(3);
        let dec = decompose(&cj_relative(&shift, &rho, &tol()).unwrap(), &tol()).unwrap();
        let c = is_complete(&dec).unwrap();
        assert_eq!(c.partners, vec![Partner::Kernel]);
        assert!(c.complete);
    }

    #[test]
    fn decomposition_validation() {
        let (ch, rho) = catalog::cycle3(0.5);
        let rc = cj_relative(&ch, &rho, &tol()).unwrap();
        let (psi, _) = catalog::cycle3_transitions();
        let only_one = vec![ElementaryTransition::new(psi.clone(), 1.0).unwrap()];
        assert!(CJDecomposition::new(only_one, rc.clone(), &tol()).is_err());
        let duplicate = vec![
            ElementaryTransition::new(psi.clone(), 0.5).unwrap(),
            ElementaryTransition::new(psi, 0.5).unwrap(),
        ];
        assert!(CJDecomposition::new(duplicate, rc, &tol()).is_err());
    }

    #[test]
    fn report_links_partners() {
        let (ch, rho) = catalog::cycle3(0.5);
        let dec = decompose(&cj_relative(&ch, &rho, &tol()).unwrap(), &tol()).unwrap();
        let report = dec.report().unwrap();
        assert_eq!(report.items[0].reversed_partner_index, Some(1));
        assert_eq!(report.items[1].reversed_partner_index, Some(0));
        assert_eq!(report.complete, Some(true));
        let json = serde_json::to_string(&report).unwrap();
        let back: DecompositionReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn herm_eig_of_cycle_kappa_has_rank_two() {
        let (ch, rho) = catalog::cycle3(0.5);
        let rc = cj_relative(&ch, &rho, &tol()).unwrap();
        let eig = herm_eig(&rc.kappa, &tol()).unwrap();
        let nonzero: Vec<f64> = eig
            .eigenvalues
            .iter()
            .cloned()
            .filter(|x| *x > 1e-12)
            .collect();
        assert_eq!(nonzero.len(), 2);
    }
}
