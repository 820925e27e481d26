//! Density matrices, channels stored as standard Choi matrices, and the
//! state-relative Choi–Jamiołkowski map with its inverse.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    herm_eig, partial_trace, psd_power_from_eigen, tensor, unitarity_residual, CMatrix, Factor,
    HermEigen, KernelPolicy,
};
use crate::{Error, Result, ToleranceConfig};

/// A Hermitian positive semidefinite matrix with its cached spectral data.
///
/// `new` additionally enforces unit trace. `unnormalized` skips that check
/// and is used for images `ℰ(ρ)` of maps that need not preserve trace.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: CMatrix,
    spectral: HermEigen,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix, tol: &ToleranceConfig) -> Result<Self> {
        let state = Self::unnormalized(matrix, tol)?;
        let trace = state.matrix.trace();
        if (trace - C64::new(1.0, 0.0)).norm() > tol.trace {
            return Err(Error::NotNormalized { trace: trace.re });
        }
        Ok(state)
    }

    pub fn unnormalized(matrix: CMatrix, tol: &ToleranceConfig) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "state must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let spectral = herm_eig(&matrix, tol)?;
        if spectral.min_eigenvalue() < -tol.psd {
            return Err(Error::NotPositive {
                min_eigenvalue: spectral.min_eigenvalue(),
            });
        }
        Ok(Self {
            matrix: matrix.hermitian_part(),
            spectral,
        })
    }

    pub fn maximally_mixed(m: usize) -> Self {
        let matrix = CMatrix::identity(m).scale_real(1.0 / m as f64);
        let spectral = HermEigen {
            eigenvalues: vec![1.0 / m as f64; m],
            eigenvectors: CMatrix::identity(m),
        };
        Self { matrix, spectral }
    }

    /// Diagonal state from a probability vector.
    pub fn diagonal(probabilities: &[f64], tol: &ToleranceConfig) -> Result<Self> {
        Self::new(CMatrix::diag_real(probabilities), tol)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn spectral(&self) -> &HermEigen {
        &self.spectral
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectral.eigenvalues
    }

    /// Canonical eigenbasis as columns.
    pub fn basis(&self) -> &CMatrix {
        &self.spectral.eigenvectors
    }

    pub fn is_invertible(&self, tol: &ToleranceConfig) -> bool {
        self.spectral.min_eigenvalue() > self.spectral.rank_threshold(tol)
    }

    pub fn power(
        &self,
        exponent: f64,
        policy: KernelPolicy,
        tol: &ToleranceConfig,
    ) -> Result<CMatrix> {
        psd_power_from_eigen(&self.spectral, exponent, policy, tol)
    }

    /// Eigenvalues of the state read off in an arbitrary orthonormal basis
    /// that diagonalizes it.
    pub fn eigenvalues_in_basis(&self, basis: &CMatrix, tol: &ToleranceConfig) -> Result<Vec<f64>> {
        let d = self.dim();
        if basis.rows() != d || basis.cols() != d {
            return Err(Error::InvalidBasis(format!(
                "basis is {}x{}, state has dimension {d}",
                basis.rows(),
                basis.cols()
            )));
        }
        let u = unitarity_residual(basis);
        if u > tol.projector {
            return Err(Error::InvalidBasis(format!(
                "basis columns are not orthonormal (residual {u:e})"
            )));
        }
        let rotated = &(&basis.adjoint() * &self.matrix) * basis;
        let off = rotated.off_diagonal_norm();
        if off > tol.projector.max(tol.herm * self.matrix.frobenius_norm()) {
            return Err(Error::InvalidBasis(format!(
                "basis does not diagonalize the state (off-diagonal norm {off:e})"
            )));
        }
        Ok(rotated.diagonal().iter().map(|z| z.re).collect())
    }
}

/// A linear map `L(C^m) → L(C^n)` stored as its standard Choi matrix
/// `Σ_ij |i⟩⟨j| ⊗ ℰ(|i⟩⟨j|)`.
///
/// Complete positivity and trace preservation are properties that can be
/// queried; neither is required to hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    dim_in: usize,
    dim_out: usize,
    choi_std: CMatrix,
}

impl Channel {
    pub fn from_choi(dim_in: usize, dim_out: usize, choi_std: CMatrix) -> Result<Self> {
        let n = dim_in * dim_out;
        if choi_std.rows() != n || choi_std.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "Choi matrix of a {dim_in}->{dim_out} map must be {n}x{n}, got {}x{}",
                choi_std.rows(),
                choi_std.cols()
            )));
        }
        Ok(Self {
            dim_in,
            dim_out,
            choi_std,
        })
    }

    pub fn from_kraus(ops: &[CMatrix]) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::InvalidInput("empty Kraus list".into()))?;
        let (n, m) = (first.rows(), first.cols());
        if ops.iter().any(|k| k.rows() != n || k.cols() != m) {
            return Err(Error::DimensionMismatch(
                "Kraus operators must share one shape".into(),
            ));
        }
        let mut choi = CMatrix::zeros(m * n, m * n);
        for k in ops {
            // Column vector v[(i, a)] = K[a, i].
            let v: Vec<C64> = (0..m)
                .flat_map(|i| (0..n).map(move |a| (i, a)))
                .map(|(i, a)| k[(a, i)])
                .collect();
            let outer = CMatrix::outer(&v, &v);
            choi = &choi + &outer;
        }
        Self::from_choi(m, n, choi)
    }

    /// Builds a map from its action on matrix units. `f` must be linear;
    /// compositions of two antilinear maps qualify.
    pub fn from_fn(
        dim_in: usize,
        dim_out: usize,
        mut f: impl FnMut(&CMatrix) -> Result<CMatrix>,
    ) -> Result<Self> {
        let mut choi = CMatrix::zeros(dim_in * dim_out, dim_in * dim_out);
        for i in 0..dim_in {
            for j in 0..dim_in {
                let image = f(&CMatrix::unit(dim_in, dim_in, i, j))?;
                if image.rows() != dim_out || image.cols() != dim_out {
                    return Err(Error::DimensionMismatch(format!(
                        "map produced a {}x{} image, expected {dim_out}x{dim_out}",
                        image.rows(),
                        image.cols()
                    )));
                }
                for a in 0..dim_out {
                    for b in 0..dim_out {
                        choi[(i * dim_out + a, j * dim_out + b)] = image[(a, b)];
                    }
                }
            }
        }
        Self::from_choi(dim_in, dim_out, choi)
    }

    pub fn identity(m: usize) -> Self {
        Self::unitary(&CMatrix::identity(m)).expect("identity is a valid Kraus operator")
    }

    /// `X ↦ U X U†`.
    pub fn unitary(u: &CMatrix) -> Result<Self> {
        Self::from_kraus(std::slice::from_ref(u))
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn choi_std(&self) -> &CMatrix {
        &self.choi_std
    }

    pub fn is_square(&self) -> bool {
        self.dim_in == self.dim_out
    }

    /// `ℰ(X)_{ab} = Σ_ij X_ij C[(i,a),(j,b)]`.
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        let (m, n) = (self.dim_in, self.dim_out);
        if x.rows() != m || x.cols() != m {
            return Err(Error::DimensionMismatch(format!(
                "channel input must be {m}x{m}, got {}x{}",
                x.rows(),
                x.cols()
            )));
        }
        let mut out = CMatrix::zeros(n, n);
        for i in 0..m {
            for j in 0..m {
                let xij = x[(i, j)];
                if xij == C64::new(0.0, 0.0) {
                    continue;
                }
                for a in 0..n {
                    for b in 0..n {
                        out[(a, b)] += xij * self.choi_std[(i * n + a, j * n + b)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Hilbert–Schmidt adjoint `ℰ†: L(C^n) → L(C^m)`.
    pub fn adjoint(&self) -> Self {
        let (m, n) = (self.dim_in, self.dim_out);
        let choi = CMatrix::from_fn(n * m, n * m, |r, c| {
            let (a, i) = (r / m, r % m);
            let (b, j) = (c / m, c % m);
            self.choi_std[(j * n + b, i * n + a)]
        });
        Self {
            dim_in: n,
            dim_out: m,
            choi_std: choi,
        }
    }

    /// Kraus operators from the spectral decomposition of the Choi matrix.
    pub fn kraus(&self, tol: &ToleranceConfig) -> Result<Vec<CMatrix>> {
        let eig = herm_eig(&self.choi_std, tol)?;
        if eig.min_eigenvalue() < -tol.psd {
            return Err(Error::NotPositive {
                min_eigenvalue: eig.min_eigenvalue(),
            });
        }
        let cutoff = eig.rank_threshold(tol);
        let (m, n) = (self.dim_in, self.dim_out);
        Ok(eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > cutoff)
            .map(|(k, &l)| {
                let v = eig.vector(k);
                let s = l.sqrt();
                CMatrix::from_fn(n, m, |a, i| v[i * n + a] * s)
            })
            .collect())
    }

    /// `‖Tr_B C − I_m‖_F`.
    pub fn tp_residual(&self) -> f64 {
        let reduced = partial_trace(&self.choi_std, self.dim_in, self.dim_out, Factor::Second)
            .expect("Choi shape is validated at construction");
        reduced.distance(&CMatrix::identity(self.dim_in))
    }

    pub fn is_trace_preserving(&self, tol: &ToleranceConfig) -> bool {
        self.tp_residual() <= tol.tp
    }

    /// Smallest eigenvalue of the Choi matrix.
    pub fn choi_min_eigenvalue(&self, tol: &ToleranceConfig) -> Result<f64> {
        Ok(herm_eig(&self.choi_std, tol)?.min_eigenvalue())
    }

    pub fn is_completely_positive(&self, tol: &ToleranceConfig) -> Result<bool> {
        Ok(self.choi_min_eigenvalue(tol)? >= -tol.psd)
    }

    /// `‖C_self − C_other‖_F`; panics when the shapes differ.
    pub fn distance(&self, other: &Channel) -> f64 {
        assert_eq!(
            (self.dim_in, self.dim_out),
            (other.dim_in, other.dim_out),
            "comparing channels of different shapes"
        );
        self.choi_std.distance(&other.choi_std)
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &Channel) -> Result<Channel> {
        if self.dim_out != other.dim_in {
            return Err(Error::DimensionMismatch("incompatible composition".into()));
        }
        Channel::from_fn(self.dim_in, other.dim_out, |x| other.apply(&self.apply(x)?))
    }

    pub fn scale(&self, s: f64) -> Channel {
        Self {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            choi_std: self.choi_std.scale_real(s),
        }
    }

    pub fn add(&self, other: &Channel) -> Result<Channel> {
        if (self.dim_in, self.dim_out) != (other.dim_in, other.dim_out) {
            return Err(Error::DimensionMismatch(
                "adding maps of different shapes".into(),
            ));
        }
        Ok(Self {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            choi_std: &self.choi_std + &other.choi_std,
        })
    }
}

/// State-relative Choi matrix `κ` of a map with respect to a state `ρ`,
/// together with the orthonormal eigenbasis of `ρ` it was built in.
///
/// `κ` is stored in computational coordinates:
/// `κ = Σ_ij √(ρ_i ρ_j) |v_i⟩⟨v_j| ⊗ ℰ(|v_i⟩⟨v_j|)` where `v_i` are the basis
/// columns and `ρ_i` the matching eigenvalues.
#[derive(Debug, Clone)]
pub struct RelativeChoi {
    pub kappa: CMatrix,
    pub rho: DensityMatrix,
    pub basis: CMatrix,
    pub weights: Vec<f64>,
    pub dim_out: usize,
}

impl RelativeChoi {
    /// Validates the shape of a given `κ` against the state and basis.
    pub fn new(
        kappa: CMatrix,
        rho: DensityMatrix,
        basis: CMatrix,
        dim_out: usize,
        tol: &ToleranceConfig,
    ) -> Result<Self> {
        let m = rho.dim();
        if kappa.rows() != m * dim_out || kappa.cols() != m * dim_out {
            return Err(Error::DimensionMismatch(format!(
                "kappa must be {0}x{0}",
                m * dim_out
            )));
        }
        let weights = rho.eigenvalues_in_basis(&basis, tol)?;
        Ok(Self {
            kappa,
            rho,
            basis,
            weights,
            dim_out,
        })
    }

    pub fn dim_in(&self) -> usize {
        self.rho.dim()
    }

    /// `Tr_B κ`, the reduction to the input system.
    pub fn reduction_a(&self) -> CMatrix {
        partial_trace(&self.kappa, self.dim_in(), self.dim_out, Factor::Second)
            .expect("kappa shape is validated")
    }

    /// `Tr_A κ`, the reduction to the output system.
    pub fn reduction_b(&self) -> CMatrix {
        partial_trace(&self.kappa, self.dim_in(), self.dim_out, Factor::First)
            .expect("kappa shape is validated")
    }
}

/// `(W ⊗ I) X (W ⊗ I)†` with `W` of size `m`.
fn conjugate_first(x: &CMatrix, w: &CMatrix, n: usize) -> CMatrix {
    let big = tensor(w, &CMatrix::identity(n));
    &(&big * x) * &big.adjoint()
}

/// State-relative CJ map in the canonical eigenbasis of `ρ`.
pub fn cj_relative(
    ch: &Channel,
    rho: &DensityMatrix,
    tol: &ToleranceConfig,
) -> Result<RelativeChoi> {
    cj_relative_in_basis(ch, rho, rho.basis(), tol)
}

/// State-relative CJ map in a caller-chosen orthonormal eigenbasis of `ρ`.
pub fn cj_relative_in_basis(
    ch: &Channel,
    rho: &DensityMatrix,
    basis: &CMatrix,
    tol: &ToleranceConfig,
) -> Result<RelativeChoi> {
    let (m, n) = (ch.dim_in(), ch.dim_out());
    if rho.dim() != m {
        return Err(Error::DimensionMismatch(format!(
            "state has dimension {}, channel input {m}",
            rho.dim()
        )));
    }
    let weights = rho.eigenvalues_in_basis(basis, tol)?;
    // Blocks of (Wᵀ ⊗ I) C (W̄ ⊗ I) are ℰ(|w_i⟩⟨w_j|).
    let blocks = conjugate_first(ch.choi_std(), &basis.transpose(), n);
    let sqrt_w: Vec<f64> = weights.iter().map(|&p| p.max(0.0).sqrt()).collect();
    let scaled = CMatrix::from_fn(m * n, m * n, |r, c| {
        blocks[(r, c)] * (sqrt_w[r / n] * sqrt_w[c / n])
    });
    let kappa = conjugate_first(&scaled, basis, n);
    Ok(RelativeChoi {
        kappa,
        rho: rho.clone(),
        basis: basis.clone(),
        weights,
        dim_out: n,
    })
}

/// Recovers the map from `κ` by undoing the `√(ρ_i ρ_j)` weights block by
/// block in the recorded basis.
pub fn cj_invert(rc: &RelativeChoi, tol: &ToleranceConfig) -> Result<Channel> {
    let (m, n) = (rc.dim_in(), rc.dim_out);
    let threshold = tol.rank_rel * rc.weights.iter().cloned().fold(0.0, f64::max);
    if let Some(&bad) = rc.weights.iter().find(|&&w| w <= threshold) {
        return Err(Error::NonInvertibleState { eigenvalue: bad });
    }
    let rotated = conjugate_first(&rc.kappa, &rc.basis.adjoint(), n);
    let inv_sqrt: Vec<f64> = rc.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    let blocks = CMatrix::from_fn(m * n, m * n, |r, c| {
        rotated[(r, c)] * (inv_sqrt[r / n] * inv_sqrt[c / n])
    });
    let choi = conjugate_first(&blocks, &rc.basis.conj(), n);
    Channel::from_choi(m, n, choi)
}
