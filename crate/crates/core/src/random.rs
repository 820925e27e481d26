//! Seeded random instances.
//!
//! The stream is ChaCha8 (as implemented by `rand_chacha` 0.3) seeded with
//! `seed_from_u64`. Each uniform deviate takes one `u64` and keeps its top 53
//! bits, `u = (x >> 11) · 2^-53`. Standard normals use the Box–Muller cosine
//! branch on two consecutive uniforms, `√(-2 ln(1 - u1)) · cos(2π u2)`, and a
//! complex normal is two real normals scaled by `1/√2`. These rules are the
//! whole contract, so the same seed yields the same instance on any platform.

use num_complex::Complex64 as C64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::balance::{kms_dual, kms_dual_heisenberg};
use crate::channel::{cj_invert, Channel, DensityMatrix, RelativeChoi};
use crate::classical::MarkovChain;
use crate::linalg::{
    partial_trace, psd_power, swap_conjugate, vec_inner, vec_norm, CMatrix, Factor, KernelPolicy,
};
use crate::parity::{q_map, ParityOp, ReversingOp};
use crate::ToleranceConfig;

pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn complex_normal(&mut self) -> C64 {
        let re = self.normal();
        let im = self.normal();
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    /// Integer uniform on `lo..=hi`.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + ((self.uniform() * (hi - lo + 1) as f64) as usize).min(hi - lo)
    }

    pub fn coin(&mut self) -> bool {
        self.uniform() < 0.5
    }

    /// Matrix of i.i.d. standard complex normals, filled row by row.
    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| self.complex_normal())
    }

    /// Unitary from Gram–Schmidt on the columns of a Gaussian matrix.
    pub fn haar_unitary(&mut self, n: usize) -> CMatrix {
        let g = self.gaussian_matrix(n, n);
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
        for c in 0..n {
            let mut v = g.column(c);
            for u in &cols {
                let p = vec_inner(u, &v);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= p * ui;
                }
            }
            let norm = vec_norm(&v);
            cols.push(v.iter().map(|z| z / norm).collect());
        }
        CMatrix::from_columns(&cols).expect("columns share a length")
    }

    /// Full-rank Wishart state `GG† / Tr(GG†)`.
    pub fn random_state(&mut self, m: usize) -> DensityMatrix {
        let g = self.gaussian_matrix(m, m);
        let w = &g * &g.adjoint();
        let tr = w.trace().re;
        DensityMatrix::new(w.scale_real(1.0 / tr), &ToleranceConfig::default())
            .expect("Wishart matrices are states")
    }

    /// Kraus operators `G_k S^{-1/2}` with `S = Σ G_k† G_k`.
    pub fn random_kraus(&mut self, m: usize, n: usize, count: usize) -> Vec<CMatrix> {
        let gs: Vec<CMatrix> = (0..count).map(|_| self.gaussian_matrix(n, m)).collect();
        let s = gs
            .iter()
            .fold(CMatrix::zeros(m, m), |acc, g| &acc + &(&g.adjoint() * g));
        let s_inv = psd_power(&s, -0.5, KernelPolicy::Reject, &ToleranceConfig::default())
            .expect("Gaussian frame operator is invertible");
        gs.iter().map(|g| g * &s_inv).collect()
    }

    pub fn random_channel(&mut self, m: usize, n: usize, count: usize) -> Channel {
        Channel::from_kraus(&self.random_kraus(m, n, count)).expect("consistent Kraus shapes")
    }

    /// Convex mixture of `count` unitary channels with random weights; unital.
    pub fn random_mixed_unitary(&mut self, m: usize, count: usize) -> Channel {
        let weights: Vec<f64> = (0..count).map(|_| self.uniform() + 0.1).collect();
        let total: f64 = weights.iter().sum();
        let ops: Vec<CMatrix> = weights
            .iter()
            .map(|w| self.haar_unitary(m).scale_real((w / total).sqrt()))
            .collect();
        Channel::from_kraus(&ops).expect("consistent Kraus shapes")
    }

    /// Positive semidefinite `GG†` on `C^m ⊗ C^m`.
    fn random_kappa0(&mut self, m: usize) -> CMatrix {
        let g = self.gaussian_matrix(m * m, m * m);
        &g * &g.adjoint()
    }

    /// Channel and state satisfying elementary-transition detailed balance:
    /// `κ = (κ₀ + Rκ₀R) / (2 Tr κ₀)`, `ρ = Tr₂ κ`, `ℰ = cj_invert(κ, ρ)`.
    pub fn random_etdb(&mut self, m: usize) -> (Channel, DensityMatrix) {
        let k0 = self.random_kappa0(m);
        let kappa = symmetrize(&k0, &swap_conjugate(&k0, m, m).expect("square"));
        channel_from_kappa(kappa, m)
    }

    /// As `random_etdb`, symmetrized under `𝒬` for the given parity instead
    /// of the plain swap.
    pub fn random_etdb_p(&mut self, m: usize, parity: &ParityOp) -> (Channel, DensityMatrix) {
        let k0 = self.random_kappa0(m);
        let q = q_map(parity, &k0).expect("parity dimension matches");
        channel_from_kappa(symmetrize(&k0, &q), m)
    }

    /// Reversing operation diagonal in the eigenbasis `V` of `rho`: unitary
    /// `V diag(±1) V†`, or antiunitary with matrix `V diag(e^{iφ}) V^T`.
    pub fn random_reversing_for(&mut self, rho: &DensityMatrix, antiunitary: bool) -> ReversingOp {
        let v = rho.basis();
        let d: Vec<C64> = (0..rho.dim())
            .map(|_| {
                if antiunitary {
                    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * self.uniform())
                } else if self.coin() {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(-1.0, 0.0)
                }
            })
            .collect();
        let tail = if antiunitary {
            v.transpose()
        } else {
            v.adjoint()
        };
        let matrix = &(v * &CMatrix::diag(&d)) * &tail;
        ReversingOp::new(matrix, antiunitary).expect("diagonal phases give an involution")
    }

    /// Channel with `ℰ(ρ) = ρ` that satisfies no balance condition in
    /// general: `𝒰 ∘ 𝒜^KMS ∘ 𝒜` for a random channel `𝒜` and a random
    /// unitary `𝒰` commuting with `ρ`.
    pub fn random_invariant_channel(&mut self, rho: &DensityMatrix) -> Channel {
        let tol = ToleranceConfig::default();
        let m = rho.dim();
        let a = self.random_channel(m, m, 2);
        let back = kms_dual(&a, rho, &tol).expect("Gaussian channels have invertible outputs");
        let v = rho.basis();
        let phases: Vec<C64> = (0..m)
            .map(|_| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * self.uniform()))
            .collect();
        let u = &(v * &CMatrix::diag(&phases)) * &v.adjoint();
        let rotate = Channel::unitary(&u).expect("unitary");
        a.then(&back)
            .and_then(|c| c.then(&rotate))
            .expect("matching dimensions")
    }

    /// Instance satisfying SQDB-θ: `ℰ = ½(ℰ₀ + (θ ∘ ℰ₀^KMS ∘ θ)†)` for a
    /// random invariant `ℰ₀` and a reversing operation fixing `ρ`.
    pub fn random_sqdb_theta(
        &mut self,
        m: usize,
        antiunitary: bool,
    ) -> (Channel, DensityMatrix, ReversingOp) {
        let tol = ToleranceConfig::default();
        let rho = self.random_state(m);
        let th = self.random_reversing_for(&rho, antiunitary);
        let e0 = self.random_invariant_channel(&rho);
        let heis = kms_dual_heisenberg(&e0, &rho, &tol).expect("invariant state is invertible");
        let mirrored = Channel::from_fn(m, m, |x| th.apply(&heis.apply(&th.apply(x)?)?))
            .expect("well-formed map")
            .adjoint();
        let ch = e0.add(&mirrored).expect("matching dimensions").scale(0.5);
        (ch, rho, th)
    }

    /// Row-stochastic chain with a random strictly positive distribution.
    /// Entries of `τ` are zeroed with probability `sparsity`.
    pub fn random_markov_chain(&mut self, m: usize, sparsity: f64) -> MarkovChain {
        let rho: Vec<f64> = (0..m).map(|_| self.uniform() + 0.05).collect();
        let total: f64 = rho.iter().sum();
        let rho: Vec<f64> = rho.iter().map(|x| x / total).collect();
        let mut tau = vec![vec![0.0; m]; m];
        for (j, row) in tau.iter_mut().enumerate() {
            for x in row.iter_mut() {
                if self.uniform() >= sparsity {
                    *x = self.uniform() + 0.05;
                }
            }
            if row.iter().all(|&x| x == 0.0) {
                row[j] = 1.0;
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
        MarkovChain::new(rho, tau).expect("generated chain is valid")
    }

    /// Chain in classical detailed balance: `τ_ij = w_ij / ρ_i` rescaled so
    /// that rows are stochastic, from a symmetric weight matrix.
    #[allow(clippy::needless_range_loop)]
    pub fn random_db_chain(&mut self, m: usize) -> MarkovChain {
        let mut w = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in i..m {
                let x = self.uniform() + 0.05;
                w[i][j] = x;
                w[j][i] = x;
            }
        }
        let total: f64 = w.iter().flatten().sum();
        let rho: Vec<f64> = w.iter().map(|r| r.iter().sum::<f64>() / total).collect();
        let tau: Vec<Vec<f64>> = w
            .iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(|x| x / s).collect()
            })
            .collect();
        MarkovChain::new(rho, tau).expect("generated chain is valid")
    }
}

fn symmetrize(k0: &CMatrix, image: &CMatrix) -> CMatrix {
    let tr = k0.trace().re;
    (k0 + image).scale_real(0.5 / tr)
}

fn channel_from_kappa(kappa: CMatrix, m: usize) -> (Channel, DensityMatrix) {
    let tol = ToleranceConfig::default();
    let rho_matrix = partial_trace(&kappa, m, m, Factor::Second).expect("square kappa");
    let rho = DensityMatrix::new(rho_matrix, &tol).expect("reduction of a state is a state");
    let basis = rho.basis().clone();
    let rc = RelativeChoi::new(kappa, rho.clone(), basis, m, &tol).expect("consistent shapes");
    let ch = cj_invert(&rc, &tol).expect("Gaussian reductions are full rank");
    (ch, rho)
}
