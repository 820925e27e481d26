//! Classical Markov chains, their detailed-balance conditions, the embedding
//! as a quantum channel and the reverse chain.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::balance::{dual_channel, Check};
use crate::channel::{Channel, DensityMatrix};
use crate::linalg::CMatrix;
use crate::{Error, Result, ToleranceConfig};

const STOCHASTIC_TOL: f64 = 1e-12;
const DUAL_CONSISTENCY_TOL: f64 = 1e-10;

/// Distribution `ρ` over `m` states and an `m×n` row-stochastic matrix `τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovChain {
    rho: Vec<f64>,
    tau: Vec<Vec<f64>>,
}

impl MarkovChain {
    pub fn new(rho: Vec<f64>, tau: Vec<Vec<f64>>) -> Result<Self> {
        if rho.is_empty() || tau.len() != rho.len() {
            return Err(Error::InvalidChain(format!(
                "distribution has {} entries, transition matrix {} rows",
                rho.len(),
                tau.len()
            )));
        }
        let n = tau[0].len();
        if n == 0 || tau.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidChain("ragged transition matrix".into()));
        }
        if rho
            .iter()
            .chain(tau.iter().flatten())
            .any(|&x| !(x >= 0.0 && x.is_finite()))
        {
            return Err(Error::InvalidChain(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        for (j, row) in tau.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidChain(format!(
                    "row {} of tau sums to {s}",
                    j + 1
                )));
            }
        }
        let total: f64 = rho.iter().sum();
        if (total - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidChain(format!("rho sums to {total}")));
        }
        Ok(Self { rho, tau })
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn tau(&self) -> &[Vec<f64>] {
        &self.tau
    }

    pub fn dim(&self) -> usize {
        self.rho.len()
    }

    pub fn dim_out(&self) -> usize {
        self.tau[0].len()
    }

    /// `σ = ρτ`.
    pub fn sigma(&self) -> Vec<f64> {
        (0..self.dim_out())
            .map(|k| (0..self.dim()).map(|j| self.rho[j] * self.tau[j][k]).sum())
            .collect()
    }

    fn require_square(&self) -> Result<()> {
        if self.dim() == self.dim_out() {
            Ok(())
        } else {
            Err(Error::NonSquare {
                dim_in: self.dim(),
                dim_out: self.dim_out(),
            })
        }
    }
}

/// Verdict of a classical balance check with its worst violating pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalCheck {
    pub passed: bool,
    pub max_violation: f64,
    /// 0-based `(i, j)` of the largest violation, when there is one.
    pub worst_pair: Option<(usize, usize)>,
}

fn worst_violation(m: usize, violation: impl Fn(usize, usize) -> f64) -> ClassicalCheck {
    let mut max = 0.0;
    let mut pair = None;
    for i in 0..m {
        for j in 0..m {
            let v = violation(i, j);
            if v > max {
                max = v;
                pair = Some((i, j));
            }
        }
    }
    let passed = max <= STOCHASTIC_TOL;
    ClassicalCheck {
        passed,
        max_violation: max,
        worst_pair: if passed { None } else { pair },
    }
}

/// `ρ_i τ_ij = ρ_j τ_ji` for all `i, j`.
pub fn check_classical_db(mc: &MarkovChain) -> Result<ClassicalCheck> {
    mc.require_square()?;
    let (r, t) = (&mc.rho, &mc.tau);
    Ok(worst_violation(mc.dim(), |i, j| {
        (r[i] * t[i][j] - r[j] * t[j][i]).abs()
    }))
}

/// `ρ_i τ_ij = ρ_{π(j)} τ_{π(j)π(i)}` for a 0-based involution `π`.
pub fn check_classical_db_parity(mc: &MarkovChain, pi: &[usize]) -> Result<ClassicalCheck> {
    mc.require_square()?;
    let m = mc.dim();
    if pi.len() != m || pi.iter().any(|&k| k >= m) || (0..m).any(|i| pi[pi[i]] != i) {
        return Err(Error::NotInvolution(format!(
            "{pi:?} is not an involutive permutation of {m} states"
        )));
    }
    let (r, t) = (&mc.rho, &mc.tau);
    Ok(worst_violation(m, |i, j| {
        (r[i] * t[i][j] - r[pi[j]] * t[pi[j]][pi[i]]).abs()
    }))
}

/// `ℰ(|i⟩⟨j|) = δ_ij Σ_k τ_ik |k⟩⟨k|`.
pub fn embed(mc: &MarkovChain) -> Result<Channel> {
    let (m, n) = (mc.dim(), mc.dim_out());
    let mut choi = CMatrix::zeros(m * n, m * n);
    for i in 0..m {
        for k in 0..n {
            choi[(i * n + k, i * n + k)] = C64::new(mc.tau[i][k], 0.0);
        }
    }
    Channel::from_choi(m, n, choi)
}

/// Reverse chain `τ′_kj = ρ_j τ_jk / σ_k`, with distribution `σ`.
pub fn reverse_chain(mc: &MarkovChain) -> Result<MarkovChain> {
    let sigma = mc.sigma();
    if let Some(index) = sigma.iter().position(|&s| s <= 0.0) {
        return Err(Error::ZeroSigmaComponent { index });
    }
    let tau: Vec<Vec<f64>> = (0..mc.dim_out())
        .map(|k| {
            let row: Vec<f64> = (0..mc.dim())
                .map(|j| mc.rho[j] * mc.tau[j][k] / sigma[k])
                .collect();
            // Renormalize away the last-bit rounding of σ_k.
            let s: f64 = row.iter().sum();
            row.iter().map(|x| x / s).collect()
        })
        .collect();
    MarkovChain::new(sigma, tau)
}

/// Compares the quantum dual of the embedded chain with the embedded reverse
/// chain, `‖choi(ℰ′) − choi(embed(τ′))‖_F ≤ 1e-10`.
pub fn verify_classical_dual_consistency(mc: &MarkovChain, tol: &ToleranceConfig) -> Result<Check> {
    let reversed = reverse_chain(mc)?;
    let rho = DensityMatrix::diagonal(&mc.rho, tol)?;
    let dual = dual_channel(&embed(mc)?, &rho, tol)?;
    Ok(Check::new(
        dual.distance(&embed(&reversed)?),
        DUAL_CONSISTENCY_TOL,
    ))
}

/// Parses a 1-based permutation as written in chain files.
pub fn permutation_from_one_based(pi: &[usize]) -> Result<Vec<usize>> {
    pi.iter()
        .map(|&k| {
            k.checked_sub(1)
                .ok_or_else(|| Error::InvalidInput("permutation entries are 1-based".into()))
        })
        .collect()
}
