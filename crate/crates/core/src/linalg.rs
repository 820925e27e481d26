//! Dense complex matrices and the handful of kernels the rest of the crate
//! is built on: Kronecker products, partial trace and transpose, the swap
//! operator and a cyclic Jacobi eigensolver for Hermitian matrices.
//!
//! Tensor indices follow the row-major convention `(a, b) -> a * dim_b + b`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result, ToleranceConfig};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Components with modulus above this are treated as nonzero when fixing the
/// global phase of an eigenvector.
const PHASE_THRESHOLD: f64 = 1e-8;

/// Minimum residual norm for a projected standard basis vector to seed a
/// canonical eigenspace basis vector.
const SEED_THRESHOLD: f64 = 1e-3;

const MAX_SWEEPS: usize = 64;

/// Which tensor factor an operation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    First,
    Second,
}

/// How `psd_power` treats eigenvalues in the numerical kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelPolicy {
    /// Negative exponents on a zero eigenvalue are an error.
    Reject,
    /// Zero eigenvalues map to zero (Moore-Penrose style).
    Pseudo,
}

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Builds a matrix from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn diag(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diag(&v)
    }

    /// Matrix unit `|i⟩⟨j|`.
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        m[(i, j)] = ONE;
        m
    }

    /// `|u⟩⟨v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<C64>]) -> Result<Self> {
        let rows = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch("columns of unequal length".into()));
        }
        Ok(Self::from_fn(rows, cols.len(), |r, c| cols[c][r]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖self − other‖_F`; panics on shape mismatch.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "distance between matrices of different shapes"
        );
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Frobenius inner product `Tr(self† other)`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matrix-vector shape mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Hermitian part `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_real(0.5)
    }

    /// `‖A − A†‖_F / max(‖A‖_F, 1e-300)`.
    pub fn hermiticity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let norm = self.frobenius_norm().max(1e-300);
        self.distance(&self.adjoint()) / norm
    }

    /// `(i, j)` block of size `block x block` of a matrix viewed as
    /// `outer ⊗ inner` with inner dimension `block`.
    pub fn block(&self, i: usize, j: usize, block_rows: usize, block_cols: usize) -> Self {
        Self::from_fn(block_rows, block_cols, |r, c| {
            self[(i * block_rows + r, j * block_cols + c)]
        })
    }

    /// Maximum absolute value among off-diagonal entries.
    pub fn off_diagonal_norm(&self) -> f64 {
        let mut s = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                if r != c {
                    s += self[(r, c)].norm_sqr();
                }
            }
        }
        s.sqrt()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(r) {
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

// JSON: row-major nested arrays of [re, im] pairs.
impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.rows)
            .map(|r| self.row(r).iter().map(|z| [z.re, z.im]).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let rows: Vec<Vec<C64>> = rows
            .into_iter()
            .map(|r| r.into_iter().map(|[re, im]| C64::new(re, im)).collect())
            .collect();
        CMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨u|v⟩`, antilinear in `u`.
pub fn vec_inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Rotates `v` so that its first component with modulus above a small
/// threshold is real and positive.
pub fn fix_phase(v: &mut [C64]) {
    if let Some(z) = v.iter().find(|z| z.norm() > PHASE_THRESHOLD).copied() {
        let phase = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= phase;
        }
    }
}

/// Kronecker product `A ⊗ B`; row index `i_A * rows(B) + i_B`.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (br, bc) = (b.rows, b.cols);
    let mut out = CMatrix::zeros(a.rows * br, a.cols * bc);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let s = a[(ar, ac)];
            if s == ZERO {
                continue;
            }
            for r in 0..br {
                for c in 0..bc {
                    out[(ar * br + r, ac * bc + c)] = s * b[(r, c)];
                }
            }
        }
    }
    out
}

pub fn tensor_vec(u: &[C64], v: &[C64]) -> Vec<C64> {
    u.iter()
        .flat_map(|a| v.iter().map(move |b| a * b))
        .collect()
}

fn check_bipartite(x: &CMatrix, dim_a: usize, dim_b: usize) -> Result<()> {
    let n = dim_a * dim_b;
    if x.rows != n || x.cols != n {
        return Err(Error::DimensionMismatch(format!(
            "expected {n}x{n} operator on a {dim_a}x{dim_b} bipartite space, got {}x{}",
            x.rows, x.cols
        )));
    }
    Ok(())
}

/// Partial trace over the indicated factor of an operator on `H_A ⊗ H_B`.
///
/// `Factor::Second` returns the reduction to `A`, `Factor::First` the
/// reduction to `B`.
pub fn partial_trace(x: &CMatrix, dim_a: usize, dim_b: usize, which: Factor) -> Result<CMatrix> {
    check_bipartite(x, dim_a, dim_b)?;
    Ok(match which {
        Factor::Second => CMatrix::from_fn(dim_a, dim_a, |i, j| {
            (0..dim_b).map(|k| x[(i * dim_b + k, j * dim_b + k)]).sum()
        }),
        Factor::First => CMatrix::from_fn(dim_b, dim_b, |a, b| {
            (0..dim_a).map(|k| x[(k * dim_b + a, k * dim_b + b)]).sum()
        }),
    })
}

/// Transposes the indicated tensor factor in the computational basis.
pub fn partial_transpose(
    x: &CMatrix,
    dim_a: usize,
    dim_b: usize,
    which: Factor,
) -> Result<CMatrix> {
    check_bipartite(x, dim_a, dim_b)?;
    let n = dim_a * dim_b;
    Ok(CMatrix::from_fn(n, n, |r, c| {
        let (ia, ib) = (r / dim_b, r % dim_b);
        let (ja, jb) = (c / dim_b, c % dim_b);
        match which {
            Factor::First => x[(ja * dim_b + ib, ia * dim_b + jb)],
            Factor::Second => x[(ia * dim_b + jb, ja * dim_b + ib)],
        }
    }))
}

/// Swap `R: H_A ⊗ H_B → H_B ⊗ H_A`, `R(e_i ⊗ f_j) = f_j ⊗ e_i`, with
/// `dim H_A = m` and `dim H_B = n`.
pub fn swap_operator(m: usize, n: usize) -> CMatrix {
    let mut r = CMatrix::zeros(m * n, m * n);
    for i in 0..m {
        for j in 0..n {
            r[(j * m + i, i * n + j)] = ONE;
        }
    }
    r
}

/// Applies `Z ↦ R Z R†`, mapping `L(H_A ⊗ H_B)` to `L(H_B ⊗ H_A)`.
pub fn swap_conjugate(z: &CMatrix, m: usize, n: usize) -> Result<CMatrix> {
    check_bipartite(z, m, n)?;
    Ok(CMatrix::from_fn(m * n, m * n, |r, c| {
        let (jr, ir) = (r / m, r % m);
        let (jc, ic) = (c / m, c % m);
        z[(ir * n + jr, ic * n + jc)]
    }))
}

/// Spectral decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEigen {
    /// Sorted in descending order.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `eigenvalues`.
    pub eigenvectors: CMatrix,
}

impl HermEigen {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.eigenvectors.column(k)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn reconstruct(&self) -> CMatrix {
        let v = &self.eigenvectors;
        let d = CMatrix::diag_real(&self.eigenvalues);
        &(v * &d) * &v.adjoint()
    }

    /// Index ranges of eigenvalue clusters, in descending order.
    pub fn clusters(&self, tol: &ToleranceConfig, scale: f64) -> Vec<std::ops::Range<usize>> {
        cluster_ranges(&self.eigenvalues, tol.cluster_rel * scale.max(1.0))
    }

    /// Rank threshold `rank_rel * max(λ_max, 0)`.
    pub fn rank_threshold(&self, tol: &ToleranceConfig) -> f64 {
        tol.rank_rel * self.max_eigenvalue().max(0.0)
    }
}

fn cluster_ranges(values: &[f64], gap: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || (values[k - 1] - values[k]).abs() > gap {
            out.push(start..k);
            start = k;
        }
    }
    out
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
///
/// Eigenvalues are returned in descending order. Within an eigenvalue
/// cluster the eigenvectors are replaced by a canonical basis: standard basis
/// vectors are projected onto the eigenspace in index order and
/// Gram-Schmidt orthonormalized, and each vector's first nonzero component is
/// made real and positive.
pub fn herm_eig(a: &CMatrix, tol: &ToleranceConfig) -> Result<HermEigen> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            a.rows, a.cols
        )));
    }
    let residual = a.hermiticity_residual();
    let norm = a.frobenius_norm();
    if norm > 0.0 && residual > tol.herm {
        return Err(Error::NotHermitian { residual });
    }
    let n = a.rows;
    let mut m = a.hermitian_part();
    let mut v = CMatrix::identity(n);
    let target = (1e-3 * tol.eig).max(1e-15) * norm;
    let mut off = m.off_diagonal_norm();
    let mut sweeps = 0;
    while off > target && sweeps < MAX_SWEEPS {
        for p in 0..n {
            for q in (p + 1)..n {
                jacobi_rotate(&mut m, &mut v, p, q);
            }
        }
        off = m.off_diagonal_norm();
        sweeps += 1;
    }
    if off > tol.eig * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::NoConvergence { off_norm: off });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let raw: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| raw[j].total_cmp(&raw[i]).then(i.cmp(&j)));
    let sorted: Vec<f64> = order.iter().map(|&i| raw[i]).collect();

    let herm = a.hermitian_part();
    let mut values = Vec::with_capacity(n);
    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(n);
    for range in cluster_ranges(&sorted, tol.cluster_rel * norm.max(1.0)) {
        let raw_vectors: Vec<Vec<C64>> = range.clone().map(|k| v.column(order[k])).collect();
        let basis = if raw_vectors.len() == 1 {
            let mut u = raw_vectors[0].clone();
            fix_phase(&mut u);
            vec![u]
        } else {
            let projector = projector_from_vectors(&raw_vectors, n);
            canonical_basis(&projector, raw_vectors.len())
        };
        for u in basis {
            let au = herm.mul_vec(&u);
            values.push(vec_inner(&u, &au).re);
            columns.push(u);
        }
    }
    Ok(HermEigen {
        eigenvalues: values,
        eigenvectors: CMatrix::from_columns(&columns)?,
    })
}

fn jacobi_rotate(m: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    // Skip rotations that can no longer change the diagonal.
    if r < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        m[(p, q)] = ZERO;
        m[(q, p)] = ZERO;
        return;
    }
    let phase = apq / r; // e^{iφ}
    let theta = (aqq - app) / (2.0 * r);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    // J restricted to (p, q): [[c, s], [-s e^{-iφ}, c e^{-iφ}]].
    let jpp = C64::new(c, 0.0);
    let jpq = C64::new(s, 0.0);
    let jqp = -phase.conj() * s;
    let jqq = phase.conj() * c;
    let n = m.rows;
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = mkp * jpp + mkq * jqp;
        m[(k, q)] = mkp * jpq + mkq * jqq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = jpp.conj() * mpk + jqp.conj() * mqk;
        m[(q, k)] = jpq.conj() * mpk + jqq.conj() * mqk;
    }
    m[(p, q)] = ZERO;
    m[(q, p)] = ZERO;
    m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * jpp + vkq * jqp;
        v[(k, q)] = vkp * jpq + vkq * jqq;
    }
}

fn projector_from_vectors(vectors: &[Vec<C64>], n: usize) -> CMatrix {
    let mut p = CMatrix::zeros(n, n);
    for u in vectors {
        for r in 0..n {
            for c in 0..n {
                p[(r, c)] += u[r] * u[c].conj();
            }
        }
    }
    p
}

/// Canonical orthonormal basis of the range of a projector of known rank.
///
/// Standard basis vectors are projected in index order, orthogonalized
/// against the vectors already chosen, and accepted when the residual is not
/// negligible. Each accepted vector gets the `fix_phase` convention.
pub fn canonical_basis(projector: &CMatrix, rank: usize) -> Vec<Vec<C64>> {
    let n = projector.rows;
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(rank);
    let mut leftovers: Vec<(f64, Vec<C64>)> = Vec::new();
    for k in 0..n {
        if basis.len() == rank {
            break;
        }
        let mut w = projector.column(k);
        for u in &basis {
            let c = vec_inner(u, &w);
            for (wi, ui) in w.iter_mut().zip(u) {
                *wi -= c * ui;
            }
        }
        let norm = vec_norm(&w);
        if norm > SEED_THRESHOLD {
            let mut u: Vec<C64> = w.iter().map(|z| z / norm).collect();
            fix_phase(&mut u);
            basis.push(u);
        } else {
            leftovers.push((norm, w));
        }
    }
    // Unreachable for exact projectors of the stated rank; kept so that a
    // slightly inconsistent projector still yields `rank` vectors.
    while basis.len() < rank {
        let mut best: Option<Vec<C64>> = None;
        let mut best_norm = 0.0;
        for k in 0..n {
            let mut w = projector.column(k);
            for u in &basis {
                let c = vec_inner(u, &w);
                for (wi, ui) in w.iter_mut().zip(u) {
                    *wi -= c * ui;
                }
            }
            let norm = vec_norm(&w);
            if norm > best_norm {
                best_norm = norm;
                best = Some(w);
            }
        }
        match best {
            Some(w) if best_norm > 0.0 => {
                let mut u: Vec<C64> = w.iter().map(|z| z / best_norm).collect();
                fix_phase(&mut u);
                basis.push(u);
            }
            _ => break,
        }
    }
    basis
}

/// `A^p` for positive semidefinite `A`, through its eigendecomposition.
///
/// Eigenvalues at or below the rank threshold are clamped to zero; a negative
/// exponent on such an eigenvalue is an error under `KernelPolicy::Reject`
/// and maps to zero under `KernelPolicy::Pseudo`.
pub fn psd_power(
    a: &CMatrix,
    exponent: f64,
    policy: KernelPolicy,
    tol: &ToleranceConfig,
) -> Result<CMatrix> {
    let eig = herm_eig(a, tol)?;
    psd_power_from_eigen(&eig, exponent, policy, tol)
}

pub fn psd_power_from_eigen(
    eig: &HermEigen,
    exponent: f64,
    policy: KernelPolicy,
    tol: &ToleranceConfig,
) -> Result<CMatrix> {
    let min = eig.min_eigenvalue();
    if min < -tol.psd {
        return Err(Error::NotPositive {
            min_eigenvalue: min,
        });
    }
    let cutoff = eig.rank_threshold(tol);
    let mut powered = Vec::with_capacity(eig.dim());
    for &lambda in &eig.eigenvalues {
        let value = if lambda > cutoff {
            lambda.powf(exponent)
        } else if exponent > 0.0 {
            0.0
        } else {
            match policy {
                KernelPolicy::Reject => return Err(Error::SingularPower),
                KernelPolicy::Pseudo => 0.0,
            }
        };
        powered.push(value);
    }
    let v = &eig.eigenvectors;
    Ok(&(v * &CMatrix::diag_real(&powered)) * &v.adjoint())
}

/// `‖V†V − I‖_F`.
pub fn unitarity_residual(v: &CMatrix) -> f64 {
    if !v.is_square() {
        return f64::INFINITY;
    }
    (&v.adjoint() * v).distance(&CMatrix::identity(v.cols))
}

/// Transpose taken in the orthonormal basis given by the columns of `basis`:
/// `X^{T_W} = W (W† X W)^T W†`.
pub fn transpose_in_basis(x: &CMatrix, basis: &CMatrix) -> CMatrix {
    let inner = &(&basis.adjoint() * x) * basis;
    &(basis * &inner.transpose()) * &basis.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::SeededRng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn tensor_of_identities_is_identity() {
        let t = tensor(&CMatrix::identity(2), &CMatrix::identity(3));
        assert_eq!(t, CMatrix::identity(6));
    }

    #[test]
    fn tensor_of_basis_projectors() {
        let p0 = CMatrix::unit(2, 2, 0, 0);
        let p1 = CMatrix::unit(2, 2, 1, 1);
        assert_eq!(tensor(&p0, &p1), CMatrix::unit(4, 4, 1, 1));
    }

    #[test]
    fn tensor_matches_index_loop() {
        let mut rng = SeededRng::new(11);
        let a = rng.gaussian_matrix(3, 3);
        let b = rng.gaussian_matrix(2, 2);
        let t = tensor(&a, &b);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..2 {
                    for l in 0..2 {
                        assert_eq!(t[(i * 2 + k, j * 2 + l)], a[(i, j)] * b[(k, l)]);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_trace_of_product() {
        let mut rng = SeededRng::new(3);
        let a = rng.gaussian_matrix(2, 2);
        let b = rng.gaussian_matrix(3, 3);
        let ab = tensor(&a, &b);
        let ra = partial_trace(&ab, 2, 3, Factor::Second).unwrap();
        assert!(ra.distance(&a.scale(b.trace())) < 1e-12);
        let rb = partial_trace(&ab, 2, 3, Factor::First).unwrap();
        assert!(rb.distance(&b.scale(a.trace())) < 1e-12);
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let x = CMatrix::identity(5);
        assert!(matches!(
            partial_trace(&x, 2, 3, Factor::First),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn partial_transpose_product_and_oracle() {
        let mut rng = SeededRng::new(5);
        let a = rng.gaussian_matrix(2, 2);
        let b = rng.gaussian_matrix(2, 2);
        let pt = partial_transpose(&tensor(&a, &b), 2, 2, Factor::First).unwrap();
        assert!(pt.distance(&tensor(&a.transpose(), &b)) < 1e-14);

        let x = rng.gaussian_matrix(4, 4);
        let y = partial_transpose(&x, 2, 2, Factor::First).unwrap();
        for ia in 0..2 {
            for ib in 0..2 {
                for ja in 0..2 {
                    for jb in 0..2 {
                        assert_eq!(y[(ia * 2 + ib, ja * 2 + jb)], x[(ja * 2 + ib, ia * 2 + jb)]);
                    }
                }
            }
        }
        let back = partial_transpose(&y, 2, 2, Factor::First).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn swap_is_standard_two_qubit_swap() {
        let r = swap_operator(2, 2);
        let expected = CMatrix::from_real(
            4,
            4,
            &[
                1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1.,
            ],
        )
        .unwrap();
        assert_eq!(r, expected);
        let r3 = swap_operator(3, 3);
        assert!(unitarity_residual(&r3) < 1e-15);
    }

    #[test]
    fn swap_exchanges_tensor_factors() {
        let mut rng = SeededRng::new(8);
        for _ in 0..5 {
            let a = rng.gaussian_matrix(3, 3);
            let b = rng.gaussian_matrix(3, 3);
            let r = swap_operator(3, 3);
            let lhs = &(&r * &tensor(&a, &b)) * &r.adjoint();
            assert!(lhs.distance(&tensor(&b, &a)) < 1e-13);
            let fast = swap_conjugate(&tensor(&a, &b), 3, 3).unwrap();
            assert!(fast.distance(&lhs) < 1e-13);
        }
        // Rectangular case: H_2 ⊗ H_3 → H_3 ⊗ H_2.
        let a = rng.gaussian_matrix(2, 2);
        let b = rng.gaussian_matrix(3, 3);
        let r = swap_operator(2, 3);
        let lhs = &(&r * &tensor(&a, &b)) * &r.adjoint();
        assert!(lhs.distance(&tensor(&b, &a)) < 1e-13);
        assert!(
            swap_conjugate(&tensor(&a, &b), 2, 3)
                .unwrap()
                .distance(&lhs)
                < 1e-13
        );
    }

    #[test]
    fn eig_of_diagonal_matrix() {
        let a = CMatrix::diag_real(&[3.0, 1.0, 2.0]);
        let e = herm_eig(&a, &tol()).unwrap();
        assert_eq!(e.eigenvalues, vec![3.0, 2.0, 1.0]);
        let expected = CMatrix::from_real(3, 3, &[1., 0., 0., 0., 0., 1., 0., 1., 0.]).unwrap();
        assert!(e.eigenvectors.distance(&expected) < 1e-15);
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = SeededRng::new(21);
        for _ in 0..10 {
            let g = rng.gaussian_matrix(6, 6);
            let a = g.hermitian_part();
            let e = herm_eig(&a, &tol()).unwrap();
            assert!(e.reconstruct().distance(&a) <= 1e-10 * a.frobenius_norm());
            assert!(unitarity_residual(&e.eigenvectors) <= 1e-11);
            assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let a = CMatrix::from_real(2, 2, &[0., 1., 0., 0.]).unwrap();
        assert!(matches!(
            herm_eig(&a, &tol()),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn eig_degenerate_cluster_uses_standard_basis_order() {
        // Identity with a random unitary applied: canonical basis is e_0, e_1, e_2.
        let mut rng = SeededRng::new(2);
        let u = rng.haar_unitary(3);
        let a = &(&u * &CMatrix::identity(3)) * &u.adjoint();
        let e = herm_eig(&a, &tol()).unwrap();
        assert!(e.eigenvectors.distance(&CMatrix::identity(3)) < 1e-12);
    }

    #[test]
    fn eig_phase_convention() {
        let mut rng = SeededRng::new(4);
        let a = rng.gaussian_matrix(4, 4).hermitian_part();
        let e = herm_eig(&a, &tol()).unwrap();
        for k in 0..4 {
            let v = e.vector(k);
            let first = v.iter().find(|z| z.norm() > 1e-8).unwrap();
            assert!(first.im.abs() < 1e-14 && first.re > 0.0);
        }
    }

    #[test]
    fn psd_power_examples() {
        let id = CMatrix::identity(3);
        let p = psd_power(&id, -0.5, KernelPolicy::Reject, &tol()).unwrap();
        assert!(p.distance(&id) < 1e-15);
        let d = CMatrix::diag_real(&[4.0, 1.0]);
        let s = psd_power(&d, 0.5, KernelPolicy::Reject, &tol()).unwrap();
        assert!(s.distance(&CMatrix::diag_real(&[2.0, 1.0])) < 1e-15);
    }

    #[test]
    fn psd_power_kernel_policies() {
        let d = CMatrix::diag_real(&[1.0, 0.0]);
        assert_eq!(
            psd_power(&d, -0.5, KernelPolicy::Reject, &tol()),
            Err(Error::SingularPower)
        );
        let p = psd_power(&d, -0.5, KernelPolicy::Pseudo, &tol()).unwrap();
        assert!(p.distance(&d) < 1e-15);
        let neg = CMatrix::diag_real(&[1.0, -0.1]);
        assert!(matches!(
            psd_power(&neg, 0.5, KernelPolicy::Pseudo, &tol()),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn psd_square_root_squares_back() {
        let mut rng = SeededRng::new(9);
        let g = rng.gaussian_matrix(5, 5);
        let a = &g * &g.adjoint();
        let s = psd_power(&a, 0.5, KernelPolicy::Reject, &tol()).unwrap();
        assert!((&s * &s).distance(&a) <= 1e-9);
    }

    #[test]
    fn transpose_in_standard_basis_is_plain_transpose() {
        let x =
            CMatrix::from_rows(&[vec![c(1., 2.), c(3., 0.)], vec![c(0., -1.), c(5., 5.)]]).unwrap();
        assert!(transpose_in_basis(&x, &CMatrix::identity(2)).distance(&x.transpose()) < 1e-15);
    }

    #[test]
    fn matrix_json_uses_re_im_pairs() {
        let x = CMatrix::from_rows(&[vec![c(1., 2.)], vec![c(0., -1.)]]).unwrap();
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, "[[[1.0,2.0]],[[0.0,-1.0]]]");
        let back: CMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, x);
        assert!(serde_json::from_str::<CMatrix>("[[[1,0]],[[1,0],[2,0]]]").is_err());
    }
}
