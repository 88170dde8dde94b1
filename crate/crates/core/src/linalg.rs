//! Dense complex matrices and qubit-register primitives.
//!
//! Register convention: for an `n`-qubit register, qubit `i` is the `i`-th
//! tensor factor from the left, so its value in basis index `k` is bit
//! `n - 1 - i` of `k`. Everything in the crate goes through [`qubit_bit`] /
//! [`qubit_mask`] to stay consistent with this.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 10;

/// Hermiticity tolerance on the ∞-norm of `h − h†`.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Unitarity tolerance on the ∞-norm of `U†U − I`.
pub const UNITARY_TOL: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn qubit_mask(qubit: usize, n_qubits: usize) -> usize {
    1 << (n_qubits - 1 - qubit)
}

#[inline]
pub fn qubit_bit(index: usize, qubit: usize, n_qubits: usize) -> usize {
    (index >> (n_qubits - 1 - qubit)) & 1
}

pub(crate) fn check_qubit(qubit: usize, n_qubits: usize) -> Result<()> {
    if qubit >= n_qubits {
        return Err(Error::QubitOutOfRange { index: qubit, n_qubits });
    }
    Ok(())
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
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

    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols != data.len() {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Dimension("non-finite matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        Self::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diag(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Outer product `|a⟩⟨b|`.
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
    }

    /// Random Hermitian matrix with standard-normal real and imaginary parts.
    pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let a = Self::from_fn(n, n, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        a.add(&a.adjoint()).scale(C64::new(0.5, 0.0))
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

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch in add");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch in sub");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Matrix product `self · other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "shape mismatch in matmul");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "shape mismatch in matvec");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Induced ∞-norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ∞-norm of `self − self†`.
    pub fn hermiticity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.sub(&self.adjoint()).norm_inf()
    }

    /// ∞-norm of `self†·self − I`.
    pub fn unitarity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.adjoint().matmul(self).sub(&Self::identity(self.rows)).norm_inf()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() < tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation() < tol
    }

    /// `(self + self†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        self.add(&self.adjoint()).scale(C64::new(0.5, 0.0))
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
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

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (br, bc) = (b.rows, b.cols);
    CMatrix::from_fn(a.rows * br, a.cols * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Pauli axis label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    /// The 2×2 Pauli matrix.
    pub fn matrix(self) -> CMatrix {
        match self {
            PauliAxis::X => CMatrix::from_vec(2, 2, vec![ZERO, ONE, ONE, ZERO]),
            PauliAxis::Y => CMatrix::from_vec(2, 2, vec![ZERO, -I, I, ZERO]),
            PauliAxis::Z => CMatrix::from_vec(2, 2, vec![ONE, ZERO, ZERO, -ONE]),
        }
        .expect("static 2x2")
    }
}

/// Embeds a single-qubit operator at position `qubit` of an `n`-qubit register.
pub fn embed_single(op: &CMatrix, qubit: usize, n_qubits: usize) -> Result<CMatrix> {
    check_qubit(qubit, n_qubits)?;
    if op.rows != 2 || op.cols != 2 {
        return Err(Error::Dimension("single-qubit operator must be 2x2".into()));
    }
    let id = CMatrix::identity(2);
    let mut out = CMatrix::identity(1);
    for q in 0..n_qubits {
        out = kron(&out, if q == qubit { op } else { &id });
    }
    Ok(out)
}

/// `I ⊗ … ⊗ σ_s ⊗ … ⊗ I` with `σ_s` at `qubit`.
pub fn pauli(axis: PauliAxis, qubit: usize, n_qubits: usize) -> Result<CMatrix> {
    embed_single(&axis.matrix(), qubit, n_qubits)
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: CMatrix,
}

impl HermitianEig {
    /// `V · diag(f(λ)) · V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let v = &self.eigenvectors;
        let n = v.rows();
        let fl: Vec<C64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for (k, f) in fl.iter().enumerate() {
                    acc += v[(i, k)] * f * v[(j, k)].conj();
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.reconstruct_with(|l| C64::new(l, 0.0))
    }
}

pub fn herm_eig(h: &CMatrix) -> Result<HermitianEig> {
    if !h.is_square() {
        return Err(Error::Dimension(format!("eigendecomposition of a {}x{} matrix", h.rows, h.cols)));
    }
    let dev = h.hermiticity_deviation();
    if !(dev < HERMITIAN_TOL) {
        return Err(Error::NotHermitian(dev));
    }
    let eig = nalgebra::SymmetricEigen::new(h.hermitian_part().to_nalgebra());
    let mut order: Vec<usize> = (0..h.rows).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = CMatrix::from_nalgebra(&eig.eigenvectors);
    let eigenvectors = CMatrix::from_fn(h.rows, h.rows, |i, j| vecs[(i, order[j])]);
    Ok(HermitianEig { eigenvalues, eigenvectors })
}

/// `exp(−i·h·t)` for Hermitian `h`, through its eigendecomposition.
pub fn expm_i(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let eig = herm_eig(h)?;
    Ok(eig.reconstruct_with(|l| C64::from_polar(1.0, -l * t)))
}

/// Largest eigenvalue magnitude of a Hermitian (in particular real symmetric) matrix.
pub fn spectral_radius(m: &CMatrix) -> Result<f64> {
    let eig = herm_eig(m)?;
    Ok(eig.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max))
}

/// Partial trace over `qubit` of an arbitrary `2^n × 2^n` matrix.
pub fn partial_trace_matrix(m: &CMatrix, n_qubits: usize, qubit: usize) -> Result<CMatrix> {
    check_qubit(qubit, n_qubits)?;
    let dim = 1usize << n_qubits;
    if m.rows != dim || m.cols != dim {
        return Err(Error::Dimension(format!("expected {dim}x{dim}, got {}x{}", m.rows, m.cols)));
    }
    let sub = dim / 2;
    let low = qubit_mask(qubit, n_qubits);
    let insert = |a: usize, s: usize| {
        // Re-insert bit `s` at the position of `qubit`.
        let hi = (a & !(low - 1)) << 1;
        let lo = a & (low - 1);
        hi | (s * low) | lo
    };
    Ok(CMatrix::from_fn(sub, sub, |a, b| m[(insert(a, 0), insert(b, 0))] + m[(insert(a, 1), insert(b, 1))]))
}

/// Density matrix of an `n`-qubit register.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    n_qubits: usize,
    mat: CMatrix,
}

/// Tolerances checked by [`DensityMatrix::from_matrix`].
pub const DENSITY_HERMITIAN_TOL: f64 = 1e-12;
pub const DENSITY_TRACE_TOL: f64 = 1e-12;
pub const DENSITY_POSITIVITY_TOL: f64 = -1e-10;

impl DensityMatrix {
    /// Validating constructor.
    pub fn from_matrix(n_qubits: usize, mat: CMatrix) -> Result<Self> {
        if n_qubits > MAX_QUBITS {
            return Err(Error::Dimension(format!("{n_qubits} qubits exceeds the cap of {MAX_QUBITS}")));
        }
        let dim = 1usize << n_qubits;
        if mat.rows != dim || mat.cols != dim {
            return Err(Error::Dimension(format!("expected {dim}x{dim}, got {}x{}", mat.rows, mat.cols)));
        }
        let herm = mat.hermiticity_deviation();
        if !(herm < DENSITY_HERMITIAN_TOL) {
            return Err(Error::Invariant(format!("density matrix not Hermitian ({herm:e})")));
        }
        let tr = (mat.trace().re - 1.0).abs();
        if !(tr < DENSITY_TRACE_TOL) {
            return Err(Error::Invariant(format!("density matrix trace off by {tr:e}")));
        }
        let min_eig = herm_eig(&mat)?.eigenvalues[0];
        if min_eig < DENSITY_POSITIVITY_TOL {
            return Err(Error::Invariant(format!("density matrix eigenvalue {min_eig:e} < 0")));
        }
        Ok(Self { n_qubits, mat })
    }

    /// Wraps a matrix that the caller guarantees is a valid state.
    pub(crate) fn from_matrix_unchecked(n_qubits: usize, mat: CMatrix) -> Self {
        debug_assert_eq!(mat.rows, 1 << n_qubits);
        Self { n_qubits, mat }
    }

    /// `|ψ⟩⟨ψ|` for a state vector (normalized here).
    pub fn pure(n_qubits: usize, psi: &[C64]) -> Result<Self> {
        if psi.len() != 1 << n_qubits {
            return Err(Error::Dimension(format!("state vector of length {} for {n_qubits} qubits", psi.len())));
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::Dimension("zero state vector".into()));
        }
        let v: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Ok(Self { n_qubits, mat: CMatrix::outer(&v, &v) })
    }

    /// `|0…0⟩⟨0…0|`.
    pub fn zero_state(n_qubits: usize) -> Self {
        let mut mat = CMatrix::zeros(1 << n_qubits, 1 << n_qubits);
        mat[(0, 0)] = ONE;
        Self { n_qubits, mat }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        Self { n_qubits, mat: CMatrix::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0)) }
    }

    /// Haar-random pure state from a normalized complex-Gaussian vector.
    pub fn haar_random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Self {
        let psi: Vec<C64> = (0..1usize << n_qubits)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::pure(n_qubits, &psi).expect("gaussian vector is nonzero")
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn purity(&self) -> f64 {
        // Tr[ρ²] = Σ |ρ_ij|² for Hermitian ρ.
        self.mat.data().iter().map(|z| z.norm_sqr()).sum()
    }

    /// `Tr[O ρ]` (real part).
    pub fn expectation(&self, op: &CMatrix) -> f64 {
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += op[(i, k)] * self.mat[(k, i)];
            }
        }
        acc.re
    }

    /// Computational-basis probabilities (the diagonal).
    pub fn probabilities(&self) -> Vec<f64> {
        self.mat.diagonal().iter().map(|z| z.re).collect()
    }

    /// `⟨σ_z⟩` on `qubit`, read from the diagonal.
    pub fn sigma_z(&self, qubit: usize) -> f64 {
        self.probabilities()
            .iter()
            .enumerate()
            .map(|(k, p)| if qubit_bit(k, qubit, self.n_qubits) == 0 { *p } else { -*p })
            .sum()
    }

    /// Forces exact Hermiticity and unit trace; returns the size of the correction.
    pub(crate) fn renormalize(&mut self) -> f64 {
        let herm = self.mat.hermitian_part();
        let drift = herm.max_abs_diff(&self.mat);
        let tr = herm.trace().re;
        self.mat = herm.scale(C64::new(1.0 / tr, 0.0));
        let total = drift.max((tr - 1.0).abs());
        if total > 1e-13 {
            log::debug!("state renormalized: hermiticity drift {drift:e}, trace drift {:e}", tr - 1.0);
        }
        total
    }
}

/// Reduced state after tracing out `qubit`.
pub fn partial_trace(rho: &DensityMatrix, qubit: usize) -> Result<DensityMatrix> {
    if rho.n_qubits < 2 {
        return Err(Error::Dimension("cannot trace out the only qubit".into()));
    }
    let m = partial_trace_matrix(&rho.mat, rho.n_qubits, qubit)?;
    Ok(DensityMatrix::from_matrix_unchecked(rho.n_qubits - 1, m))
}

/// Reduced single-qubit state of `qubit` (trace over every other qubit).
pub fn reduced_single(rho: &DensityMatrix, qubit: usize) -> Result<DensityMatrix> {
    check_qubit(qubit, rho.n_qubits)?;
    let n = rho.n_qubits;
    let mut m = CMatrix::zeros(2, 2);
    for a in 0..rho.dim() {
        for b in 0..rho.dim() {
            let rest = qubit_mask(qubit, n);
            if a & !rest == b & !rest {
                m[(qubit_bit(a, qubit, n), qubit_bit(b, qubit, n))] += rho.mat[(a, b)];
            }
        }
    }
    Ok(DensityMatrix::from_matrix_unchecked(1, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_matrix(n: usize, rng: &mut impl Rng) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_density(n_qubits: usize, rng: &mut impl Rng) -> DensityMatrix {
        let a = random_matrix(1 << n_qubits, rng);
        let m = a.matmul(&a.adjoint());
        let tr = m.trace();
        DensityMatrix::from_matrix(n_qubits, m.scale(tr.inv())).unwrap()
    }

    #[test]
    fn pauli_single_qubit() {
        let z = pauli(PauliAxis::Z, 0, 1).unwrap();
        assert_eq!(z, CMatrix::diag(&[ONE, -ONE]));
    }

    #[test]
    fn pauli_kron_placement() {
        let x1 = pauli(PauliAxis::X, 1, 2).unwrap();
        assert_eq!(x1, kron(&CMatrix::identity(2), &PauliAxis::X.matrix()));
    }

    #[test]
    fn pauli_squares_to_identity() {
        let y = pauli(PauliAxis::Y, 0, 3).unwrap();
        assert!(y.matmul(&y).max_abs_diff(&CMatrix::identity(8)) < 1e-15);
    }

    #[test]
    fn pauli_rejects_bad_index() {
        assert!(matches!(pauli(PauliAxis::X, 3, 3), Err(Error::QubitOutOfRange { .. })));
    }

    #[test]
    fn pauli_algebra() {
        for q in 0..3 {
            let x = pauli(PauliAxis::X, q, 3).unwrap();
            let y = pauli(PauliAxis::Y, q, 3).unwrap();
            let z = pauli(PauliAxis::Z, q, 3).unwrap();
            assert!(x.matmul(&y).max_abs_diff(&z.scale(I)) < 1e-14);
            for p in 0..3 {
                if p != q {
                    let xp = pauli(PauliAxis::X, p, 3).unwrap();
                    assert!(xp.matmul(&y).max_abs_diff(&y.matmul(&xp)) < 1e-14);
                }
            }
        }
    }

    #[test]
    fn kron_examples() {
        assert_eq!(kron(&CMatrix::identity(2), &CMatrix::identity(2)), CMatrix::identity(4));
        let z = PauliAxis::Z.matrix();
        assert_eq!(kron(&z, &z), CMatrix::diag(&[ONE, -ONE, -ONE, ONE]));
        let mut r = rng::seeded(3);
        for _ in 0..10 {
            let a = random_matrix(2, &mut r);
            let b = random_matrix(2, &mut r);
            let lhs = kron(&a, &b).trace();
            let rhs = a.trace() * b.trace();
            assert!((lhs - rhs).norm() < 1e-14);
        }
    }

    #[test]
    fn herm_eig_paulis() {
        let e = herm_eig(&PauliAxis::Z.matrix()).unwrap();
        assert_eq!(e.eigenvalues, vec![-1.0, 1.0]);
        let e = herm_eig(&PauliAxis::X.matrix()).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-15 && (e.eigenvalues[1] - 1.0).abs() < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // Eigenvectors up to phase: |⟨v|expected⟩| = 1.
        let minus = [c(s), c(-s)];
        let plus = [c(s), c(s)];
        for (k, expected) in [minus, plus].iter().enumerate() {
            let v = e.eigenvectors.column(k);
            let overlap: C64 = v.iter().zip(expected).map(|(a, b)| a.conj() * b).sum();
            assert!((overlap.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn herm_eig_reconstructs_random() {
        let mut r = rng::seeded(11);
        let h = CMatrix::random_hermitian(8, &mut r);
        let e = herm_eig(&h).unwrap();
        assert!(e.reconstruct().max_abs_diff(&h) < 1e-10 * h.norm_inf());
        let v = &e.eigenvectors;
        assert!(v.adjoint().matmul(v).max_abs_diff(&CMatrix::identity(8)) < 1e-10);
        assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn herm_eig_rejects_non_hermitian() {
        let m = CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(herm_eig(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn expm_i_examples() {
        let u = expm_i(&PauliAxis::Z.matrix(), std::f64::consts::PI).unwrap();
        assert!(u.max_abs_diff(&CMatrix::identity(2).scale(c(-1.0))) < 1e-15);
        let mut r = rng::seeded(5);
        let h = CMatrix::random_hermitian(4, &mut r);
        assert!(expm_i(&h, 0.0).unwrap().max_abs_diff(&CMatrix::identity(4)) < 1e-14);
    }

    #[test]
    fn expm_i_matches_taylor_series() {
        let mut r = rng::seeded(21);
        let h = CMatrix::random_hermitian(4, &mut r);
        let t = 0.7;
        // Σ_{k<30} (−iht)^k / k!
        let a = h.scale(C64::new(0.0, -t));
        let mut term = CMatrix::identity(4);
        let mut sum = CMatrix::identity(4);
        for k in 1..30 {
            term = term.matmul(&a).scale(c(1.0 / k as f64));
            sum = sum.add(&term);
        }
        let u = expm_i(&h, t).unwrap();
        assert!(u.max_abs_diff(&sum) < 1e-10);
        assert!(u.unitarity_deviation() < 1e-12);
    }

    #[test]
    fn partial_trace_examples() {
        let mut r = rng::seeded(8);
        let rho_b = random_density(2, &mut r);
        let zero = DensityMatrix::zero_state(1);
        let prod = DensityMatrix::from_matrix(3, kron(zero.matrix(), rho_b.matrix())).unwrap();
        let red = partial_trace(&prod, 0).unwrap();
        assert!(red.matrix().max_abs_diff(rho_b.matrix()) < 1e-15);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DensityMatrix::pure(2, &[c(s), ZERO, ZERO, c(s)]).unwrap();
        let red = partial_trace(&bell, 0).unwrap();
        assert!(red.matrix().max_abs_diff(&CMatrix::identity(2).scale(c(0.5))) < 1e-15);

        let rho = random_density(3, &mut r);
        for q in 0..3 {
            assert!((partial_trace(&rho, q).unwrap().trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_trace_middle_qubit_against_kron() {
        let mut r = rng::seeded(9);
        let a = random_density(1, &mut r);
        let b = random_density(1, &mut r);
        let cst = random_density(1, &mut r);
        let full = kron(&kron(a.matrix(), b.matrix()), cst.matrix());
        let red = partial_trace_matrix(&full, 3, 1).unwrap();
        assert!(red.max_abs_diff(&kron(a.matrix(), cst.matrix())) < 1e-15);
    }

    #[test]
    fn spectral_radius_examples() {
        assert_eq!(spectral_radius(&PauliAxis::Z.matrix()).unwrap(), 1.0);
        assert!((spectral_radius(&CMatrix::identity(4).scale(c(2.0))).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_radius_matches_power_iteration() {
        let mut r = rng::seeded(12);
        let mut s = [[0.0f64; 4]; 4];
        for i in 0..4 {
            for j in i..4 {
                let v = r.random_range(-1.0..1.0);
                s[i][j] = v;
                s[j][i] = v;
            }
        }
        // Power iteration on S² converges to the dominant |λ|² even when ±λ tie.
        let mut v = [1.0, 0.3, -0.2, 0.5];
        let mut lambda_sq = 0.0;
        for _ in 0..5000 {
            let sv: Vec<f64> = (0..4).map(|i| (0..4).map(|j| s[i][j] * v[j]).sum()).collect();
            let ssv: Vec<f64> = (0..4).map(|i| (0..4).map(|j| s[i][j] * sv[j]).sum()).collect();
            let norm = ssv.iter().map(|x| x * x).sum::<f64>().sqrt();
            lambda_sq = ssv.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>()
                / v.iter().map(|x| x * x).sum::<f64>();
            for i in 0..4 {
                v[i] = ssv[i] / norm;
            }
        }
        let rows: Vec<&[f64]> = s.iter().map(|r| r.as_slice()).collect();
        let radius = spectral_radius(&CMatrix::from_real_rows(&rows)).unwrap();
        assert!((radius - lambda_sq.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn density_validation_reports_bad_trace() {
        let m = CMatrix::identity(2).scale(c(0.6));
        assert!(matches!(DensityMatrix::from_matrix(1, m), Err(Error::Invariant(_))));
    }

    #[test]
    fn sigma_z_reads_diagonal() {
        let rho = DensityMatrix::zero_state(3);
        for q in 0..3 {
            assert_eq!(rho.sigma_z(q), 1.0);
            assert!((rho.expectation(&pauli(PauliAxis::Z, q, 3).unwrap()) - 1.0).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn expm_group_inverse(seed in any::<u64>(), t in -5.0f64..5.0) {
            let mut r = rng::seeded(seed);
            let h = CMatrix::random_hermitian(4, &mut r);
            let prod = expm_i(&h, t).unwrap().matmul(&expm_i(&h, -t).unwrap());
            prop_assert!(prod.max_abs_diff(&CMatrix::identity(4)) < 1e-12);
        }

        #[test]
        fn partial_trace_is_linear_and_trace_preserving(seed in any::<u64>(), q in 0usize..3, alpha in -2.0f64..2.0) {
            let mut r = rng::seeded(seed);
            let a = random_matrix(8, &mut r);
            let b = random_matrix(8, &mut r);
            let lhs = partial_trace_matrix(&a.add(&b.scale(c(alpha))), 3, q).unwrap();
            let rhs = partial_trace_matrix(&a, 3, q).unwrap()
                .add(&partial_trace_matrix(&b, 3, q).unwrap().scale(c(alpha)));
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
            prop_assert!((lhs.trace() - a.add(&b.scale(c(alpha))).trace()).norm() < 1e-12);
        }
    }
}
