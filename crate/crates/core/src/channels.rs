//! CPTP maps and single-qubit gates shared by both reservoir pipelines.
//!
//! Every channel returns a state that has been re-symmetrized and scaled back
//! to unit trace; the size of that correction is logged at debug level.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    check_qubit, embed_single, expm_i, herm_eig, qubit_bit, qubit_mask, CMatrix, DensityMatrix,
    PauliAxis, C64, ONE, UNITARY_TOL, ZERO,
};

/// Unit rotation axis `n` of an encoding gate `exp(−i·u·(n·σ)/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AxisRepr", into = "AxisRepr")]
pub struct RotationAxis {
    nx: f64,
    ny: f64,
    nz: f64,
    alpha: f64,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct AxisRepr {
    nx: f64,
    ny: f64,
    nz: f64,
}

impl TryFrom<AxisRepr> for RotationAxis {
    type Error = Error;

    fn try_from(r: AxisRepr) -> Result<Self> {
        RotationAxis::new(r.nx, r.ny, r.nz)
    }
}

impl From<RotationAxis> for AxisRepr {
    fn from(a: RotationAxis) -> Self {
        AxisRepr { nx: a.nx, ny: a.ny, nz: a.nz }
    }
}

const AXIS_NORM_TOL: f64 = 1e-12;

impl RotationAxis {
    /// Axis from unit-vector components; rejects vectors off the unit sphere.
    pub fn new(nx: f64, ny: f64, nz: f64) -> Result<Self> {
        let norm_sq = nx * nx + ny * ny + nz * nz;
        if !((norm_sq - 1.0).abs() < AXIS_NORM_TOL) {
            return Err(Error::Config(format!("rotation axis has squared norm {norm_sq}")));
        }
        // atan2(0, 0) = 0 covers the degenerate poles.
        let alpha = ny.atan2(nx);
        let alpha = if alpha <= -PI { PI } else { alpha };
        let beta = nz.clamp(-1.0, 1.0).acos();
        Ok(Self { nx, ny, nz, alpha, beta })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn from_vector(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Config("rotation axis from a zero vector".into()));
        }
        Self::new(x / n, y / n, z / n)
    }

    pub fn x() -> Self {
        Self::new(1.0, 0.0, 0.0).unwrap()
    }

    pub fn y() -> Self {
        Self::new(0.0, 1.0, 0.0).unwrap()
    }

    pub fn z() -> Self {
        Self::new(0.0, 0.0, 1.0).unwrap()
    }

    /// Uniform on the sphere: three standard normals, normalized.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
            if let Ok(axis) = Self::from_vector(v[0], v[1], v[2]) {
                return axis;
            }
        }
    }

    pub fn components(&self) -> [f64; 3] {
        [self.nx, self.ny, self.nz]
    }

    /// Azimuth `atan2(n_y, n_x)` in (−π, π].
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Polar angle `arccos(n_z)` in [0, π].
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Encoding generator `G = (n_x σ_x + n_y σ_y + n_z σ_z) / 2`.
    pub fn generator(&self) -> CMatrix {
        PauliAxis::X
            .matrix()
            .scale(C64::new(self.nx / 2.0, 0.0))
            .add(&PauliAxis::Y.matrix().scale(C64::new(self.ny / 2.0, 0.0)))
            .add(&PauliAxis::Z.matrix().scale(C64::new(self.nz / 2.0, 0.0)))
    }
}

/// Pure-dephasing parameters for one multiplexing sub-step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingParams {
    pub gamma: f64,
    pub dt: f64,
}

impl DephasingParams {
    pub fn new(gamma: f64, dt: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !(dt > 0.0) {
            return Err(Error::Config(format!("dephasing needs gamma >= 0 and dt > 0 (got {gamma}, {dt})")));
        }
        Ok(Self { gamma, dt })
    }

    /// Coherence decay factor `e^{−2γ·dt}`.
    pub fn decay(&self) -> f64 {
        (-2.0 * self.gamma * self.dt).exp()
    }
}

/// `R_x(θ) = exp(−iθσ_x/2)`.
pub fn rx(theta: f64) -> CMatrix {
    let (s, c) = (theta / 2.0).sin_cos();
    CMatrix::from_vec(2, 2, vec![C64::new(c, 0.0), C64::new(0.0, -s), C64::new(0.0, -s), C64::new(c, 0.0)])
        .unwrap()
}

/// `R_y(θ) = exp(−iθσ_y/2)`.
pub fn ry(theta: f64) -> CMatrix {
    let (s, c) = (theta / 2.0).sin_cos();
    CMatrix::from_vec(2, 2, vec![C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)])
        .unwrap()
}

/// `R_z(θ) = exp(−iθσ_z/2)`.
pub fn rz(theta: f64) -> CMatrix {
    CMatrix::diag(&[C64::from_polar(1.0, -theta / 2.0), C64::from_polar(1.0, theta / 2.0)])
}

pub fn hadamard() -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_real_rows(&[&[s, s], &[s, -s]])
}

/// `exp(−i·u·G)` as the product `R_z(α) R_y(β) R_z(u) R_y(−β) R_z(−α)`.
pub fn rotation_gate(axis: &RotationAxis, u: f64) -> CMatrix {
    let (a, b) = (axis.alpha, axis.beta);
    rz(a).matmul(&ry(b)).matmul(&rz(u)).matmul(&ry(-b)).matmul(&rz(-a))
}

/// `exp(−i·u·G)` by exponentiating the generator directly.
pub fn rotation_gate_direct(axis: &RotationAxis, u: f64) -> CMatrix {
    expm_i(&axis.generator(), u).expect("generator is Hermitian")
}

fn finish(n_qubits: usize, mat: CMatrix) -> DensityMatrix {
    let mut rho = DensityMatrix::from_matrix_unchecked(n_qubits, mat);
    rho.renormalize();
    rho
}

/// `ρ ↦ U ρ U†`.
pub fn apply_unitary(rho: &DensityMatrix, u: &CMatrix) -> Result<DensityMatrix> {
    if u.rows() != rho.dim() || !u.is_square() {
        return Err(Error::Dimension(format!("{}x{} unitary on a {}-dim state", u.rows(), u.cols(), rho.dim())));
    }
    let dev = u.unitarity_deviation();
    if !(dev < UNITARY_TOL) {
        return Err(Error::NotUnitary(dev));
    }
    Ok(apply_unitary_unchecked(rho, u))
}

/// `U ρ U†` without re-checking unitarity, for hot loops with a pre-validated `U`.
pub(crate) fn apply_unitary_unchecked(rho: &DensityMatrix, u: &CMatrix) -> DensityMatrix {
    finish(rho.n_qubits(), u.matmul(rho.matrix()).matmul(&u.adjoint()))
}

/// `ρ ↦ Σ_k K_k ρ K_k†` for full-register Kraus operators.
pub fn apply_kraus(rho: &DensityMatrix, kraus: &[CMatrix]) -> Result<DensityMatrix> {
    let dim = rho.dim();
    if kraus.iter().any(|k| k.rows() != dim || k.cols() != dim) {
        return Err(Error::Dimension("Kraus operator shape does not match the state".into()));
    }
    let completeness = kraus
        .iter()
        .fold(CMatrix::zeros(dim, dim), |acc, k| acc.add(&k.adjoint().matmul(k)))
        .sub(&CMatrix::identity(dim))
        .norm_inf();
    if !(completeness < UNITARY_TOL) {
        return Err(Error::Invariant(format!("Kraus set is not trace preserving ({completeness:e})")));
    }
    let mut out = CMatrix::zeros(dim, dim);
    for k in kraus {
        out = out.add(&k.matmul(rho.matrix()).matmul(&k.adjoint()));
    }
    Ok(finish(rho.n_qubits(), out))
}

/// Amplitudes `(√(1−u), √u)` of the reset-encoding state.
pub fn encoding_state(u: f64) -> Result<[C64; 2]> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InputOutOfRange(u));
    }
    Ok([C64::new((1.0 - u).sqrt(), 0.0), C64::new(u.sqrt(), 0.0)])
}

/// `ρ ↦ |ψ_u⟩⟨ψ_u| ⊗ Tr_qubit[ρ]`, with the fresh state placed at `qubit`.
pub fn reset_encode(rho: &DensityMatrix, u: f64, qubit: usize) -> Result<DensityMatrix> {
    let psi = encoding_state(u)?;
    let n = rho.n_qubits();
    check_qubit(qubit, n)?;
    let local = CMatrix::outer(&psi, &psi);
    if n == 1 {
        return Ok(DensityMatrix::from_matrix_unchecked(1, local));
    }
    let reduced = crate::linalg::partial_trace(rho, qubit)?;
    let red = reduced.matrix();
    let mask = qubit_mask(qubit, n);
    let remove = |a: usize| {
        // Drop the bit at `qubit` to index the reduced register.
        ((a >> 1) & !(mask - 1)) | (a & (mask - 1))
    };
    let mat = CMatrix::from_fn(rho.dim(), rho.dim(), |a, b| {
        local[(qubit_bit(a, qubit, n), qubit_bit(b, qubit, n))] * red[(remove(a), remove(b))]
    });
    Ok(finish(n, mat))
}

/// Single-qubit pure dephasing: `ρ ↦ (1+e)/2 ρ + (1−e)/2 σ_z ρ σ_z`, `e = e^{−2γ·dt}`.
pub fn dephase_qubit(rho: &DensityMatrix, p: &DephasingParams, qubit: usize) -> Result<DensityMatrix> {
    let n = rho.n_qubits();
    check_qubit(qubit, n)?;
    let e = p.decay();
    let z = crate::linalg::pauli(PauliAxis::Z, qubit, n)?;
    let zrz = z.matmul(rho.matrix()).matmul(&z);
    let mat = rho
        .matrix()
        .scale(C64::new((1.0 + e) / 2.0, 0.0))
        .add(&zrz.scale(C64::new((1.0 - e) / 2.0, 0.0)));
    Ok(finish(n, mat))
}

/// Kraus form of [`dephase_qubit`] on a full register.
pub fn dephasing_kraus(p: &DephasingParams, qubit: usize, n_qubits: usize) -> Result<[CMatrix; 2]> {
    let e = p.decay();
    let k0 = CMatrix::identity(2).scale(C64::new(((1.0 + e) / 2.0).sqrt(), 0.0));
    let k1 = PauliAxis::Z.matrix().scale(C64::new(((1.0 - e) / 2.0).sqrt(), 0.0));
    Ok([embed_single(&k0, qubit, n_qubits)?, embed_single(&k1, qubit, n_qubits)?])
}

/// Kraus form of a reset of `qubit` to `|0⟩`.
pub fn reset_kraus(qubit: usize, n_qubits: usize) -> Result<[CMatrix; 2]> {
    let k0 = CMatrix::from_vec(2, 2, vec![ONE, ZERO, ZERO, ZERO])?;
    let k1 = CMatrix::from_vec(2, 2, vec![ZERO, ONE, ZERO, ZERO])?;
    Ok([embed_single(&k0, qubit, n_qubits)?, embed_single(&k1, qubit, n_qubits)?])
}

/// Magnitudes by which a state violates the density-matrix invariants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CptpReport {
    /// ∞-norm of `ρ − ρ†`.
    pub hermiticity: f64,
    /// `|Tr ρ − 1|`.
    pub trace: f64,
    /// `max(0, −λ_min)`.
    pub positivity: f64,
}

impl CptpReport {
    pub fn max_violation(&self) -> f64 {
        self.hermiticity.max(self.trace).max(self.positivity)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_violation() < tol
    }
}

pub fn validate_cptp(rho_out: &DensityMatrix) -> CptpReport {
    let m = rho_out.matrix();
    let hermiticity = m.hermiticity_deviation();
    let trace = (m.trace().re - 1.0).abs() + m.trace().im.abs();
    let positivity = herm_eig(&m.hermitian_part())
        .map(|e| (-e.eigenvalues[0]).max(0.0))
        .unwrap_or(f64::INFINITY);
    CptpReport { hermiticity, trace, positivity }
}
