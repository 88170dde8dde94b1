//! Transverse-field Ising reservoir:
//! `H = h Σ_i σ_z^(i) + Σ_{i<j} J_ij σ_x^(i) σ_x^(j)` with random all-to-all couplings.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm_i, pauli, spectral_radius, CMatrix, PauliAxis, C64};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfimSpec {
    pub n_qubits: usize,
    /// Field strength `h`; sets the energy unit.
    pub h_field: f64,
    /// Target spectral radius of the coupling matrix.
    pub j0: f64,
    pub seed: u64,
}

impl TfimSpec {
    pub fn new(n_qubits: usize, h_field: f64, j0: f64, seed: u64) -> Result<Self> {
        let spec = Self { n_qubits, h_field, j0, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits < 2 || self.n_qubits > crate::linalg::MAX_QUBITS {
            return Err(Error::Config(format!("TFIM needs 2..={} qubits, got {}", crate::linalg::MAX_QUBITS, self.n_qubits)));
        }
        if !(self.j0 > 0.0) || !self.h_field.is_finite() {
            return Err(Error::Config(format!("TFIM needs j0 > 0 and finite h (got j0={}, h={})", self.j0, self.h_field)));
        }
        Ok(())
    }
}

/// Symmetric, zero-diagonal coupling matrix, scaled to spectral radius `j0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    pub n: usize,
    /// Row-major `n × n` entries.
    pub j: Vec<f64>,
    pub seed: u64,
    pub j0: f64,
}

impl CouplingMatrix {
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.j[i * self.n + k]
    }

    pub fn as_cmatrix(&self) -> CMatrix {
        CMatrix::from_fn(self.n, self.n, |i, k| C64::new(self.get(i, k), 0.0))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if m.j.len() != m.n * m.n {
            return Err(Error::Dimension(format!("{} coupling entries for n = {}", m.j.len(), m.n)));
        }
        Ok(m)
    }
}

/// Draws `J_ij ~ U[−1, 1]` for `i < j` from the spec's seed, symmetrizes, and
/// rescales to spectral radius `j0`.
pub fn sample_couplings(spec: &TfimSpec) -> Result<CouplingMatrix> {
    spec.validate()?;
    let n = spec.n_qubits;
    let mut r = rng::seeded(spec.seed);
    loop {
        let mut j = vec![0.0; n * n];
        for a in 0..n {
            for b in a + 1..n {
                let v: f64 = r.random_range(-1.0..=1.0);
                j[a * n + b] = v;
                j[b * n + a] = v;
            }
        }
        let m = CouplingMatrix { n, j, seed: spec.seed, j0: spec.j0 };
        let radius = spectral_radius(&m.as_cmatrix())?;
        if radius > 0.0 {
            let scale = spec.j0 / radius;
            let j = m.j.iter().map(|v| v * scale).collect();
            return Ok(CouplingMatrix { j, ..m });
        }
        log::warn!("all-zero coupling draw for seed {}; resampling", spec.seed);
    }
}

pub fn hamiltonian(spec: &TfimSpec, j: &CouplingMatrix) -> Result<CMatrix> {
    let n = spec.n_qubits;
    if j.n != n {
        return Err(Error::Dimension(format!("{}-site couplings for a {n}-qubit TFIM", j.n)));
    }
    let dim = 1usize << n;
    let mut h = CMatrix::zeros(dim, dim);
    for i in 0..n {
        h = h.add(&pauli(PauliAxis::Z, i, n)?.scale(C64::new(spec.h_field, 0.0)));
    }
    for a in 0..n {
        let xa = pauli(PauliAxis::X, a, n)?;
        for b in a + 1..n {
            let jab = j.get(a, b);
            if jab != 0.0 {
                let xx = xa.matmul(&pauli(PauliAxis::X, b, n)?);
                h = h.add(&xx.scale(C64::new(jab, 0.0)));
            }
        }
    }
    Ok(h)
}

/// `U = e^{−iH·dt}`.
pub fn propagator(h: &CMatrix, dt: f64) -> Result<CMatrix> {
    expm_i(h, dt)
}

/// A sampled TFIM instance: spec, couplings, and Hamiltonian.
#[derive(Clone, Debug)]
pub struct Tfim {
    pub spec: TfimSpec,
    pub couplings: CouplingMatrix,
    pub hamiltonian: CMatrix,
}

impl Tfim {
    pub fn sample(spec: TfimSpec) -> Result<Self> {
        let couplings = sample_couplings(&spec)?;
        let hamiltonian = hamiltonian(&spec, &couplings)?;
        Ok(Self { spec, couplings, hamiltonian })
    }

    pub fn propagator(&self, dt: f64) -> Result<CMatrix> {
        propagator(&self.hamiltonian, dt)
    }
}
