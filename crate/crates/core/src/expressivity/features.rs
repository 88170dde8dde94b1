use std::f64::consts::TAU;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::{apply_circuit, zero_state, Circuit, ReservoirUnitary};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::reservoir::QrcModel;

/// Tolerance on probability-vector sums and negative entries.
pub const PROBABILITY_TOL: f64 = 1e-12;

/// `n` equally spaced inputs on `[0, 2π)`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| TAU * j as f64 / n as f64).collect()
}

/// Expected POVM features `x_k(u)`, stored one probability vector per grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    u_grid: Vec<f64>,
    columns: Vec<Vec<f64>>,
    k_count: usize,
}

impl FeatureTable {
    pub fn new(u_grid: Vec<f64>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if u_grid.is_empty() || u_grid.len() != columns.len() {
            return Err(Error::Dimension(format!("{} grid points, {} columns", u_grid.len(), columns.len())));
        }
        let k_count = columns[0].len();
        for (u, p) in u_grid.iter().zip(&columns) {
            if p.len() != k_count {
                return Err(Error::Dimension("ragged feature table".into()));
            }
            let sum: f64 = p.iter().sum();
            let min = p.iter().copied().fold(f64::INFINITY, f64::min);
            if !((sum - 1.0).abs() <= PROBABILITY_TOL) || min < -PROBABILITY_TOL {
                return Err(Error::Invariant(format!("features at u = {u} sum to {sum} (min entry {min})")));
            }
        }
        Ok(Self { u_grid, columns, k_count })
    }

    /// Evaluates `f` on every grid point in parallel.
    pub fn from_fn<F>(u_grid: &[f64], f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<Vec<f64>> + Sync,
    {
        let columns = u_grid.par_iter().map(|&u| f(u)).collect::<Result<Vec<_>>>()?;
        Self::new(u_grid.to_vec(), columns)
    }

    pub fn from_model(model: &QrcModel, u_grid: &[f64]) -> Result<Self> {
        Self::from_fn(u_grid, |u| model.probabilities(u))
    }

    pub fn u_grid(&self) -> &[f64] {
        &self.u_grid
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn k_count(&self) -> usize {
        self.k_count
    }

    pub fn n_points(&self) -> usize {
        self.u_grid.len()
    }

    /// Feature `x_k` over the grid.
    pub fn feature(&self, k: usize) -> Vec<f64> {
        self.columns.iter().map(|p| p[k]).collect()
    }

    /// Relabels outcomes: new outcome `i` is old outcome `perm[i]`.
    pub fn permute_outcomes(&self, perm: &[usize]) -> Result<Self> {
        let columns = self.columns.iter().map(|p| perm.iter().map(|&i| p[i]).collect()).collect();
        Self::new(self.u_grid.clone(), columns)
    }

    /// Reorders grid points: new point `i` is old point `order[i]`.
    pub fn reorder_grid(&self, order: &[usize]) -> Result<Self> {
        Self::new(order.iter().map(|&i| self.u_grid[i]).collect(), order.iter().map(|&i| self.columns[i].clone()).collect())
    }

    /// CSV with columns `u,x_0,…,x_{K−1}`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["u".to_string()];
        header.extend((0..self.k_count).map(|k| format!("x_{k}")));
        out.write_record(&header)?;
        for (u, p) in self.u_grid.iter().zip(&self.columns) {
            let mut row = vec![u.to_string()];
            row.extend(p.iter().map(|v| v.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Feature table of `U_res · C(u, θ) |0…0⟩` read out in the computational basis.
pub fn feature_table(
    circuit: &Circuit,
    reservoir: &ReservoirUnitary,
    params: &[f64],
    u_grid: &[f64],
) -> Result<FeatureTable> {
    EncodedStates::new(circuit, params, u_grid)?.table(reservoir)
}

/// Encoded states `S(u)|0…0⟩` on a grid, reusable across reservoirs.
#[derive(Clone, Debug)]
pub struct EncodedStates {
    n_qubits: usize,
    u_grid: Vec<f64>,
    states: Vec<Vec<C64>>,
}

impl EncodedStates {
    pub fn new(encoding: &Circuit, params: &[f64], u_grid: &[f64]) -> Result<Self> {
        Self::from_initial(&zero_state(encoding.n_qubits()), encoding, params, u_grid)
    }

    /// `S(u)|ψ₀⟩` for an arbitrary initial state.
    pub fn from_initial(initial: &[C64], encoding: &Circuit, params: &[f64], u_grid: &[f64]) -> Result<Self> {
        if initial.len() != 1 << encoding.n_qubits() {
            return Err(Error::Dimension(format!("initial state of length {} for {} qubits", initial.len(), encoding.n_qubits())));
        }
        let states = u_grid
            .par_iter()
            .map(|&u| {
                let mut psi = initial.to_vec();
                apply_circuit(&mut psi, encoding, params, u)?;
                Ok(psi)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n_qubits: encoding.n_qubits(), u_grid: u_grid.to_vec(), states })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn u_grid(&self) -> &[f64] {
        &self.u_grid
    }

    /// Sequential on purpose: callers parallelize over realizations.
    pub fn table(&self, reservoir: &ReservoirUnitary) -> Result<FeatureTable> {
        if reservoir.n_qubits() != self.n_qubits {
            return Err(Error::Dimension(format!(
                "{}-qubit reservoir after a {}-qubit encoding",
                reservoir.n_qubits(),
                self.n_qubits
            )));
        }
        let columns = self.states.iter().map(|psi| reservoir.apply(psi).iter().map(|z| z.norm_sqr()).collect()).collect();
        FeatureTable::new(self.u_grid.clone(), columns)
    }
}
