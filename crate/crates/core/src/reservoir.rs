//! The reservoir run loop and the single-cycle feature map.
//!
//! A run is: optional warmup (free evolution with dephasing), then for every
//! input `u_k` one injection followed by `V` sub-steps of
//! propagate `Δt/V` → dephase every qubit → read every `⟨σ_z⟩`.
//! [`run_physical`] realizes each step as the CPTP maps written out on the
//! density matrix; [`run_gate_model`] realizes the same steps with gate-model
//! primitives (reset + state-preparation rotation, a precompiled reservoir
//! unitary, Kraus dephasing, diagonal readout).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channels::{
    apply_kraus, apply_unitary, apply_unitary_unchecked, dephase_qubit, dephasing_kraus, reset_encode,
    reset_kraus, rotation_gate, validate_cptp, DephasingParams, RotationAxis,
};
use crate::circuits::{apply_circuit, compile, encoding_layer, zero_state, Circuit, Gate, ReservoirUnitary};
use crate::error::{Error, Result};
use crate::linalg::{embed_single, pauli, CMatrix, DensityMatrix, PauliAxis, C64};
use crate::rng;
use crate::tfim::{Tfim, TfimSpec};

/// How inputs enter the register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    /// Qubit 0 is replaced by `√(1−u)|0⟩ + √u|1⟩`.
    Reset,
    /// `encodes` rotations about random axes, placed round-robin.
    Rotations,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_qubits: usize,
    /// Input period `Δt`.
    pub dt: f64,
    /// Readouts per input period `V`.
    pub v_mux: usize,
    pub gamma: f64,
    pub input_mode: InputMode,
    /// Free evolution before the first input, in units of `1/h`.
    pub warmup_time: f64,
    /// Encoding rotations per input in rotations mode.
    pub encodes: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_qubits: 3,
            dt: 3.0,
            v_mux: 4,
            gamma: 0.01,
            input_mode: InputMode::Reset,
            warmup_time: 20.0,
            encodes: 3,
            seed: 1,
        }
    }
}

const STREAM_INIT: u64 = 1;
const STREAM_AXES: u64 = 2;

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.v_mux < 1 || !(self.dt > 0.0) || !(self.gamma >= 0.0) || !(self.warmup_time >= 0.0) {
            return Err(Error::Config(format!(
                "run config needs v_mux >= 1, dt > 0, gamma >= 0, warmup >= 0 (got {}, {}, {}, {})",
                self.v_mux, self.dt, self.gamma, self.warmup_time
            )));
        }
        if self.n_qubits < 1 || self.n_qubits > crate::linalg::MAX_QUBITS {
            return Err(Error::Config(format!("run config with {} qubits", self.n_qubits)));
        }
        if self.input_mode == InputMode::Rotations && self.encodes < 1 {
            return Err(Error::Config("rotations mode needs at least one encode".into()));
        }
        Ok(())
    }

    pub fn substep(&self) -> f64 {
        self.dt / self.v_mux as f64
    }

    pub fn warmup_steps(&self) -> usize {
        (self.warmup_time / self.substep()).floor() as usize
    }

    pub fn dephasing(&self) -> Result<DephasingParams> {
        DephasingParams::new(self.gamma, self.substep())
    }

    /// Haar-random initial state drawn from the run seed.
    pub fn initial_state(&self) -> DensityMatrix {
        DensityMatrix::haar_random(self.n_qubits, &mut rng::stream(self.seed, &[STREAM_INIT]))
    }

    /// Encoding axes for rotations mode, drawn from the run seed.
    pub fn encoding_axes(&self) -> Vec<RotationAxis> {
        let mut r = rng::stream(self.seed, &[STREAM_AXES]);
        (0..self.encodes).map(|_| RotationAxis::sample(&mut r)).collect()
    }
}

/// `⟨σ_z⟩` readouts of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    /// Time of each readout.
    pub times: Vec<f64>,
    /// Index of the input step a readout belongs to; `-1` during warmup.
    pub input_step: Vec<i64>,
    /// One row per readout, one column per qubit.
    pub sigma_z: Vec<Vec<f64>>,
    pub inputs: Vec<f64>,
}

impl Trace {
    pub fn n_readouts(&self) -> usize {
        self.times.len()
    }

    /// Readouts taken after inputs, flattened per input step: `N·V` features each.
    pub fn features(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = vec![Vec::new(); self.inputs.len()];
        for (row, &k) in self.sigma_z.iter().zip(&self.input_step) {
            if k >= 0 {
                out[k as usize].extend_from_slice(row);
            }
        }
        out
    }

    pub fn max_abs_deviation(&self, other: &Trace) -> Result<f64> {
        if self.sigma_z.len() != other.sigma_z.len() {
            return Err(Error::Dimension("traces of different length".into()));
        }
        Ok(self
            .sigma_z
            .iter()
            .zip(&other.sigma_z)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
    }

    /// Long-format CSV: `time,input_step,qubit,sigma_z`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["time", "input_step", "qubit", "sigma_z"])?;
        for ((t, k), row) in self.times.iter().zip(&self.input_step).zip(&self.sigma_z) {
            for (q, z) in row.iter().enumerate() {
                out.write_record([t.to_string(), k.to_string(), q.to_string(), z.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// One simulated register that the run loop can drive.
pub trait Backend {
    fn n_qubits(&self) -> usize;
    fn inject(&mut self, u: f64) -> Result<()>;
    /// Propagate for `Δt/V`, then dephase every qubit.
    fn substep(&mut self) -> Result<()>;
    fn sigma_z(&self) -> Vec<f64>;
    fn state(&self) -> &DensityMatrix;
}

/// Density-matrix channels written out directly.
pub struct PhysicalBackend {
    rho: DensityMatrix,
    step_unitary: CMatrix,
    dephasing: DephasingParams,
    mode: InputMode,
    axes: Vec<RotationAxis>,
    z_ops: Vec<CMatrix>,
}

impl PhysicalBackend {
    pub fn new(cfg: &RunConfig, tfim: &Tfim, initial: DensityMatrix) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_qubits;
        if tfim.spec.n_qubits != n || initial.n_qubits() != n {
            return Err(Error::Dimension("TFIM, initial state and run config disagree on N".into()));
        }
        Ok(Self {
            rho: initial,
            step_unitary: tfim.propagator(cfg.substep())?,
            dephasing: cfg.dephasing()?,
            mode: cfg.input_mode,
            axes: cfg.encoding_axes(),
            z_ops: (0..n).map(|q| pauli(PauliAxis::Z, q, n)).collect::<Result<_>>()?,
        })
    }
}

impl Backend for PhysicalBackend {
    fn n_qubits(&self) -> usize {
        self.rho.n_qubits()
    }

    fn inject(&mut self, u: f64) -> Result<()> {
        self.rho = match self.mode {
            InputMode::Reset => reset_encode(&self.rho, u, 0)?,
            InputMode::Rotations => {
                let n = self.n_qubits();
                let mut s = CMatrix::identity(1 << n);
                for (i, axis) in self.axes.iter().enumerate() {
                    s = embed_single(&rotation_gate(axis, u), i % n, n)?.matmul(&s);
                }
                apply_unitary(&self.rho, &s)?
            }
        };
        Ok(())
    }

    fn substep(&mut self) -> Result<()> {
        self.rho = apply_unitary_unchecked(&self.rho, &self.step_unitary);
        for q in 0..self.n_qubits() {
            self.rho = dephase_qubit(&self.rho, &self.dephasing, q)?;
        }
        Ok(())
    }

    fn sigma_z(&self) -> Vec<f64> {
        self.z_ops.iter().map(|z| self.rho.expectation(z)).collect()
    }

    fn state(&self) -> &DensityMatrix {
        &self.rho
    }
}

/// Gate-model realization: circuits, a precompiled step unitary, Kraus noise.
pub struct GateBackend {
    rho: DensityMatrix,
    reservoir: ReservoirUnitary,
    dephasing: Vec<[CMatrix; 2]>,
    reset: [CMatrix; 2],
    prep: Circuit,
    encoding: Option<Circuit>,
    mode: InputMode,
}

impl GateBackend {
    /// `reservoir` is applied once per sub-step `Δt/V`.
    pub fn new(cfg: &RunConfig, reservoir: ReservoirUnitary, initial: DensityMatrix) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_qubits;
        if reservoir.n_qubits() != n || initial.n_qubits() != n {
            return Err(Error::Dimension("reservoir, initial state and run config disagree on N".into()));
        }
        let p = cfg.dephasing()?;
        let dephasing = if cfg.gamma > 0.0 {
            (0..n).map(|q| dephasing_kraus(&p, q, n)).collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let encoding = match cfg.input_mode {
            InputMode::Rotations => Some(encoding_layer(n, cfg.encodes, &cfg.encoding_axes())?),
            InputMode::Reset => None,
        };
        Ok(Self {
            rho: initial,
            reservoir,
            dephasing,
            reset: reset_kraus(0, n)?,
            prep: Circuit::new(n, vec![Gate::ry(0, 0)])?,
            encoding,
            mode: cfg.input_mode,
        })
    }
}

impl Backend for GateBackend {
    fn n_qubits(&self) -> usize {
        self.rho.n_qubits()
    }

    fn inject(&mut self, u: f64) -> Result<()> {
        match self.mode {
            InputMode::Reset => {
                crate::channels::encoding_state(u)?;
                let reset = apply_kraus(&self.rho, &self.reset)?;
                // RY(θ)|0⟩ = cos(θ/2)|0⟩ + sin(θ/2)|1⟩ with sin(θ/2) = √u.
                let theta = 2.0 * u.sqrt().asin();
                self.rho = apply_unitary(&reset, &compile(&self.prep, &[theta], 0.0)?)?;
            }
            InputMode::Rotations => {
                let s = compile(self.encoding.as_ref().expect("rotations mode has a layer"), &[], u)?;
                self.rho = apply_unitary(&self.rho, &s)?;
            }
        }
        Ok(())
    }

    fn substep(&mut self) -> Result<()> {
        if !self.reservoir.is_identity() {
            self.rho = apply_unitary_unchecked(&self.rho, self.reservoir.matrix());
        }
        for kraus in &self.dephasing {
            self.rho = apply_kraus(&self.rho, kraus)?;
        }
        Ok(())
    }

    fn sigma_z(&self) -> Vec<f64> {
        (0..self.n_qubits()).map(|q| self.rho.sigma_z(q)).collect()
    }

    fn state(&self) -> &DensityMatrix {
        &self.rho
    }
}

const SIGMA_Z_TOL: f64 = 1e-9;
const CPTP_TOL: f64 = 1e-8;

/// Drives a backend through warmup and the input sequence.
pub fn run<B: Backend>(cfg: &RunConfig, backend: &mut B, inputs: &[f64]) -> Result<Trace> {
    cfg.validate()?;
    if let Some(&bad) = inputs.iter().find(|u| !(0.0..=1.0).contains(*u)) {
        return Err(Error::InputOutOfRange(bad));
    }
    let h = cfg.substep();
    let mut trace = Trace { times: Vec::new(), input_step: Vec::new(), sigma_z: Vec::new(), inputs: inputs.to_vec() };
    let mut ticks = 0u64;
    let read = |backend: &B, step: i64, ticks: u64, trace: &mut Trace| -> Result<()> {
        let z = backend.sigma_z();
        if let Some(bad) = z.iter().find(|v| v.abs() > 1.0 + SIGMA_Z_TOL) {
            return Err(Error::Invariant(format!("<sigma_z> = {bad} at t = {}", ticks as f64 * h)));
        }
        trace.times.push(ticks as f64 * h);
        trace.input_step.push(step);
        trace.sigma_z.push(z);
        Ok(())
    };
    for _ in 0..cfg.warmup_steps() {
        backend.substep()?;
        ticks += 1;
        read(backend, -1, ticks, &mut trace)?;
    }
    for (k, &u) in inputs.iter().enumerate() {
        backend.inject(u)?;
        for _ in 0..cfg.v_mux {
            backend.substep()?;
            ticks += 1;
            read(backend, k as i64, ticks, &mut trace)?;
        }
    }
    let report = validate_cptp(backend.state());
    if !report.within(CPTP_TOL) {
        return Err(Error::Invariant(format!("state drifted off the density-matrix manifold: {report:?}")));
    }
    Ok(trace)
}

/// TFIM reservoir simulated through explicit density-matrix channels,
/// starting from the run seed's Haar-random state.
pub fn run_physical(cfg: &RunConfig, spec: &TfimSpec, inputs: &[f64]) -> Result<Trace> {
    let tfim = Tfim::sample(*spec)?;
    let mut backend = PhysicalBackend::new(cfg, &tfim, cfg.initial_state())?;
    run(cfg, &mut backend, inputs)
}

/// Gate-model run with `reservoir_unitary` applied once per sub-step.
pub fn run_gate_model(cfg: &RunConfig, reservoir_unitary: &ReservoirUnitary, inputs: &[f64]) -> Result<Trace> {
    let mut backend = GateBackend::new(cfg, reservoir_unitary.clone(), cfg.initial_state())?;
    run(cfg, &mut backend, inputs)
}

/// Where the encoding rotations sit relative to the reservoir unitary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingPlacement {
    /// All encodes, then `U_res` once.
    #[default]
    Upfront,
    /// Rounds of up to `N` encodes, each followed by `U_res`.
    Interleaved,
}

/// One QRC cycle: `|0…0⟩ → S(u) → U_res → diagonal POVM`.
#[derive(Clone, Debug)]
pub struct QrcModel {
    pub encoding: Circuit,
    pub encoding_params: Vec<f64>,
    pub reservoir: ReservoirUnitary,
    pub placement: EncodingPlacement,
    /// `None` starts from `|0…0⟩`.
    pub initial: Option<Vec<C64>>,
}

impl QrcModel {
    pub fn new(encoding: Circuit, reservoir: ReservoirUnitary) -> Result<Self> {
        if encoding.n_qubits() != reservoir.n_qubits() {
            return Err(Error::Dimension("encoding and reservoir widths differ".into()));
        }
        if encoding.n_params() != 0 {
            return Err(Error::ParamLength { expected: 0, got: encoding.n_params() });
        }
        Ok(Self { encoding, encoding_params: Vec::new(), reservoir, placement: EncodingPlacement::Upfront, initial: None })
    }

    pub fn with_placement(mut self, placement: EncodingPlacement) -> Self {
        self.placement = placement;
        self
    }

    pub fn with_initial(mut self, state: Vec<C64>) -> Result<Self> {
        if state.len() != 1 << self.n_qubits() {
            return Err(Error::Dimension(format!("initial state of length {}", state.len())));
        }
        self.initial = Some(state);
        Ok(self)
    }

    pub fn n_qubits(&self) -> usize {
        self.encoding.n_qubits()
    }

    fn start(&self) -> Vec<C64> {
        self.initial.clone().unwrap_or_else(|| zero_state(self.n_qubits()))
    }

    /// `S(u)|ψ₀⟩`.
    pub fn encoded_state(&self, u: f64) -> Result<Vec<C64>> {
        let mut psi = self.start();
        apply_circuit(&mut psi, &self.encoding, &self.encoding_params, u)?;
        Ok(psi)
    }

    /// Final state before measurement.
    pub fn output_state(&self, u: f64) -> Result<Vec<C64>> {
        match self.placement {
            EncodingPlacement::Upfront => Ok(self.reservoir.apply(&self.encoded_state(u)?)),
            EncodingPlacement::Interleaved => {
                let n = self.n_qubits();
                let mut psi = self.start();
                for round in self.encoding.gates().chunks(n) {
                    let c = Circuit::new(n, round.to_vec())?;
                    apply_circuit(&mut psi, &c, &[], u)?;
                    psi = self.reservoir.apply(&psi);
                }
                Ok(psi)
            }
        }
    }

    pub fn probabilities(&self, u: f64) -> Result<Vec<f64>> {
        Ok(self.output_state(u)?.iter().map(|z| z.norm_sqr()).collect())
    }
}

/// Diagonal of `U_res S(u) |0⟩⟨0| S(u)† U_res†`.
pub fn features_single_cycle(
    encoding: &Circuit,
    reservoir: &ReservoirUnitary,
    params: &[f64],
    u: f64,
) -> Result<Vec<f64>> {
    let mut psi = zero_state(encoding.n_qubits());
    apply_circuit(&mut psi, encoding, params, u)?;
    Ok(reservoir.apply(&psi).iter().map(|z| z.norm_sqr()).collect())
}
