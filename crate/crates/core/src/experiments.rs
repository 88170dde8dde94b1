//! Figure-reproduction experiments and their on-disk outputs.
//!
//! Every experiment has a `compute_*` function returning plain data and a
//! writer that turns it into CSV files plus a `<name>.meta.json` sidecar
//! holding the resolved configuration, the derived seeds and the crate
//! version. Outputs contain no timestamps or host information, so a rerun
//! with the same configuration is byte-identical at any thread count.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::RotationAxis;
use crate::circuits::{
    build_ansatz, encoding_layer, random_product_state, zero_state, AnsatzId, Circuit, ReservoirUnitary,
};
use crate::linalg::C64;
use crate::error::{Error, Result};
use crate::expressivity::{
    analyze, rec_finite, rec_infinite, rec_upper_bound, trig_fit_residual, uniform_grid, EncodedStates,
    EigentaskSet, FeatureTable, RecReport, Shots,
};
use crate::optimize::{maximize, OptConfig, OptResult, RecObjective};
use crate::reservoir::{run, EncodingPlacement, GateBackend, InputMode, PhysicalBackend, QrcModel, RunConfig, Trace};
use crate::rng;
use crate::tfim::{Tfim, TfimSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest tolerated `⟨σ_z⟩` disagreement between the two dynamics pipelines.
pub const PIPELINE_TOL: f64 = 1e-10;

const TAG_AXES: u64 = 1;
const TAG_PARAMS: u64 = 2;
const TAG_TFIM: u64 = 3;
const TAG_INPUTS: u64 = 4;
const TAG_OPT: u64 = 5;
const TAG_RUN: u64 = 6;
const TAG_INIT: u64 = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Dynamics,
    RecVsEncodes,
    Eigentasks,
    CircuitSweep,
    OptimizeSweep,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Dynamics => "dynamics",
            Experiment::RecVsEncodes => "rec_vs_encodes",
            Experiment::Eigentasks => "eigentasks",
            Experiment::CircuitSweep => "circuit_sweep",
            Experiment::OptimizeSweep => "optimize_sweep",
        }
    }
}

/// TFIM used as an expressivity reservoir, `U_res = e^{−iHΔt}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TfimParams {
    pub h_field: f64,
    pub j0: f64,
    pub dt: f64,
}

impl Default for TfimParams {
    fn default() -> Self {
        Self { h_field: 1.0, j0: 1.0, dt: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsParams {
    pub n_qubits: usize,
    pub steps: usize,
    pub dt: f64,
    pub v_mux: usize,
    pub gamma: f64,
    pub warmup_time: f64,
    pub input_mode: InputMode,
    pub encodes: usize,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            n_qubits: 3,
            steps: 50,
            dt: 3.0,
            v_mux: 4,
            gamma: 0.01,
            warmup_time: 20.0,
            input_mode: InputMode::Reset,
            encodes: 3,
        }
    }
}

/// State the encoding acts on in the expressivity experiments.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// `|0…0⟩`.
    Zero,
    /// Haar-random single-qubit states, drawn once per axis realization.
    #[default]
    RandomProduct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpressivityParams {
    pub r_min: usize,
    pub r_max: usize,
    pub axis_realizations: usize,
    pub grid_points: usize,
    pub placement: EncodingPlacement,
    pub initial_state: InitialState,
    /// Encodes for the eigentask experiment.
    pub eigentask_encodes: usize,
}

impl Default for ExpressivityParams {
    fn default() -> Self {
        Self {
            r_min: 1,
            r_max: 8,
            axis_realizations: 30,
            grid_points: 200,
            placement: EncodingPlacement::Upfront,
            initial_state: InitialState::RandomProduct,
            eigentask_encodes: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub encodes: usize,
    pub circuits: Vec<u32>,
    pub include_tfim: bool,
    pub param_samples: usize,
    pub tfim_samples: usize,
    pub axis_realizations: usize,
    pub shots: Vec<u64>,
    /// Axis realizations whose optimization history is written out.
    pub history_realizations: usize,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            encodes: 8,
            circuits: (1..=19).collect(),
            include_tfim: true,
            param_samples: 20,
            tfim_samples: 20,
            axis_realizations: 30,
            shots: vec![10_000],
            history_realizations: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Register size for the expressivity experiments.
    pub n_qubits: usize,
    pub seed: u64,
    /// Worker threads; 0 uses all cores. Not written to metadata.
    #[serde(skip_serializing)]
    pub threads: usize,
    /// Not written to metadata.
    #[serde(skip_serializing)]
    pub out: PathBuf,
    pub tfim: TfimParams,
    pub dynamics: DynamicsParams,
    pub expressivity: ExpressivityParams,
    pub sweep: SweepParams,
    pub optimizer: OptConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Dynamics,
            n_qubits: 4,
            seed: 2024,
            threads: 0,
            out: PathBuf::from("out"),
            tfim: TfimParams::default(),
            dynamics: DynamicsParams::default(),
            expressivity: ExpressivityParams::default(),
            sweep: SweepParams::default(),
            optimizer: OptConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Applies cross-field defaults and checks every section.
    pub fn resolve(mut self) -> Result<Self> {
        if let Some(&s) = self.sweep.shots.first() {
            self.optimizer.shots = Shots::Finite(s);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_qubits < 2 || self.n_qubits > crate::linalg::MAX_QUBITS {
            return bad(format!("n_qubits must be in 2..={}", crate::linalg::MAX_QUBITS));
        }
        let e = &self.expressivity;
        if e.r_min > e.r_max || e.axis_realizations == 0 || e.eigentask_encodes == 0 {
            return bad("expressivity needs r_min <= r_max and positive counts".into());
        }
        if e.grid_points < 2 * e.r_max.max(e.eigentask_encodes) + 1 {
            return bad(format!("{} grid points cannot resolve degree {}", e.grid_points, e.r_max));
        }
        let s = &self.sweep;
        if s.axis_realizations == 0 || s.param_samples == 0 || (s.include_tfim && s.tfim_samples == 0) {
            return bad("sweep counts must be positive".into());
        }
        if s.shots.iter().any(|&v| v == 0) {
            return bad("shot counts must be positive".into());
        }
        for &id in &s.circuits {
            AnsatzId::new(id).map_err(|e| Error::Config(e.to_string()))?;
        }
        if s.encodes == 0 {
            return bad("sweep needs at least one encode".into());
        }
        self.optimizer.validate()?;
        TfimSpec::new(self.n_qubits, self.tfim.h_field, self.tfim.j0, 0)?;
        self.run_config().validate()?;
        if !(self.tfim.dt.is_finite()) {
            return bad("tfim.dt must be finite".into());
        }
        Ok(())
    }

    pub fn run_config(&self) -> RunConfig {
        let d = &self.dynamics;
        RunConfig {
            n_qubits: d.n_qubits,
            dt: d.dt,
            v_mux: d.v_mux,
            gamma: d.gamma,
            input_mode: d.input_mode,
            warmup_time: d.warmup_time,
            encodes: d.encodes,
            seed: rng::substream(self.seed, &[TAG_RUN]),
        }
    }

    fn grid(&self) -> Vec<f64> {
        uniform_grid(self.expressivity.grid_points)
    }
}

/// Sidecar written next to every output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub seeds: BTreeMap<String, u64>,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

fn axes_for(seed: u64, realization: usize, r: usize) -> Vec<RotationAxis> {
    let mut g = rng::stream(seed, &[TAG_AXES, realization as u64]);
    (0..r).map(|_| RotationAxis::sample(&mut g)).collect()
}

/// Parameters keyed by realization and sample only, so equally sized
/// templates see the same draws.
fn params_for(seed: u64, realization: usize, sample: usize, n: usize) -> Vec<f64> {
    let mut g = rng::stream(seed, &[TAG_PARAMS, realization as u64, sample as u64]);
    (0..n).map(|_| g.random_range(0.0..std::f64::consts::TAU)).collect()
}

/// Initial state shared by every reservoir of one axis realization.
pub fn initial_state(cfg: &ExperimentConfig, realization: usize) -> Vec<C64> {
    match cfg.expressivity.initial_state {
        InitialState::Zero => zero_state(cfg.n_qubits),
        InitialState::RandomProduct => {
            random_product_state(cfg.n_qubits, &mut rng::stream(cfg.seed, &[TAG_INIT, realization as u64]))
        }
    }
}

fn tfim_seed(seed: u64, realization: usize, sample: usize) -> u64 {
    rng::substream(seed, &[TAG_TFIM, realization as u64, sample as u64])
}

fn tfim_reservoir(cfg: &ExperimentConfig, realization: usize, sample: usize) -> Result<ReservoirUnitary> {
    let spec = TfimSpec::new(cfg.n_qubits, cfg.tfim.h_field, cfg.tfim.j0, tfim_seed(cfg.seed, realization, sample))?;
    Tfim::sample(spec)?.reservoir(cfg.tfim.dt)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn table_for(
    initial: &[C64],
    encoding: &Circuit,
    reservoir: &ReservoirUnitary,
    placement: EncodingPlacement,
    grid: &[f64],
) -> Result<FeatureTable> {
    match placement {
        EncodingPlacement::Upfront => EncodedStates::from_initial(initial, encoding, &[], grid)?.table(reservoir),
        EncodingPlacement::Interleaved => {
            let model =
                QrcModel::new(encoding.clone(), reservoir.clone())?.with_placement(placement).with_initial(initial.to_vec())?;
            FeatureTable::new(grid.to_vec(), grid.iter().map(|&u| model.probabilities(u)).collect::<Result<_>>()?)
        }
    }
}

// ---------------------------------------------------------------- dynamics

#[derive(Clone, Debug)]
pub struct DynamicsResult {
    pub physical: Trace,
    pub gate: Trace,
    pub max_deviation: f64,
    pub tfim: Tfim,
}

pub fn compute_dynamics(cfg: &ExperimentConfig) -> Result<DynamicsResult> {
    let run_cfg = cfg.run_config();
    let d = &cfg.dynamics;
    let spec = TfimSpec::new(d.n_qubits, cfg.tfim.h_field, cfg.tfim.j0, rng::substream(cfg.seed, &[TAG_TFIM]))?;
    let tfim = Tfim::sample(spec)?;
    let mut g = rng::stream(cfg.seed, &[TAG_INPUTS]);
    let inputs: Vec<f64> = (0..d.steps).map(|_| g.random_range(0.0..=1.0)).collect();

    let mut physical = PhysicalBackend::new(&run_cfg, &tfim, run_cfg.initial_state())?;
    let physical = run(&run_cfg, &mut physical, &inputs)?;
    let mut gate = GateBackend::new(&run_cfg, tfim.reservoir(run_cfg.substep())?, run_cfg.initial_state())?;
    let gate = run(&run_cfg, &mut gate, &inputs)?;
    let max_deviation = physical.max_abs_deviation(&gate)?;
    if !(max_deviation < PIPELINE_TOL) {
        return Err(Error::Invariant(format!("pipelines disagree by {max_deviation:e}")));
    }
    Ok(DynamicsResult { physical, gate, max_deviation, tfim })
}

fn write_dynamics(cfg: &ExperimentConfig, r: &DynamicsResult, out: &mut Outputs) -> Result<serde_json::Value> {
    let mut w = out.csv("dynamics.csv")?;
    w.write_record(["time", "input_step", "input", "qubit", "sigma_z_physical", "sigma_z_gate"])?;
    let p = &r.physical;
    for i in 0..p.n_readouts() {
        let k = p.input_step[i];
        let input = if k >= 0 { p.inputs[k as usize].to_string() } else { String::new() };
        for q in 0..p.sigma_z[i].len() {
            w.write_record([
                p.times[i].to_string(),
                k.to_string(),
                input.clone(),
                q.to_string(),
                p.sigma_z[i][q].to_string(),
                r.gate.sigma_z[i][q].to_string(),
            ])?;
        }
    }
    w.flush()?;
    let mut f = out.file("couplings.json")?;
    writeln!(f, "{}", r.tfim.couplings.to_json()?)?;
    out.seeds.insert("tfim".into(), r.tfim.spec.seed);
    out.seeds.insert("initial_state".into(), cfg.run_config().seed);
    out.seeds.insert("inputs".into(), rng::substream(cfg.seed, &[TAG_INPUTS]));
    Ok(serde_json::json!({ "max_deviation": r.max_deviation, "readouts": p.n_readouts() }))
}

// --------------------------------------------------------- rec vs encodes

/// One REC value of one realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub circuit: String,
    pub r: usize,
    pub realization: usize,
    pub realization_seed: u64,
    pub param_sample: usize,
    /// `None` for infinite shots.
    pub shots: Option<u64>,
    pub rec: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecRow {
    pub r: usize,
    pub reservoir: String,
    pub mean: f64,
    pub std: f64,
    pub bound: usize,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecVsEncodes {
    pub rows: Vec<RecRow>,
    pub samples: Vec<Sample>,
}

pub const REC_RESERVOIRS: [&str; 3] = ["identity", "circuit6", "tfim"];

pub fn compute_rec_vs_encodes(cfg: &ExperimentConfig) -> Result<RecVsEncodes> {
    let n = cfg.n_qubits;
    let e = &cfg.expressivity;
    let grid = cfg.grid();
    let k = 1usize << n;
    let c6 = build_ansatz(AnsatzId::new(6)?, n)?;
    let jobs: Vec<(usize, usize)> = (e.r_min..=e.r_max).flat_map(|r| (0..e.axis_realizations).map(move |a| (r, a))).collect();
    let per_job: Vec<[f64; 3]> = jobs
        .par_iter()
        .map(|&(r, a)| {
            let axes = axes_for(cfg.seed, a, r);
            let enc = encoding_layer(n, r, &axes)?;
            let init = initial_state(cfg, a);
            let reservoirs = [
                ReservoirUnitary::identity(n),
                ReservoirUnitary::from_circuit(&c6, &params_for(cfg.seed, a, 0, c6.n_params()))?,
                tfim_reservoir(cfg, a, 0)?,
            ];
            let mut out = [0.0; 3];
            for (slot, res) in out.iter_mut().zip(&reservoirs) {
                let v = rec_infinite(&analyze(&table_for(&init, &enc, res, e.placement, &grid)?)?);
                if v > rec_upper_bound(r, k) as f64 {
                    return Err(Error::Invariant(format!("REC {v} above the bound at r = {r}")));
                }
                *slot = v;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut samples = Vec::new();
    let mut rows = Vec::new();
    for r in e.r_min..=e.r_max {
        for (i, name) in REC_RESERVOIRS.iter().enumerate() {
            let values: Vec<f64> = jobs.iter().zip(&per_job).filter(|(j, _)| j.0 == r).map(|(_, v)| v[i]).collect();
            for (a, v) in values.iter().enumerate() {
                samples.push(Sample {
                    circuit: name.to_string(),
                    r,
                    realization: a,
                    realization_seed: rng::substream(cfg.seed, &[TAG_AXES, a as u64]),
                    param_sample: 0,
                    shots: None,
                    rec: *v,
                });
            }
            let (mean, std) = mean_std(&values);
            rows.push(RecRow { r, reservoir: name.to_string(), mean, std, bound: rec_upper_bound(r, k), n: values.len() });
        }
    }
    Ok(RecVsEncodes { rows, samples })
}

fn shots_label(s: Option<u64>) -> String {
    s.map_or("inf".to_string(), |v| v.to_string())
}

fn write_samples(out: &mut Outputs, name: &str, samples: &[Sample]) -> Result<()> {
    let mut w = out.csv(name)?;
    w.write_record(["circuit_id", "r", "realization_seed", "param_sample", "S", "rec"])?;
    for s in samples {
        w.write_record([
            s.circuit.clone(),
            s.r.to_string(),
            s.realization_seed.to_string(),
            s.param_sample.to_string(),
            shots_label(s.shots),
            s.rec.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_rec_vs_encodes(res: &RecVsEncodes, out: &mut Outputs) -> Result<serde_json::Value> {
    let mut w = out.csv("rec_vs_encodes.csv")?;
    w.write_record(["r", "reservoir", "mean_rec", "std_rec", "bound", "n"])?;
    for row in &res.rows {
        w.write_record([
            row.r.to_string(),
            row.reservoir.clone(),
            row.mean.to_string(),
            row.std.to_string(),
            row.bound.to_string(),
            row.n.to_string(),
        ])?;
    }
    w.flush()?;
    write_samples(out, "rec_vs_encodes_samples.csv", &res.samples)?;
    Ok(serde_json::to_value(&res.rows)?)
}

// -------------------------------------------------------------- eigentasks

#[derive(Clone, Debug)]
pub struct EigentaskResult {
    pub table: FeatureTable,
    pub eigentasks: EigentaskSet,
    /// One curve per retained eigentask on the table's grid.
    pub curves: Vec<Vec<f64>>,
    /// Largest residual of a curve against `{1, cos u, sin u, …}` up to the encode count.
    pub fit_residual: f64,
    /// Spread `max − min` of the least-noisy eigentask.
    pub constant_spread: f64,
    pub report: RecReport,
}

pub fn compute_eigentasks(cfg: &ExperimentConfig) -> Result<EigentaskResult> {
    let n = cfg.n_qubits;
    let r = cfg.expressivity.eigentask_encodes;
    let axes = axes_for(cfg.seed, 0, r);
    let c6 = build_ansatz(AnsatzId::new(6)?, n)?;
    let res = ReservoirUnitary::from_circuit(&c6, &params_for(cfg.seed, 0, 0, c6.n_params()))?;
    let table =
        table_for(&initial_state(cfg, 0), &encoding_layer(n, r, &axes)?, &res, cfg.expressivity.placement, &cfg.grid())?;
    let eigentasks = analyze(&table)?;
    let curves = eigentasks.evaluate(&table);
    let fit_residual = curves
        .iter()
        .map(|c| trig_fit_residual(table.u_grid(), c, r))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let constant_spread = curves.first().map_or(0.0, |c| {
        c.iter().copied().fold(f64::NEG_INFINITY, f64::max) - c.iter().copied().fold(f64::INFINITY, f64::min)
    });
    let report = RecReport::analytic(&table, &cfg.sweep.shots, "circuit6", cfg.seed, &axes)?;
    Ok(EigentaskResult { table, eigentasks, curves, fit_residual, constant_spread, report })
}

fn write_eigentasks(r: &EigentaskResult, out: &mut Outputs) -> Result<serde_json::Value> {
    let mut w = out.csv("eigentasks.csv")?;
    w.write_record(["k", "beta", "u", "y"])?;
    for (k, curve) in r.curves.iter().enumerate() {
        for (u, y) in r.table.u_grid().iter().zip(curve) {
            w.write_record([k.to_string(), r.eigentasks.betas[k].to_string(), u.to_string(), y.to_string()])?;
        }
    }
    w.flush()?;
    let f = out.file("features.csv")?;
    r.table.write_csv(f)?;
    let mut f = out.file("rec_report.json")?;
    writeln!(f, "{}", r.report.to_json()?)?;
    Ok(serde_json::json!({
        "rank": r.eigentasks.rank,
        "betas": r.eigentasks.betas,
        "fit_residual": r.fit_residual,
        "constant_spread": r.constant_spread,
        "orthonormality_error": r.eigentasks.orthonormality_error(&r.table),
    }))
}

// ----------------------------------------------------------- circuit sweep

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub circuit: String,
    /// `None` for infinite shots.
    pub shots: Option<u64>,
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub n: usize,
    pub optimized: bool,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub samples: Vec<Sample>,
    pub histories: Vec<(String, usize, OptResult)>,
}

impl SweepResult {
    pub fn row(&self, circuit: &str, shots: Option<u64>, optimized: bool) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.circuit == circuit && r.shots == shots && r.optimized == optimized)
    }
}

struct Unit {
    circuit: String,
    realization: usize,
    sample: usize,
    finite: Vec<f64>,
    infinite: f64,
}

fn circuit_name(id: u32) -> String {
    format!("circuit{id}")
}

/// Random-parameter sweep over templates (and the TFIM), optionally followed
/// by per-realization optimization started from the same random samples.
pub fn compute_sweep(cfg: &ExperimentConfig, optimize: bool) -> Result<SweepResult> {
    let n = cfg.n_qubits;
    let s = &cfg.sweep;
    let grid = cfg.grid();
    let k = 1usize << n;
    let templates: Vec<(u32, Circuit)> =
        s.circuits.iter().map(|&id| Ok((id, build_ansatz(AnsatzId::new(id)?, n)?))).collect::<Result<_>>()?;
    let encoded: Vec<EncodedStates> = (0..s.axis_realizations)
        .into_par_iter()
        .map(|a| {
            let enc = encoding_layer(n, s.encodes, &axes_for(cfg.seed, a, s.encodes))?;
            EncodedStates::from_initial(&initial_state(cfg, a), &enc, &[], &grid)
        })
        .collect::<Result<_>>()?;

    let evaluate = |states: &EncodedStates, res: &ReservoirUnitary, name: &str| -> Result<(Vec<f64>, f64)> {
        let es = analyze(&states.table(res)?)?;
        let inf = rec_infinite(&es);
        if inf > rec_upper_bound(s.encodes, k) as f64 {
            return Err(Error::Invariant(format!("{name}: REC {inf} above the bound")));
        }
        Ok((s.shots.iter().map(|&v| rec_finite(&es, Shots::Finite(v))).collect(), inf))
    };

    let mut jobs: Vec<(Option<usize>, usize, usize)> = Vec::new();
    for t in 0..templates.len() {
        for a in 0..s.axis_realizations {
            for j in 0..s.param_samples {
                jobs.push((Some(t), a, j));
            }
        }
    }
    if s.include_tfim {
        for a in 0..s.axis_realizations {
            for j in 0..s.tfim_samples {
                jobs.push((None, a, j));
            }
        }
    }
    let units: Vec<Unit> = jobs
        .par_iter()
        .map(|&(t, a, j)| {
            let (name, res) = match t {
                Some(t) => {
                    let (id, c) = &templates[t];
                    (circuit_name(*id), ReservoirUnitary::from_circuit(c, &params_for(cfg.seed, a, j, c.n_params()))?)
                }
                None => ("tfim".to_string(), tfim_reservoir(cfg, a, j)?),
            };
            let (finite, infinite) = evaluate(&encoded[a], &res, &name)?;
            Ok(Unit { circuit: name, realization: a, sample: j, finite, infinite })
        })
        .collect::<Result<_>>()?;

    let mut samples = Vec::new();
    let mut rows = Vec::new();
    let mut names: Vec<String> = templates.iter().map(|(id, _)| circuit_name(*id)).collect();
    if s.include_tfim {
        names.push("tfim".into());
    }
    let shot_list: Vec<Option<u64>> = s.shots.iter().map(|&v| Some(v)).chain([None]).collect();
    for (si, &shots) in shot_list.iter().enumerate() {
        for name in &names {
            let group: Vec<&Unit> = units.iter().filter(|u| &u.circuit == name).collect();
            let values: Vec<f64> = group.iter().map(|u| u.finite.get(si).copied().unwrap_or(u.infinite)).collect();
            for (u, &rec) in group.iter().zip(&values) {
                samples.push(Sample {
                    circuit: name.clone(),
                    r: s.encodes,
                    realization: u.realization,
                    realization_seed: rng::substream(cfg.seed, &[TAG_AXES, u.realization as u64]),
                    param_sample: u.sample,
                    shots,
                    rec,
                });
            }
            let (mean, std) = mean_std(&values);
            rows.push(SweepRow {
                circuit: name.clone(),
                shots,
                mean,
                std,
                stderr: std / (values.len() as f64).sqrt(),
                n: values.len(),
                optimized: false,
            });
        }
    }

    let mut histories = Vec::new();
    if optimize {
        let opt_shots = match cfg.optimizer.shots {
            Shots::Finite(v) => Some(v),
            Shots::Infinite => None,
        };
        let mut opt_jobs = Vec::new();
        for t in 0..templates.len() {
            for a in 0..s.axis_realizations {
                opt_jobs.push((t, a));
            }
        }
        // Parallel over (template, realization); restarts inside run on the same pool.
        let results: Vec<OptResult> = opt_jobs
            .par_iter()
            .map(|&(t, a)| {
                let (_, c) = &templates[t];
                let initial: Vec<Vec<f64>> = (0..s.param_samples).map(|j| params_for(cfg.seed, a, j, c.n_params())).collect();
                let objective = RecObjective::from_states(c.clone(), encoded[a].clone(), cfg.optimizer.shots);
                let opt_cfg = OptConfig { seed: rng::substream(cfg.seed, &[TAG_OPT, t as u64, a as u64]), ..cfg.optimizer.clone() };
                maximize(|p| objective.evaluate(p), &initial, &opt_cfg)
            })
            .collect::<Result<_>>()?;
        for (t, (id, _)) in templates.iter().enumerate() {
            let name = circuit_name(*id);
            let mut values = Vec::new();
            for a in 0..s.axis_realizations {
                let res = &results[t * s.axis_realizations + a];
                values.push(res.best_value);
                samples.push(Sample {
                    circuit: format!("{name}-opt"),
                    r: s.encodes,
                    realization: a,
                    realization_seed: rng::substream(cfg.seed, &[TAG_AXES, a as u64]),
                    param_sample: 0,
                    shots: opt_shots,
                    rec: res.best_value,
                });
                if a < s.history_realizations {
                    histories.push((name.clone(), a, res.clone()));
                }
            }
            let (mean, std) = mean_std(&values);
            rows.push(SweepRow {
                circuit: name,
                shots: opt_shots,
                mean,
                std,
                stderr: std / (values.len() as f64).sqrt(),
                n: values.len(),
                optimized: true,
            });
        }
    }
    Ok(SweepResult { rows, samples, histories })
}

fn write_sweep(res: &SweepResult, stem: &str, out: &mut Outputs) -> Result<serde_json::Value> {
    let mut w = out.csv(&format!("{stem}.csv"))?;
    w.write_record(["circuit", "S", "mean_rec", "std_rec", "stderr", "n", "optimized"])?;
    for r in &res.rows {
        w.write_record([
            r.circuit.clone(),
            shots_label(r.shots),
            r.mean.to_string(),
            r.std.to_string(),
            r.stderr.to_string(),
            r.n.to_string(),
            r.optimized.to_string(),
        ])?;
    }
    w.flush()?;
    write_samples(out, &format!("{stem}_samples.csv"), &res.samples)?;
    if !res.histories.is_empty() {
        let mut w = out.csv("optimize_history.csv")?;
        w.write_record(["circuit", "realization", "eval", "restart", "params_hash", "rec", "best_so_far"])?;
        for (name, a, h) in &res.histories {
            for e in &h.history {
                w.write_record([
                    name.clone(),
                    a.to_string(),
                    e.eval.to_string(),
                    e.restart.to_string(),
                    e.params_hash.clone(),
                    e.value.to_string(),
                    e.best_so_far.to_string(),
                ])?;
            }
        }
        w.flush()?;
    }
    Ok(serde_json::to_value(&res.rows)?)
}

// ------------------------------------------------------------------ driver

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
    seeds: BTreeMap<String, u64>,
}

impl Outputs {
    fn file(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn csv(&mut self, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
        Ok(csv::Writer::from_writer(self.file(name)?))
    }
}

/// Runs the configured experiment and writes its outputs under `cfg.out`.
/// Returns the paths written, metadata last.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&cfg.out)?;
    let mut out = Outputs { dir: cfg.out.clone(), files: Vec::new(), seeds: BTreeMap::new() };
    out.seeds.insert("base".into(), cfg.seed);
    let summary = match cfg.experiment {
        Experiment::Dynamics => write_dynamics(cfg, &compute_dynamics(cfg)?, &mut out)?,
        Experiment::RecVsEncodes => write_rec_vs_encodes(&compute_rec_vs_encodes(cfg)?, &mut out)?,
        Experiment::Eigentasks => write_eigentasks(&compute_eigentasks(cfg)?, &mut out)?,
        Experiment::CircuitSweep => write_sweep(&compute_sweep(cfg, false)?, "circuit_sweep", &mut out)?,
        Experiment::OptimizeSweep => write_sweep(&compute_sweep(cfg, true)?, "optimize_sweep", &mut out)?,
    };
    let name = format!("{}.meta.json", cfg.experiment.name());
    let meta = Metadata {
        tool: env!("CARGO_PKG_NAME").into(),
        version: VERSION.into(),
        experiment: cfg.experiment,
        config: cfg.clone(),
        seeds: out.seeds.clone(),
        outputs: out.files.clone(),
        summary,
    };
    let mut paths: Vec<PathBuf> = out.files.iter().map(|f| cfg.out.join(f)).collect();
    let meta_path = cfg.out.join(&name);
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")?;
    paths.push(meta_path);
    Ok(paths)
}
