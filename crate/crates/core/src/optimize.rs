//! Derivative-free maximization of the finite-shot REC over ansatz parameters.
//!
//! The objective is the analytic `C_T(S)` of a fixed encoding followed by the
//! ansatz at parameters `θ`, so the landscape is noiseless. Parameters live on
//! the torus `[0, 2π)^P`: the search runs in unwrapped coordinates and every
//! evaluated or reported point is wrapped.

use std::f64::consts::TAU;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channels::RotationAxis;
use crate::circuits::{encoding_layer, Circuit, ReservoirUnitary};
use crate::error::{Error, Result};
use crate::expressivity::{analyze, rec_finite, EncodedStates, Shots};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NelderMead,
    CoordinateSearch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptConfig {
    /// Total objective evaluations, initial points included.
    pub budget: usize,
    pub restarts: usize,
    pub shots: Shots,
    pub seed: u64,
    pub method: Method,
    /// Initial simplex edge / coordinate step, in radians.
    pub step: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self { budget: 2000, restarts: 8, shots: Shots::Finite(10_000), seed: 0, method: Method::NelderMead, step: 0.5 }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.budget < self.restarts {
            return Err(Error::Config(format!("budget {} must cover {} restarts", self.budget, self.restarts)));
        }
        if let Shots::Finite(0) = self.shots {
            return Err(Error::Config("shot count must be at least 1".into()));
        }
        if !(self.step > 0.0) {
            return Err(Error::Config("step must be positive".into()));
        }
        Ok(())
    }
}

/// One objective evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub eval: usize,
    /// `-1` for the initial points.
    pub restart: i64,
    pub params_hash: String,
    pub value: f64,
    pub best_so_far: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_params: Vec<f64>,
    pub best_value: f64,
    /// Best value among the initial points.
    pub initial_best: f64,
    pub history: Vec<Evaluation>,
}

impl OptResult {
    /// CSV with columns `eval,restart,params_hash,rec,best_so_far`.
    pub fn write_history_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["eval", "restart", "params_hash", "rec", "best_so_far"])?;
        for e in &self.history {
            out.write_record([
                e.eval.to_string(),
                e.restart.to_string(),
                e.params_hash.clone(),
                e.value.to_string(),
                e.best_so_far.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn wrap(params: &[f64]) -> Vec<f64> {
    params.iter().map(|p| p.rem_euclid(TAU)).collect()
}

/// First 16 hex digits of the SHA-256 of the parameters' IEEE bits.
pub fn params_hash(params: &[f64]) -> String {
    let mut h = Sha256::new();
    for p in params {
        h.update(p.to_bits().to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

/// Analytic `C_T(S)` of `U(θ) S(u)|0…0⟩` over a fixed grid.
pub struct RecObjective {
    states: EncodedStates,
    ansatz: Circuit,
    shots: Shots,
}

impl RecObjective {
    pub fn new(ansatz: Circuit, axes: &[RotationAxis], u_grid: &[f64], shots: Shots) -> Result<Self> {
        let encoding = encoding_layer(ansatz.n_qubits(), axes.len(), axes)?;
        Ok(Self { states: EncodedStates::new(&encoding, &[], u_grid)?, ansatz, shots })
    }

    /// Reuses states already encoded for this axis realization.
    pub fn from_states(ansatz: Circuit, states: EncodedStates, shots: Shots) -> Self {
        Self { states, ansatz, shots }
    }

    pub fn n_params(&self) -> usize {
        self.ansatz.n_params()
    }

    pub fn evaluate(&self, params: &[f64]) -> Result<f64> {
        let res = ReservoirUnitary::from_circuit(&self.ansatz, params)?;
        Ok(rec_finite(&analyze(&self.states.table(&res)?)?, self.shots))
    }
}

/// Uniform samples on the torus.
pub fn random_points(n_points: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut g = rng::seeded(seed);
    (0..n_points).map(|_| (0..dim).map(|_| g.random_range(0.0..TAU)).collect()).collect()
}

struct Budgeted<'a, F> {
    f: &'a F,
    left: usize,
    trail: Vec<(Vec<f64>, f64)>,
}

impl<F: Fn(&[f64]) -> Result<f64>> Budgeted<'_, F> {
    /// `None` once the budget is spent.
    fn eval(&mut self, x: &[f64]) -> Result<Option<f64>> {
        if self.left == 0 {
            return Ok(None);
        }
        self.left -= 1;
        let p = wrap(x);
        let v = (self.f)(&p)?;
        if !v.is_finite() {
            return Err(Error::Invariant(format!("objective returned {v}")));
        }
        self.trail.push((p, v));
        Ok(Some(v))
    }
}

fn nelder_mead<F: Fn(&[f64]) -> Result<f64>>(b: &mut Budgeted<F>, x0: &[f64], f0: f64, step: f64) -> Result<()> {
    let n = x0.len();
    // Vertices stored with the negated value: the simplex minimizes.
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), -f0)];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        match b.eval(&x)? {
            Some(v) => simplex.push((x, -v)),
            None => return Ok(()),
        }
    }
    loop {
        simplex.sort_by(|a, c| a.1.total_cmp(&c.1));
        let spread = simplex[n].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread < 1e-12 && size < 1e-9 {
            return Ok(());
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (w - c)).collect() };
        let worst = simplex[n].1;
        let second = simplex[n - 1].1;
        let best = simplex[0].1;

        let xr = along(-1.0);
        let Some(fr) = b.eval(&xr)?.map(|v| -v) else { return Ok(()) };
        if fr < best {
            let xe = along(-2.0);
            let Some(fe) = b.eval(&xe)?.map(|v| -v) else { return Ok(()) };
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < second {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, t) = if fr < worst { (along(-0.5), fr) } else { (along(0.5), worst) };
        let Some(fc) = b.eval(&xc)?.map(|v| -v) else { return Ok(()) };
        if fc < t {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = x_best.iter().zip(&vertex.0).map(|(a, c)| a + 0.5 * (c - a)).collect();
            let Some(v) = b.eval(&x)? else { return Ok(()) };
            *vertex = (x, -v);
        }
    }
}

fn coordinate_search<F: Fn(&[f64]) -> Result<f64>>(b: &mut Budgeted<F>, x0: &[f64], f0: f64, step: f64) -> Result<()> {
    let mut x = x0.to_vec();
    let mut fx = f0;
    let mut h = step;
    while h > 1e-6 {
        let mut improved = false;
        for i in 0..x.len() {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += sign * h;
                let Some(fy) = b.eval(&y)? else { return Ok(()) };
                if fy > fx {
                    x = y;
                    fx = fy;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    Ok(())
}

/// Maximizes `f` from the given initial points.
///
/// Every initial point is evaluated first; local searches then start from the
/// best `restarts` of them (ties to the lower index) and share the remaining
/// budget evenly. A Nelder-Mead restart stops early once its simplex has
/// collapsed, so the history can be shorter than the budget. Restarts run in
/// parallel; the history lists the initial evaluations and then each restart
/// in order.
pub fn maximize<F>(f: F, initial: &[Vec<f64>], cfg: &OptConfig) -> Result<OptResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    cfg.validate()?;
    if initial.is_empty() {
        return Err(Error::Config("no initial points".into()));
    }
    if initial.len() > cfg.budget {
        return Err(Error::Config(format!("{} initial points exceed the budget {}", initial.len(), cfg.budget)));
    }
    let dim = initial[0].len();
    if initial.iter().any(|p| p.len() != dim) {
        return Err(Error::Dimension("initial points of different length".into()));
    }
    let mut init = Budgeted { f: &f, left: initial.len(), trail: Vec::new() };
    for p in initial {
        init.eval(p)?;
    }
    let init_trail = init.trail;
    if dim == 0 {
        log::warn!("circuit has no parameters; nothing to optimize");
    }

    let mut order: Vec<usize> = (0..init_trail.len()).collect();
    order.sort_by(|&a, &c| init_trail[c].1.total_cmp(&init_trail[a].1).then(a.cmp(&c)));
    let starts: Vec<usize> = if dim == 0 { Vec::new() } else { order.into_iter().take(cfg.restarts).collect() };
    let remaining = cfg.budget - init_trail.len();
    let runs: Vec<Vec<(Vec<f64>, f64)>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let share = remaining / starts.len() + usize::from(i < remaining % starts.len());
            let mut b = Budgeted { f: &f, left: share, trail: Vec::new() };
            let (x0, f0) = &init_trail[s];
            match cfg.method {
                Method::NelderMead => nelder_mead(&mut b, x0, *f0, cfg.step)?,
                Method::CoordinateSearch => coordinate_search(&mut b, x0, *f0, cfg.step)?,
            }
            Ok(b.trail)
        })
        .collect::<Result<_>>()?;

    let mut history = Vec::new();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let all = init_trail.iter().map(|e| (-1i64, e)).chain(runs.iter().enumerate().flat_map(|(i, r)| r.iter().map(move |e| (i as i64, e))));
    for (restart, (p, v)) in all {
        if best.as_ref().is_none_or(|(_, b)| v > b) {
            best = Some((p.clone(), *v));
        }
        history.push(Evaluation {
            eval: history.len(),
            restart,
            params_hash: params_hash(p),
            value: *v,
            best_so_far: best.as_ref().map(|b| b.1).unwrap_or(*v),
        });
    }
    let initial_best = init_trail.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let (best_params, best_value) = best.expect("at least one evaluation");
    Ok(OptResult { best_params, best_value, initial_best, history })
}

/// Optimizes an ansatz for the REC objective. Without explicit initial
/// points, `cfg.restarts` uniform samples are drawn from `cfg.seed`.
pub fn optimize_circuit(
    objective: &RecObjective,
    initial: Option<Vec<Vec<f64>>>,
    cfg: &OptConfig,
) -> Result<OptResult> {
    let initial = initial.unwrap_or_else(|| random_points(cfg.restarts, objective.n_params(), cfg.seed));
    maximize(|p| objective.evaluate(p), &initial, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{build_ansatz, AnsatzId};
    use crate::expressivity::uniform_grid;

    fn bump(p: &[f64]) -> Result<f64> {
        // Smooth periodic landscape with its maximum 0 at (1, 2, ...).
        Ok(p.iter().enumerate().map(|(i, x)| (x - (i + 1) as f64).cos() - 1.0).sum())
    }

    #[test]
    fn nelder_mead_finds_periodic_maximum() {
        let cfg = OptConfig { budget: 3000, restarts: 2, ..OptConfig::default() };
        let res = maximize(bump, &random_points(5, 3, 1), &cfg).unwrap();
        assert!(res.best_value > -1e-8, "{}", res.best_value);
        assert!(res.best_params.iter().all(|p| (0.0..TAU).contains(p)));
        assert!(res.history.len() <= 3000);
    }

    #[test]
    fn coordinate_search_improves() {
        let cfg = OptConfig { budget: 2000, restarts: 2, method: Method::CoordinateSearch, ..OptConfig::default() };
        let res = maximize(bump, &random_points(4, 3, 2), &cfg).unwrap();
        assert!(res.best_value > -1e-6);
        assert!(res.best_value >= res.initial_best);
    }

    #[test]
    fn incumbent_is_monotone_and_history_complete() {
        let cfg = OptConfig { budget: 500, restarts: 3, ..OptConfig::default() };
        let res = maximize(bump, &random_points(6, 4, 3), &cfg).unwrap();
        assert!(res.history.windows(2).all(|w| w[1].best_so_far >= w[0].best_so_far));
        assert_eq!(res.history.last().unwrap().best_so_far, res.best_value);
        assert!(res.history.iter().enumerate().all(|(i, e)| e.eval == i));
        assert_eq!(res.history.iter().filter(|e| e.restart == -1).count(), 6);
    }

    #[test]
    fn budget_equal_to_restarts_is_random_search() {
        let pts = random_points(4, 2, 9);
        let cfg = OptConfig { budget: 4, restarts: 4, ..OptConfig::default() };
        let res = maximize(bump, &pts, &cfg).unwrap();
        let best = pts.iter().map(|p| bump(p).unwrap()).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(res.best_value, best);
        assert_eq!(res.history.len(), 4);
    }

    #[test]
    fn deterministic_history() {
        let cfg = OptConfig { budget: 400, restarts: 4, ..OptConfig::default() };
        let a = maximize(bump, &random_points(8, 5, 4), &cfg).unwrap();
        let b = maximize(bump, &random_points(8, 5, 4), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flat_landscape_keeps_initial_value() {
        let mut g = rng::seeded(5);
        let axes = vec![RotationAxis::sample(&mut g)];
        let ansatz = build_ansatz(AnsatzId::new(6).unwrap(), 4).unwrap();
        let objective = RecObjective::new(ansatz, &axes, &uniform_grid(64), Shots::Infinite).unwrap();
        let cfg = OptConfig { budget: 60, restarts: 2, shots: Shots::Infinite, ..OptConfig::default() };
        let res = optimize_circuit(&objective, None, &cfg).unwrap();
        assert!((res.best_value - res.initial_best).abs() < 1e-9);
        assert_eq!(res.best_value, 3.0);
    }

    #[test]
    fn zero_parameter_circuit_returns_unchanged() {
        let cfg = OptConfig { budget: 10, restarts: 2, ..OptConfig::default() };
        let res = maximize(|_| Ok(1.5), &[vec![]], &cfg).unwrap();
        assert_eq!(res.best_params, Vec::<f64>::new());
        assert_eq!(res.history.len(), 1);
    }

    #[test]
    fn config_errors() {
        assert!(OptConfig { budget: 2, restarts: 3, ..OptConfig::default() }.validate().is_err());
        assert!(maximize(bump, &random_points(5, 2, 0), &OptConfig { budget: 4, restarts: 2, ..OptConfig::default() }).is_err());
    }

    #[test]
    fn history_csv() {
        let cfg = OptConfig { budget: 3, restarts: 1, ..OptConfig::default() };
        let res = maximize(bump, &random_points(1, 1, 0), &cfg).unwrap();
        let mut buf = Vec::new();
        res.write_history_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("eval,restart,params_hash,rec,best_so_far\n0,-1,"));
        assert_eq!(text.lines().count(), 4);
    }
}
