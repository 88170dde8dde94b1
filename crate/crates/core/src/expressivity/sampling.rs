use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::eigentasks::{analyze, rec_finite, rec_infinite, sym_eig, EigentaskSet, Shots, RANK_THRESHOLD};
use super::features::FeatureTable;
use super::rec_upper_bound;
use crate::channels::RotationAxis;
use crate::error::{Error, Result};
use crate::rng;

/// Empirical frequencies `X̄ = counts/S` of `S` categorical draws from `p`.
pub fn sample_features<R: Rng + ?Sized>(p: &[f64], shots: u64, rng: &mut R) -> Result<Vec<f64>> {
    if shots == 0 {
        return Err(Error::Config("sampling needs at least one shot".into()));
    }
    let mut counts = vec![0u64; p.len()];
    let mut left = shots;
    let mut mass = 1.0;
    // Sequential conditional binomials; the last outcome takes the remainder.
    for (k, &pk) in p.iter().enumerate().take(p.len().saturating_sub(1)) {
        if left == 0 {
            break;
        }
        let pk = pk.max(0.0);
        let q = if mass > 0.0 { (pk / mass).clamp(0.0, 1.0) } else { 1.0 };
        let c = if q >= 1.0 {
            left
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(left, q).map_err(|e| Error::Config(e.to_string()))?.sample(rng)
        };
        counts[k] = c;
        left -= c;
        mass -= pk;
    }
    if let Some(last) = counts.last_mut() {
        *last += left;
    }
    Ok(counts.into_iter().map(|c| c as f64 / shots as f64).collect())
}

/// Plug-in moments of one sampled table: the raw second moment `E_u[X̄ X̄ᵀ]`
/// and the noise moment with the `S/(S−1)` single-shot correction.
pub fn empirical_moments(sampled: &[Vec<f64>], shots: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if shots < 2 {
        return Err(Error::Config("the empirical estimator needs S >= 2".into()));
    }
    let k = sampled.first().map_or(0, Vec::len);
    let m = sampled.len() as f64;
    let mut g = DMatrix::zeros(k, k);
    let mut mean = vec![0.0; k];
    for x in sampled {
        for a in 0..k {
            mean[a] += x[a];
            for b in 0..k {
                g[(a, b)] += x[a] * x[b];
            }
        }
    }
    g /= m;
    let mut d = -g.clone();
    for a in 0..k {
        d[(a, a)] += mean[a] / m;
    }
    let s = shots as f64;
    d *= s / (s - 1.0);
    Ok((g, d))
}

/// Finite-shot REC estimated from one sampled table.
///
/// `E[X̄X̄ᵀ] = G + D/S`, so the pencil `(D̂, Ĝ_raw)` has eigenvalues
/// `b² = β²/(1 + β²/S)`; each contributes `1 − b²/S` to `C_T(S)`.
fn rec_from_samples(sampled: &[Vec<f64>], shots: u64) -> Result<f64> {
    let (g_raw, d) = empirical_moments(sampled, shots)?;
    let (lambda, u) = sym_eig(&g_raw);
    let lmax = lambda.last().copied().unwrap_or(0.0);
    if !(lmax > 0.0) {
        return Ok(0.0);
    }
    let kept: Vec<usize> = (0..lambda.len()).filter(|&i| lambda[i] > RANK_THRESHOLD * lmax).collect();
    let w = DMatrix::from_fn(g_raw.nrows(), kept.len(), |r, c| u[(r, kept[c])] / lambda[kept[c]].sqrt());
    let (b_sq, _) = sym_eig(&(w.transpose() * d * &w));
    let s = shots as f64;
    Ok(b_sq.iter().map(|b| (1.0 - b.max(0.0) / s).max(0.0)).sum())
}

/// Mean finite-shot REC over `n_runs` independently sampled tables.
/// `Shots::Infinite` bypasses sampling and returns the analytic value.
pub fn rec_empirical_from_table(ft: &FeatureTable, shots: Shots, n_runs: usize, seed: u64) -> Result<f64> {
    let s = match shots {
        Shots::Infinite => return Ok(rec_infinite(&analyze(ft)?)),
        Shots::Finite(s) => s,
    };
    if n_runs == 0 {
        return Err(Error::Config("n_runs must be positive".into()));
    }
    let mut total = 0.0;
    for run in 0..n_runs {
        let mut g = rng::stream(seed, &[run as u64]);
        let sampled = ft.columns().iter().map(|p| sample_features(p, s, &mut g)).collect::<Result<Vec<_>>>()?;
        total += rec_from_samples(&sampled, s)?;
    }
    Ok(total / n_runs as f64)
}

/// REC summary of one circuit realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecReport {
    pub rec_infinite: f64,
    /// Analytic `C_T(S)` keyed by shot count.
    pub rec_finite: BTreeMap<u64, f64>,
    /// Sampled estimate keyed by shot count, when requested.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub rec_empirical: BTreeMap<u64, f64>,
    pub r_encode: usize,
    pub k_count: usize,
    pub circuit: String,
    pub seed: u64,
    pub axes: Vec<RotationAxis>,
    pub grid_points: usize,
    pub betas: Vec<f64>,
}

impl RecReport {
    pub fn analytic(
        ft: &FeatureTable,
        shots: &[u64],
        circuit: impl Into<String>,
        seed: u64,
        axes: &[RotationAxis],
    ) -> Result<Self> {
        let es: EigentaskSet = analyze(ft)?;
        let report = Self {
            rec_infinite: rec_infinite(&es),
            rec_finite: shots.iter().map(|&s| (s, rec_finite(&es, Shots::Finite(s)))).collect(),
            rec_empirical: BTreeMap::new(),
            r_encode: axes.len(),
            k_count: ft.k_count(),
            circuit: circuit.into(),
            seed,
            axes: axes.to_vec(),
            grid_points: ft.n_points(),
            betas: es.betas,
        };
        report.check()?;
        Ok(report)
    }

    /// Checks `0 ≤ C_T(S) ≤ C_T(∞) ≤ min(2r+1, K)` and monotonicity in `S`.
    pub fn check(&self) -> Result<()> {
        let bound = rec_upper_bound(self.r_encode, self.k_count) as f64;
        if self.rec_infinite > bound {
            return Err(Error::Invariant(format!("REC {} exceeds the bound {bound}", self.rec_infinite)));
        }
        let mut prev = 0.0;
        for (s, &v) in &self.rec_finite {
            if v < prev - 1e-12 || v > self.rec_infinite + 1e-12 || v < 0.0 {
                return Err(Error::Invariant(format!("C_T({s}) = {v} out of order")));
            }
            prev = v;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Builds the analytic report and adds sampled estimates for every shot count.
pub fn rec_empirical(
    ft: &FeatureTable,
    shots: &[u64],
    n_runs: usize,
    circuit: impl Into<String>,
    seed: u64,
    axes: &[RotationAxis],
) -> Result<RecReport> {
    let mut report = RecReport::analytic(ft, shots, circuit, seed, axes)?;
    for (i, &s) in shots.iter().enumerate() {
        let est = rec_empirical_from_table(ft, Shots::Finite(s), n_runs, rng::substream(seed, &[i as u64]))?;
        report.rec_empirical.insert(s, est);
    }
    Ok(report)
}
