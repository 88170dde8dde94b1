//! Resolvable expressive capacity (REC) of a single QRC cycle.
//!
//! A [`FeatureTable`] holds the measured probabilities `x_k(u)` on an input
//! grid. Its signal moment `G = E_u[x xᵀ]` and shot-noise moment
//! `D = E_u[diag(x) − x xᵀ]` define the eigentasks through `D r = β² G r`
//! on the range of `G`, and the REC at `S` shots is `Σ_k 1/(1 + β_k²/S)`.

mod eigentasks;
mod features;
mod fourier;
mod sampling;

pub use eigentasks::{
    analyze, eigentasks, rec_finite, rec_infinite, second_moment, shot_noise_moment, EigentaskSet, Shots,
    RANK_THRESHOLD,
};
pub use features::{feature_table, uniform_grid, EncodedStates, FeatureTable, PROBABILITY_TOL};
pub use fourier::{fourier_fit, fourier_rank, trig_fit_residual, FourierFit};
pub use sampling::{empirical_moments, rec_empirical, rec_empirical_from_table, sample_features, RecReport};

/// `min(2r + 1, k)`: the number of Fourier modes `r` encodes can reach,
/// capped by the number of measured outcomes.
pub fn rec_upper_bound(r: usize, k: usize) -> usize {
    (2 * r + 1).min(k)
}
