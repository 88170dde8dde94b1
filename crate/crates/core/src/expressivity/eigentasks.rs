use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::features::FeatureTable;
use crate::error::{Error, Result};

/// Signal eigenvalues of `G` at or below this fraction of the largest are
/// treated as outside its range.
pub const RANK_THRESHOLD: f64 = 1e-14;

/// Shot count for the finite-shot REC.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shots {
    Finite(u64),
    Infinite,
}

/// `G_jk = E_u[x_j(u) x_k(u)]`.
pub fn second_moment(ft: &FeatureTable) -> DMatrix<f64> {
    let k = ft.k_count();
    let mut g = DMatrix::zeros(k, k);
    for p in ft.columns() {
        for a in 0..k {
            if p[a] == 0.0 {
                continue;
            }
            for b in a..k {
                g[(a, b)] += p[a] * p[b];
            }
        }
    }
    let m = ft.n_points() as f64;
    for a in 0..k {
        for b in a..k {
            g[(a, b)] /= m;
            g[(b, a)] = g[(a, b)];
        }
    }
    g
}

/// `D = E_u[diag(x(u)) − x(u) x(u)ᵀ]`, the mean single-shot covariance of the
/// categorical outcome.
pub fn shot_noise_moment(ft: &FeatureTable) -> DMatrix<f64> {
    let mut d = -second_moment(ft);
    let m = ft.n_points() as f64;
    for k in 0..ft.k_count() {
        d[(k, k)] += ft.columns().iter().map(|p| p[k]).sum::<f64>() / m;
    }
    d
}

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending.
pub(crate) fn sym_eig(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigentasks `y_k(u) = Σ_j r_kj x_j(u)` and their noise-to-signal ratios `β_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigentaskSet {
    /// Ascending. Infinite when the noise swamps the component entirely.
    pub betas: Vec<f64>,
    /// One coefficient vector per eigentask, in the order of `betas`.
    pub coeffs: Vec<Vec<f64>>,
    pub rank: usize,
}

impl EigentaskSet {
    pub fn beta_squared(&self) -> Vec<f64> {
        self.betas.iter().map(|b| b * b).collect()
    }

    /// Eigentask functions on the table's grid, one vector per eigentask.
    pub fn evaluate(&self, ft: &FeatureTable) -> Vec<Vec<f64>> {
        self.coeffs
            .iter()
            .map(|r| ft.columns().iter().map(|p| r.iter().zip(p).map(|(a, b)| a * b).sum()).collect())
            .collect()
    }

    /// Largest deviation of `E_u[y_j y_k]` from `δ_jk`.
    pub fn orthonormality_error(&self, ft: &FeatureTable) -> f64 {
        let y = self.evaluate(ft);
        let m = ft.n_points() as f64;
        let mut err: f64 = 0.0;
        for (j, yj) in y.iter().enumerate() {
            for (k, yk) in y.iter().enumerate() {
                let dot: f64 = yj.iter().zip(yk).map(|(a, b)| a * b).sum::<f64>() / m;
                err = err.max((dot - if j == k { 1.0 } else { 0.0 }).abs());
            }
        }
        err
    }
}

/// Solves `D r = β² G r` on the numerical range of `G` by whitening.
///
/// Coefficient directions in the null space of `G` leave every eigentask
/// unchanged on the grid but do change its shot noise, so they are eliminated
/// first: `D` is replaced by its Schur complement
/// `D_RR − D_RN D_NN⁺ D_NR`, the least noise any coefficient vector
/// reproducing a given function can have. This makes `β` independent of the
/// feature basis.
pub fn eigentasks(g: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<EigentaskSet> {
    if !g.is_square() || g.shape() != d.shape() {
        return Err(Error::Dimension(format!("G is {:?}, D is {:?}", g.shape(), d.shape())));
    }
    let (lambda, u) = sym_eig(g);
    let sigma: Vec<f64> = lambda.iter().map(|l| l.max(0.0).sqrt()).collect();
    Ok(whitened(&u, &sigma, d))
}

/// Eigentasks of a feature table's own moments.
///
/// Whitens with the singular values of the `M × K` feature matrix rather than
/// the eigenvalues of `G`, which keeps weak high-frequency components
/// resolvable and the eigentasks orthonormal to near machine precision.
pub fn analyze(ft: &FeatureTable) -> Result<EigentaskSet> {
    let d = shot_noise_moment(ft);
    if ft.n_points() < ft.k_count() {
        return eigentasks(&second_moment(ft), &d);
    }
    let scale = 1.0 / (ft.n_points() as f64).sqrt();
    let x = DMatrix::from_fn(ft.n_points(), ft.k_count(), |i, k| ft.columns()[i][k] * scale);
    let svd = x.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    Ok(whitened(&v_t.transpose(), svd.singular_values.as_slice(), &d))
}

/// `basis` holds an orthonormal basis of coefficient space in its columns,
/// `sigma` the square roots of `G`'s eigenvalues along them.
fn whitened(basis: &DMatrix<f64>, sigma: &[f64], d: &DMatrix<f64>) -> EigentaskSet {
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    if !(smax > 0.0) {
        return EigentaskSet { betas: Vec::new(), coeffs: Vec::new(), rank: 0 };
    }
    let cut = RANK_THRESHOLD.sqrt() * smax;
    let (kept, null): (Vec<usize>, Vec<usize>) = (0..sigma.len()).partition(|&i| sigma[i] > cut);
    let u_r = basis.select_columns(&kept);
    let u_n = basis.select_columns(&null);
    let d_rr = u_r.transpose() * d * &u_r;
    let d_nr = u_n.transpose() * d * &u_r;
    // Noise-minimizing null-space component: v = −D_NN⁺ D_NR a.
    let correction = -pseudo_inverse(&(u_n.transpose() * d * &u_n)) * &d_nr;
    let d_eff = &d_rr + d_nr.transpose() * &correction;
    let inv_sigma = DMatrix::from_diagonal(&DVector::from_iterator(kept.len(), kept.iter().map(|&i| 1.0 / sigma[i])));
    let (beta_sq, q) = sym_eig(&(&inv_sigma * d_eff * &inv_sigma));
    let a = &inv_sigma * q;
    let coeff_mat = &u_r * &a + &u_n * (&correction * &a);
    let coeffs = (0..kept.len())
        .map(|c| {
            let mut v: Vec<f64> = coeff_mat.column(c).iter().copied().collect();
            let pivot = v.iter().copied().fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m });
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    EigentaskSet { betas: beta_sq.iter().map(|b| b.max(0.0).sqrt()).collect(), coeffs, rank: kept.len() }
}

/// Symmetric pseudo-inverse; eigenvalues below `1e-12` of the largest count as zero.
fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return m.clone();
    }
    let (vals, vecs) = sym_eig(m);
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let inv: Vec<f64> = vals.iter().map(|&v| if top > 0.0 && v > 1e-12 * top { 1.0 / v } else { 0.0 }).collect();
    &vecs * DMatrix::from_diagonal(&DVector::from_vec(inv)) * vecs.transpose()
}

/// The `S → ∞` REC: the number of retained eigentasks.
pub fn rec_infinite(es: &EigentaskSet) -> f64 {
    es.rank as f64
}

/// `C_T(S) = Σ_k 1/(1 + β_k²/S)`.
pub fn rec_finite(es: &EigentaskSet, shots: Shots) -> f64 {
    match shots {
        Shots::Infinite => rec_infinite(es),
        Shots::Finite(s) => {
            let s = s as f64;
            es.betas.iter().map(|b| if b.is_finite() { 1.0 / (1.0 + b * b / s) } else { 0.0 }).sum()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::RotationAxis;
    use crate::circuits::{build_ansatz, encoding_layer, AnsatzId, Circuit, ReservoirUnitary};
    use crate::expressivity::{feature_table, fourier_fit, uniform_grid};
    use crate::rng;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use std::f64::consts::TAU;

    fn circuit6_table(r: usize, seed: u64, grid: usize) -> FeatureTable {
        let mut g = rng::seeded(seed);
        let axes: Vec<RotationAxis> = (0..r).map(|_| RotationAxis::sample(&mut g)).collect();
        let ansatz = build_ansatz(AnsatzId::new(6).unwrap(), 4).unwrap();
        let params: Vec<f64> = (0..ansatz.n_params()).map(|_| g.random_range(0.0..TAU)).collect();
        let res = ReservoirUnitary::from_circuit(&ansatz, &params).unwrap();
        feature_table(&encoding_layer(4, r, &axes).unwrap(), &res, &[], &uniform_grid(grid)).unwrap()
    }

    fn min_eig(m: &DMatrix<f64>) -> f64 {
        sym_eig(m).0[0]
    }

    #[test]
    fn constant_features() {
        let ft = feature_table(&Circuit::empty(2), &ReservoirUnitary::identity(2), &[], &uniform_grid(20)).unwrap();
        let g = second_moment(&ft);
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g.iter().filter(|v| **v != 0.0).count(), 1);
        assert!(shot_noise_moment(&ft).iter().all(|v| *v == 0.0));
        let es = analyze(&ft).unwrap();
        assert_eq!(es.rank, 1);
        assert_eq!(es.betas, vec![0.0]);
        let y = es.evaluate(&ft);
        assert!(y[0].iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn bernoulli_covariance() {
        let ft = FeatureTable::new(vec![0.0], vec![vec![0.5, 0.5]]).unwrap();
        let d = shot_noise_moment(&ft);
        assert_eq!(d, DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]));
    }

    #[test]
    fn moments_are_psd_and_d_kills_ones() {
        for seed in 0..5 {
            let ft = circuit6_table(3, seed, 60);
            let g = second_moment(&ft);
            let d = shot_noise_moment(&ft);
            assert!(min_eig(&g) > -1e-12);
            assert!(min_eig(&d) > -1e-12);
            assert!((&d * DMatrix::from_element(16, 1, 1.0)).amax() < 1e-12);
            assert_eq!(g, g.transpose());
        }
    }

    #[test]
    fn one_encode_entangled_has_three_eigentasks() {
        let ft = circuit6_table(1, 11, 200);
        let es = analyze(&ft).unwrap();
        assert_eq!(es.rank, 3);
        assert!(es.orthonormality_error(&ft) < 1e-8);
        assert!(es.betas.windows(2).all(|w| w[0] <= w[1]));
        assert!(es.beta_squared()[0] < 1e-10);
    }

    #[test]
    fn ranks_follow_the_bound() {
        for r in 1..=8 {
            let ft = circuit6_table(r, 100 + r as u64, 200);
            let es = analyze(&ft).unwrap();
            assert_eq!(es.rank, (2 * r + 1).min(16), "r = {r}");
            assert!(es.orthonormality_error(&ft) < 1e-8, "r = {r}");
        }
    }

    #[test]
    fn finite_shot_formula() {
        let es = EigentaskSet { betas: vec![0.0, 0.0], coeffs: vec![vec![], vec![]], rank: 2 };
        assert_eq!(rec_finite(&es, Shots::Finite(1)), 2.0);
        let es = EigentaskSet { betas: vec![10.0], coeffs: vec![vec![]], rank: 1 };
        assert_eq!(rec_finite(&es, Shots::Finite(100)), 0.5);
        let es = EigentaskSet { betas: vec![f64::INFINITY], coeffs: vec![vec![]], rank: 1 };
        assert_eq!(rec_finite(&es, Shots::Finite(100)), 0.0);
        assert_eq!(rec_finite(&es, Shots::Infinite), 1.0);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(eigentasks(&DMatrix::identity(3, 3), &DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn product_state_rec() {
        let grid = uniform_grid(200);
        let ft = feature_table(&encoding_layer(4, 1, &[RotationAxis::x()]).unwrap(), &ReservoirUnitary::identity(4), &[], &grid)
            .unwrap();
        assert_eq!(rec_infinite(&analyze(&ft).unwrap()), 2.0);
        assert!(fourier_fit(&ft, 1).unwrap().max_residual < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn finite_rec_is_monotone_and_capped(seed in any::<u64>(), r in 1usize..=8, s in 1u64..100_000) {
            let es = analyze(&circuit6_table(r, seed, 80)).unwrap();
            let lo = rec_finite(&es, Shots::Finite(s));
            let hi = rec_finite(&es, Shots::Finite(10 * s));
            prop_assert!(lo <= hi + 1e-12);
            prop_assert!(hi <= rec_infinite(&es) + 1e-12);
            prop_assert!(lo >= 0.0);
            prop_assert!(rec_infinite(&es) <= super::super::rec_upper_bound(r, 16) as f64);
        }

        #[test]
        fn invariant_under_relabelling(seed in any::<u64>(), r in 1usize..=6) {
            let ft = circuit6_table(r, seed, 60);
            let es = analyze(&ft).unwrap();
            let mut g = rng::seeded(seed ^ 1);
            let mut perm: Vec<usize> = (0..16).collect();
            perm.shuffle(&mut g);
            let mut order: Vec<usize> = (0..60).collect();
            order.shuffle(&mut g);
            let permuted = analyze(&ft.permute_outcomes(&perm).unwrap()).unwrap();
            let reordered = analyze(&ft.reorder_grid(&order).unwrap()).unwrap();
            prop_assert_eq!(permuted.rank, es.rank);
            prop_assert_eq!(reordered.rank, es.rank);
            for (a, b) in es.beta_squared().iter().zip(permuted.beta_squared()) {
                prop_assert!((a - b).abs() < 1e-6 * (1.0 + a), "{} vs {}", a, b);
            }
        }

        #[test]
        fn betas_ignore_feature_mixing(seed in any::<u64>(), r in 1usize..=8) {
            let ft = circuit6_table(r, seed, 80);
            let g = second_moment(&ft);
            let d = shot_noise_moment(&ft);
            let mut rg = rng::seeded(seed ^ 7);
            // Identity plus a small random part keeps the mixing well conditioned.
            let m = DMatrix::<f64>::identity(16, 16) + DMatrix::from_fn(16, 16, |_, _| rg.random_range(-0.1..0.1));
            let base = eigentasks(&g, &d).unwrap();
            let mixed = eigentasks(&(&m * &g * m.transpose()), &(&m * &d * m.transpose())).unwrap();
            prop_assert_eq!(base.rank, mixed.rank);
            // Components with β² beyond 1e8 are conditioned by G's smallest
            // eigenvalues and contribute < 1e-4 to the REC below 10⁴ shots.
            for (a, b) in base.beta_squared().iter().zip(mixed.beta_squared()) {
                if *a < 1e8 {
                    prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a), "{} vs {}", a, b);
                } else {
                    prop_assert!(b > 1e7);
                }
            }
        }
    }
}
