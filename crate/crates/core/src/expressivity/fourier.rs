use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::features::FeatureTable;
use crate::error::{Error, Result};

/// Least-squares fit of every feature onto `{1, cos(ku), sin(ku) : k = 1..degree}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierFit {
    pub degree: usize,
    /// Largest absolute residual over the grid, per feature.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Per feature: `[c_0, a_1, b_1, …, a_d, b_d]` for `c_0 + Σ a_k cos(ku) + b_k sin(ku)`.
    pub coefficients: Vec<Vec<f64>>,
}

fn basis(u_grid: &[f64], degree: usize) -> DMatrix<f64> {
    DMatrix::from_fn(u_grid.len(), 2 * degree + 1, |i, j| {
        let u = u_grid[i];
        match j {
            0 => 1.0,
            j if j % 2 == 1 => (((j + 1) / 2) as f64 * u).cos(),
            j => ((j / 2) as f64 * u).sin(),
        }
    })
}

pub fn fourier_fit(ft: &FeatureTable, degree: usize) -> Result<FourierFit> {
    if 2 * degree + 1 > ft.n_points() {
        return Err(Error::Dimension(format!("degree {degree} needs more than {} grid points", ft.n_points())));
    }
    let b = basis(ft.u_grid(), degree);
    let svd = b.clone().svd(true, true);
    let mut residuals = Vec::with_capacity(ft.k_count());
    let mut coefficients = Vec::with_capacity(ft.k_count());
    for k in 0..ft.k_count() {
        let y = DVector::from_vec(ft.feature(k));
        let c = svd.solve(&y, 1e-13).map_err(|e| Error::Dimension(e.to_string()))?;
        residuals.push((&y - &b * &c).amax());
        coefficients.push(c.iter().copied().collect());
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(FourierFit { degree, residuals, max_residual, coefficients })
}

/// Largest absolute residual of `values` against the degree-`degree` trigonometric fit.
pub fn trig_fit_residual(u_grid: &[f64], values: &[f64], degree: usize) -> Result<f64> {
    if u_grid.len() != values.len() || 2 * degree + 1 > u_grid.len() {
        return Err(Error::Dimension(format!("{} values on {} points at degree {degree}", values.len(), u_grid.len())));
    }
    let b = basis(u_grid, degree);
    let y = DVector::from_column_slice(values);
    let c = b.clone().svd(true, true).solve(&y, 1e-13).map_err(|e| Error::Dimension(e.to_string()))?;
    Ok((&y - &b * &c).amax())
}

/// Number of basis functions up to `max_degree` that carry a coefficient
/// above `tol` in at least one feature.
pub fn fourier_rank(ft: &FeatureTable, max_degree: usize, tol: f64) -> Result<usize> {
    let fit = fourier_fit(ft, max_degree)?;
    Ok((0..2 * max_degree + 1).filter(|&j| fit.coefficients.iter().any(|c| c[j].abs() > tol)).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::RotationAxis;
    use crate::circuits::{build_ansatz, encoding_layer, AnsatzId, Circuit, ReservoirUnitary};
    use crate::expressivity::{feature_table, uniform_grid};
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::TAU;

    fn table(id: u32, r: usize, seed: u64) -> FeatureTable {
        let mut g = rng::seeded(seed);
        let axes: Vec<RotationAxis> = (0..r).map(|_| RotationAxis::sample(&mut g)).collect();
        let ansatz = build_ansatz(AnsatzId::new(id).unwrap(), 4).unwrap();
        let params: Vec<f64> = (0..ansatz.n_params()).map(|_| g.random_range(0.0..TAU)).collect();
        let res = ReservoirUnitary::from_circuit(&ansatz, &params).unwrap();
        feature_table(&encoding_layer(4, r, &axes).unwrap(), &res, &[], &uniform_grid(200)).unwrap()
    }

    #[test]
    fn constant_feature_needs_only_dc() {
        let ft = feature_table(&Circuit::empty(2), &ReservoirUnitary::identity(2), &[], &uniform_grid(20)).unwrap();
        let fit = fourier_fit(&ft, 0).unwrap();
        assert!(fit.max_residual < 1e-15);
        assert!((fit.coefficients[0][0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_encode_is_degree_one() {
        let fit = fourier_fit(&table(6, 1, 3), 1).unwrap();
        assert!(fit.max_residual < 1e-10);
    }

    #[test]
    fn closed_form_coefficients() {
        let c = encoding_layer(1, 1, &[RotationAxis::x()]).unwrap();
        let ft = feature_table(&c, &ReservoirUnitary::identity(1), &[], &uniform_grid(16)).unwrap();
        let fit = fourier_fit(&ft, 1).unwrap();
        // cos²(u/2) = ½ + ½ cos u
        for (a, b) in fit.coefficients[0].iter().zip([0.5, 0.5, 0.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn under_fit_leaves_residual() {
        for r in 1..=8 {
            assert!(fourier_fit(&table(6, r, 40 + r as u64), r - 1).unwrap().max_residual > 1e-6, "r = {r}");
        }
    }

    #[test]
    fn too_few_points() {
        let ft = feature_table(&Circuit::empty(1), &ReservoirUnitary::identity(1), &[], &uniform_grid(4)).unwrap();
        assert!(fourier_fit(&ft, 2).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn features_are_band_limited(id in 1u32..=19, r in 1usize..=8, seed in any::<u64>()) {
            let ft = table(id, r, seed);
            prop_assert!(fourier_fit(&ft, r).unwrap().max_residual < 1e-8);
            prop_assert!(fourier_rank(&ft, r + 3, 1e-9).unwrap() <= 2 * r + 1);
        }
    }
}
