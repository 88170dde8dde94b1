//! Features of r encoding gates are trigonometric polynomials of degree r:
//! fitting at degree r is exact, one degree less is not.

use qrc_expressivity::channels::RotationAxis;
use qrc_expressivity::circuits::{build_ansatz, encoding_layer, AnsatzId, ReservoirUnitary};
use qrc_expressivity::expressivity::{feature_table, fourier_fit, fourier_rank, uniform_grid};
use qrc_expressivity::rng;
use rand::Rng;

fn main() -> qrc_expressivity::Result<()> {
    let mut g = rng::seeded(5);
    let ansatz = build_ansatz(AnsatzId::new(6)?, 4)?;
    for r in 1..=8 {
        let axes: Vec<RotationAxis> = (0..r).map(|_| RotationAxis::sample(&mut g)).collect();
        let params: Vec<f64> = (0..ansatz.n_params()).map(|_| g.random_range(0.0..std::f64::consts::TAU)).collect();
        let res = ReservoirUnitary::from_circuit(&ansatz, &params)?;
        let ft = feature_table(&encoding_layer(4, r, &axes)?, &res, &[], &uniform_grid(200))?;
        let exact = fourier_fit(&ft, r)?.max_residual;
        let under = fourier_fit(&ft, r - 1)?.max_residual;
        println!("r={r}  residual(deg r) {exact:.1e}  residual(deg r-1) {under:.1e}  rank {}", fourier_rank(&ft, r + 2, 1e-9)?);
    }
    Ok(())
}
