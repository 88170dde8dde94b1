//! Analytic finite-shot REC next to the estimate from sampled measurement
//! counts, for circuit 6 at eight encodes.

use qrc_expressivity::channels::RotationAxis;
use qrc_expressivity::circuits::{build_ansatz, encoding_layer, AnsatzId, ReservoirUnitary};
use qrc_expressivity::expressivity::{feature_table, rec_empirical, uniform_grid};
use qrc_expressivity::rng;
use rand::Rng;

fn main() -> qrc_expressivity::Result<()> {
    let mut g = rng::seeded(21);
    let axes: Vec<RotationAxis> = (0..8).map(|_| RotationAxis::sample(&mut g)).collect();
    let ansatz = build_ansatz(AnsatzId::new(6)?, 4)?;
    let params: Vec<f64> = (0..ansatz.n_params()).map(|_| g.random_range(0.0..std::f64::consts::TAU)).collect();
    let res = ReservoirUnitary::from_circuit(&ansatz, &params)?;
    let ft = feature_table(&encoding_layer(4, 8, &axes)?, &res, &[], &uniform_grid(200))?;
    let report = rec_empirical(&ft, &[100, 1_000, 10_000, 100_000], 4, "circuit6", 21, &axes)?;
    println!("infinite shots: {:.3}", report.rec_infinite);
    for (s, v) in &report.rec_finite {
        println!("S = {s:>6}: analytic {v:.3}  sampled {:.3}", report.rec_empirical[s]);
    }
    Ok(())
}
