//! Chains random reset-encodings, dephasings and unitaries on a 3-qubit
//! density matrix and tracks the worst CPTP violation.

use qrc_expressivity::channels::{apply_unitary, dephase_qubit, reset_encode, validate_cptp, DephasingParams};
use qrc_expressivity::linalg::DensityMatrix;
use qrc_expressivity::rng;
use qrc_expressivity::tfim::{Tfim, TfimSpec};
use rand::Rng;

fn main() -> qrc_expressivity::Result<()> {
    let mut g = rng::seeded(7);
    let u = Tfim::sample(TfimSpec::new(3, 1.0, 1.0, 2)?)?.propagator(0.75)?;
    let mut rho = DensityMatrix::haar_random(3, &mut g);
    let mut worst: f64 = 0.0;
    for step in 1..=10_000 {
        let q = g.random_range(0..3);
        rho = match g.random_range(0..3) {
            0 => apply_unitary(&rho, &u)?,
            1 => dephase_qubit(&rho, &DephasingParams::new(g.random_range(0.0..1.0), 0.75)?, q)?,
            _ => reset_encode(&rho, g.random_range(0.0..=1.0), q)?,
        };
        worst = worst.max(validate_cptp(&rho).max_violation());
        if step % 2_000 == 0 {
            println!("step {step:5}  worst violation so far {worst:.2e}");
        }
    }
    Ok(())
}
