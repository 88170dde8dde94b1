//! REC against the number of encoding gates for the identity, circuit 6 and
//! TFIM reservoirs (4 qubits, infinite shots).

use qrc_expressivity::experiments::{compute_rec_vs_encodes, ExperimentConfig};

fn main() -> qrc_expressivity::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.expressivity.axis_realizations = 10;
    let res = compute_rec_vs_encodes(&cfg)?;
    println!("{:>2} {:>10} {:>8} {:>6} {:>6}", "r", "reservoir", "mean", "std", "bound");
    for row in &res.rows {
        println!("{:>2} {:>10} {:>8.3} {:>6.3} {:>6}", row.r, row.reservoir, row.mean, row.std, row.bound);
    }
    Ok(())
}
