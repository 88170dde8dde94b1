//! Drives a 3-qubit TFIM reservoir with random inputs through the channel
//! pipeline and the gate pipeline and compares the σ_z readouts.

use qrc_expressivity::experiments::{compute_dynamics, ExperimentConfig};

fn main() -> qrc_expressivity::Result<()> {
    let cfg = ExperimentConfig::default();
    let res = compute_dynamics(&cfg)?;
    println!("couplings:\n{}", res.tfim.couplings.to_json()?);
    let p = &res.physical;
    for i in (0..p.n_readouts()).step_by(cfg.dynamics.v_mux * 10) {
        println!("t = {:6.2}  step {:3}  sigma_z = {:?}", p.times[i], p.input_step[i], p.sigma_z[i]);
    }
    println!("{} readouts, max |physical - gate| = {:.2e}", p.n_readouts(), res.max_deviation);
    Ok(())
}
