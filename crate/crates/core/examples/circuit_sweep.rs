//! Finite-shot REC over all ansatz templates and the TFIM at eight encodes.
//! Reduced sample counts; the CLI runs the full sweep.

use qrc_expressivity::experiments::{compute_sweep, ExperimentConfig};

fn main() -> qrc_expressivity::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.sweep.axis_realizations = 5;
    cfg.sweep.param_samples = 5;
    cfg.sweep.tfim_samples = 5;
    cfg.sweep.shots = vec![1_000, 10_000];
    let res = compute_sweep(&cfg, false)?;
    for row in &res.rows {
        let s = row.shots.map_or("inf".to_string(), |s| s.to_string());
        println!("{:>10} S={:>6}  {:6.3} +- {:.3}", row.circuit, s, row.mean, row.stderr);
    }
    Ok(())
}
