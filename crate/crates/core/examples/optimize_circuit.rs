//! Maximizes finite-shot REC of one template over its rotation angles with
//! restarted Nelder-Mead, starting from random parameter draws.

use qrc_expressivity::channels::RotationAxis;
use qrc_expressivity::circuits::{build_ansatz, AnsatzId};
use qrc_expressivity::expressivity::{uniform_grid, Shots};
use qrc_expressivity::optimize::{optimize_circuit, OptConfig, RecObjective};
use qrc_expressivity::rng;

fn main() -> qrc_expressivity::Result<()> {
    let mut g = rng::seeded(11);
    let axes: Vec<RotationAxis> = (0..8).map(|_| RotationAxis::sample(&mut g)).collect();
    let ansatz = build_ansatz(AnsatzId::new(3)?, 4)?;
    let objective = RecObjective::new(ansatz, &axes, &uniform_grid(200), Shots::Finite(10_000))?;
    let cfg = OptConfig { budget: 400, restarts: 4, seed: 3, ..OptConfig::default() };
    let res = optimize_circuit(&objective, None, &cfg)?;
    println!("{} parameters", objective.n_params());
    println!("best of initial draws: {:.4}", res.initial_best);
    println!("optimized:             {:.4}", res.best_value);
    for e in res.history.iter().step_by(50) {
        println!("eval {:4} restart {:2} rec {:.4} best {:.4}", e.eval, e.restart, e.value, e.best_so_far);
    }
    Ok(())
}
