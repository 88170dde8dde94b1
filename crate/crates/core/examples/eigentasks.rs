//! The three eigentasks of a single encoding gate followed by circuit 6.

use qrc_expressivity::experiments::{compute_eigentasks, ExperimentConfig};

fn main() -> qrc_expressivity::Result<()> {
    let res = compute_eigentasks(&ExperimentConfig::default())?;
    println!("rank {}  betas {:?}", res.eigentasks.rank, res.eigentasks.betas);
    let grid = res.table.u_grid();
    for i in (0..grid.len()).step_by(25) {
        let ys: Vec<String> = res.curves.iter().map(|c| format!("{:+.4}", c[i])).collect();
        println!("u = {:.3}  {}", grid[i], ys.join("  "));
    }
    println!("fit residual against {{1, cos u, sin u}}: {:.1e}", res.fit_residual);
    Ok(())
}
