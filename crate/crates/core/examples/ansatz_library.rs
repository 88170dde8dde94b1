//! Lists the ansatz templates with their gate and parameter counts.

use qrc_expressivity::circuits::{ansatz_description, build_ansatz, AnsatzId, ANSATZ_IDS};

fn main() -> qrc_expressivity::Result<()> {
    for id in ANSATZ_IDS {
        let c = build_ansatz(AnsatzId::new(id)?, 4)?;
        let entanglers = c.gates().iter().filter(|g| g.kind.is_controlled()).count();
        println!(
            "{id:>2}: {:>2} gates, {:>2} params, {:>2} entanglers  {}",
            c.gates().len(),
            c.n_params(),
            entanglers,
            ansatz_description(id)?
        );
    }
    Ok(())
}
