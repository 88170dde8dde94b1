//! Gate-level circuit IR, the ansatz template library, and the encoding layer.

mod ansatz;
mod ir;
mod sim;

pub use ansatz::{ansatz_description, build_ansatz, AnsatzId, ANSATZ_IDS};
pub use ir::{encoding_layer, Circuit, Gate, GateKind};
pub use sim::{apply_circuit, apply_gate, compile, gate_unitary, product_state, random_product_state, tfim_as_reservoir,
    zero_state, ReservoirUnitary};
