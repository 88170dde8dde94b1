//! Simulation and expressivity analysis for quantum reservoir computers.
//!
//! The crate covers two pipelines that share one set of dense linear-algebra
//! primitives:
//!
//! * **Dynamics.** A transverse-field Ising reservoir driven by a scalar input
//!   sequence, simulated once as a sequence of CPTP maps on a density matrix
//!   ([`reservoir::run_physical`]) and once as a gate-model circuit
//!   ([`reservoir::run_gate_model`]). Both produce the same `<σ_z>` traces.
//! * **Expressivity.** One cycle of input encoding followed by a reservoir
//!   unitary, read out through the full computational-basis POVM. From the
//!   resulting feature table the crate computes eigentasks and the resolvable
//!   expressive capacity (REC), at infinite and finite shot counts, and checks
//!   it against the `min(2r + 1, 2^N)` ceiling set by `r` single-qubit encoding
//!   rotations.
//!
//! Qubit 0 is the leftmost tensor factor everywhere in this crate, i.e. the
//! most significant bit of a computational-basis index.
//!
//! The `examples/` directory has one runnable program per capability; the
//! `qrc` binary wraps the figure-reproduction experiments in [`experiments`].

pub mod channels;
pub mod circuits;
pub mod error;
pub mod experiments;
pub mod expressivity;
pub mod linalg;
pub mod optimize;
pub mod reservoir;
pub mod rng;
pub mod tfim;

pub use error::{Error, Result};
pub use num_complex::Complex64;
