use thiserror::Error;

/// Errors produced by the simulator and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("input value {0} outside [0, 1]")]
    InputOutOfRange(f64),

    #[error("parameter vector has length {got}, circuit expects {expected}")]
    ParamLength { expected: usize, got: usize },

    #[error("unknown ansatz id {0} (implemented: 1..=19)")]
    UnknownAnsatz(u32),

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
