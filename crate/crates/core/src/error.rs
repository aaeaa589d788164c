use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("register of {requested} qubits exceeds the supported range 1..={max}")]
    Capacity { requested: usize, max: usize },

    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("cannot compose circuits on {left} and {right} qubits")]
    Composition { left: usize, right: usize },

    #[error("input component {index} = {value} is at the encoder domain boundary")]
    DomainBoundary { index: usize, value: f64 },

    #[error("input component {index} = {value} lies outside [-1, 1]")]
    Domain { index: usize, value: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("tape state error: {0}")]
    State(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),
}
