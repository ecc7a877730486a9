use thiserror::Error;

use crate::qasm::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {0} outside 1..={max}", max = crate::state::MAX_QUBITS)]
    QubitCount(usize),
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitIndex { index: usize, n_qubits: usize },
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("gate `{gate}`: {message}")]
    GateParameter { gate: String, message: String },
    #[error("control and target are both qubit {0}")]
    ControlIsTarget(usize),
    #[error("gate `{0}` cannot carry a control qubit")]
    NotControllable(String),
    #[error("state is not normalised (norm² = {0})")]
    NotNormalized(f64),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("shot count must be at least 1")]
    ZeroShots,
    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("solver did not converge after {iterations} iterations (residual step {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Parse(#[from] ParseError),
}
