use crate::prelude::*;

/// Errors raised by the simulation engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid Pauli letter {0:?}")]
    InvalidLetter(char),

    #[error("Pauli word has {found} letters, expected {expected}")]
    WordLength { expected: usize, found: usize },

    #[error("at most {max} qubits are supported, got {found}")]
    TooManyQubits { max: usize, found: usize },

    #[error("non-finite coefficient")]
    NonFinite,

    #[error("operator is not Hermitian (largest imaginary residue {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("{n_qubits} qubits exceeds the dense cap of {cap}")]
    DenseCapExceeded { n_qubits: usize, cap: usize },

    #[error("qubit count mismatch: expected {expected}, found {found}")]
    QubitCountMismatch { expected: usize, found: usize },

    #[error("qubit {qubit} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },

    #[error("qubit {0} is used both as a control and a target")]
    ControlCollision(usize),

    #[error("expected {expected} parameters, found {found}")]
    ParameterCount { expected: usize, found: usize },

    #[error("invalid quadrature: {0}")]
    InvalidQuadrature(String),

    #[error("shift precondition violated: V - xI has eigenvalue {max_eigenvalue:e} > 0")]
    ShiftViolated { max_eigenvalue: f64 },

    #[error("circuit structures do not match at gate {index}: {reason}")]
    StructureMismatch { index: usize, reason: String },

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("shot count must be positive")]
    NoShots,

    #[error("calibration matrix for qubit {qubit} is singular")]
    SingularCalibration { qubit: usize },

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;
