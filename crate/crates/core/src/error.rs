use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("eigensolver did not converge after {iterations} iterations (estimate {estimate}, relative residual {residual:e})")]
    EigNotConverged {
        estimate: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged {
        best: Vec<f64>,
        residual: f64,
        iterations: usize,
    },

    #[error("conjugate gradient breakdown at iteration {iteration}: operator is not positive definite")]
    CgBreakdown { iteration: usize },

    #[error("circuit needs {needed} qubits but the dense realization limit is {limit}")]
    QubitBudget { needed: usize, limit: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("block mismatch at ({row}, {col}): expected {expected}, got {actual} (max error {max_error:e})")]
    BlockMismatch {
        row: usize,
        col: usize,
        expected: f64,
        actual: f64,
        max_error: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
