use thiserror::Error;

/// Errors raised by operator validation, circuit evaluation, noise handling
/// and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("not Hermitian: max |A - A^dagger| = {max_dev:.3e} at entry ({row}, {col})")]
    NotHermitian { max_dev: f64, row: usize, col: usize },

    #[error("not unitary: max |U^dagger U - I| = {0:.3e}")]
    NotUnitary(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parameter vector has length {found}, circuit expects {expected}")]
    ParameterLength { expected: usize, found: usize },

    #[error("non-finite parameter at index {0}")]
    NonFiniteParameter(usize),

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("perturbation level is singular for error probability {0} (requires p < 1)")]
    SingularPerturbation(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite {what} at iteration {iteration}")]
    Diverged { what: &'static str, iteration: usize },

    #[error("need at least 3 usable points for a slope fit, found {usable} ({excluded} degenerate)")]
    TooFewPoints { usable: usize, excluded: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
