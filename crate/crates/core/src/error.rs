use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building devices or evaluating probabilities.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension {0} (must be between 1 and {max})", max = crate::operator::MAX_DIM)]
    InvalidDimension(usize),
    #[error("matrix is not square: row {row} has {found} entries, expected {expected}")]
    RaggedMatrix { row: usize, expected: usize, found: usize },
    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (defect {0:e})")]
    NotUnitary(f64),
    #[error("Hermitian eigensolver did not converge")]
    EigenFailure,
    #[error("operator {label:?} is not non-negative definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { label: String, min_eigenvalue: f64 },
    #[error("device has no operators")]
    EmptyDevice,
    #[error("device operators sum to zero (trace {0:e})")]
    ZeroTotal(f64),
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("label {0:?} is reserved for the null measurement outcome")]
    ReservedLabel(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("operator {0:?} has zero trace")]
    ZeroTraceOperator(String),
    #[error("expected a {expected} device")]
    WrongRole { expected: &'static str },
    #[error("device operator sum is not proportional to the identity (defect {0:e})")]
    BiasedDevice(f64),
    #[error("not a density operator: {0}")]
    NotDensity(String),
    #[error("not a probability operator measure: {0}")]
    NotPom(String),
    #[error("device pair never produces a combined event (Tr(ΛΓ) = {0:e})")]
    DegeneratePair(f64),
    #[error("trace {value:e} is negative beyond rounding; a non-PSD operator escaped validation")]
    InternalNumerical { value: f64 },
    #[error("basis is not orthonormal (defect {0:e})")]
    NotOrthonormal(f64),
    #[error("scenario is degenerate: {0}")]
    DegenerateScenario(String),
    #[error("time tags out of order: t_p = {t_p} > t_m = {t_m}")]
    TimeOrder { t_p: f64, t_m: f64 },
    #[error("number of trials must be at least 1")]
    NoTrials,
    #[error("every trial was discarded as a null outcome")]
    EmptyKeptSet,
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
