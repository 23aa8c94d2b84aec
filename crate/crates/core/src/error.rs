use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate out of range [0,1) at row {row}, column {col}: {value}")]
    CoordinateOutOfRange { row: usize, col: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("generator {a} is not coprime to modulus {m}")]
    BadGenerator { m: u64, a: u64 },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("unsupported norm exponent q = {0}")]
    UnsupportedQ(f64),

    #[error("method {method} is incompatible with norms ({p1}, {p2})")]
    IncompatibleMethod { method: String, p1: String, p2: String },

    #[error("truncation too coarse: certified tail {tail:e} against sum {sum:e}")]
    TruncationTooCoarse { tail: f64, sum: f64 },

    #[error("empty shape family for volume {0}")]
    EmptyShapeFamily(f64),

    #[error("zero element: norming functional undefined")]
    ZeroElement,

    #[error("schedule violated at step {n}: best value {best:e} < -{eps:e}")]
    ScheduleViolated { n: usize, best: f64, eps: f64 },

    #[error("non-positive value {value} at index {index}")]
    NonPositiveValue { index: usize, value: f64 },
}

impl Error {
    /// Numerical guards map to exit code 3, everything else to 2.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::TooLarge(_)
                | Error::TruncationTooCoarse { .. }
                | Error::ZeroElement
                | Error::ScheduleViolated { .. }
                | Error::NonPositiveValue { .. }
        )
    }
}
