use thiserror::Error;

/// Errors produced by the collocation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Scheme order and problem order are incompatible.
    #[error("scheme order {scheme} does not match problem order {problem}")]
    OrderMismatch { scheme: usize, problem: usize },

    /// A function evaluation produced NaN or infinity.
    #[error("non-finite evaluation at index {index}")]
    NonFinite { index: usize },

    #[error("time {t} is outside the mesh span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    /// Joint errors require every coordinate to share the same unit.
    #[error("coordinates have different units: {0:?}")]
    UnitMismatch(Vec<String>),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}
