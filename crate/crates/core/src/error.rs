use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("value {value} outside the domain {domain}")]
    Domain { value: f64, domain: String },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("degenerate bid support")]
    DegenerateSupport,
    #[error("need at least three observations")]
    TooFewObservations,
    #[error("empty neighborhood: kernel weights vanish at the evaluation point")]
    EmptyNeighborhood,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("all variance estimates on the grid are zero")]
    ZeroVariance,
    #[error("data error: {0}")]
    Data(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
