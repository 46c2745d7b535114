use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("enumeration budget exceeded: {needed} candidate points > budget {budget}")]
    Budget { needed: u128, budget: u64 },

    #[error("precision exhausted: {0}")]
    Precision(String),

    #[error("division by a quantity that may be zero")]
    DivisionByZero,

    #[error("rational dependence: {0}")]
    RationalDependence(String),

    #[error("insufficient records: need at least {needed} past the cutoff, found {found}")]
    InsufficientRecords { needed: usize, found: usize },

    #[error("separation violated between points {r} and {s}")]
    Separation { r: usize, s: usize },

    #[error("certificate range insufficient: need |q| <= {needed}, certified to {certified}")]
    CertificateRange { needed: u64, certified: u64 },

    #[error("matrix file: {0}")]
    MatrixFile(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

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
