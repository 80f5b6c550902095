use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("position {x} lies outside the domain [{min}, {max}]")]
    Domain { x: f64, min: f64, max: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("CFL number {cfl} exceeds the limit {limit}")]
    Cfl { cfl: f64, limit: f64 },

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("no shock found at t = {t}")]
    NoShockFound { t: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("all paths were censored before the first output time")]
    EmptyEstimate,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
