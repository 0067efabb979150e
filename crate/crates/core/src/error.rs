use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index {index} out of range for explicit radius list of length {len}")]
    IndexOutOfRange { index: u64, len: usize },

    #[error("critical exponent is undefined for a finite radius list")]
    UndefinedForFiniteSequence,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient depth: {0}")]
    InsufficientDepth(String),

    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),

    #[error("symbol {symbol} outside alphabet 1..={alphabet}")]
    InvalidSymbol { symbol: u32, alphabet: u32 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("grid of 2^{log2_cells} cells exceeds the 2^31 cell ceiling")]
    GridTooLarge { log2_cells: u64 },

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("requested level {level} exceeds grid level {grid_level}")]
    LevelExceedsGrid { level: u32, grid_level: u32 },
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numeric,
    Resource,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::GridTooLarge { .. } => ErrorClass::Resource,
            Error::Domain(_) | Error::NoRoot(_) | Error::UndefinedForFiniteSequence => {
                ErrorClass::Numeric
            }
            _ => ErrorClass::Config,
        }
    }
}
