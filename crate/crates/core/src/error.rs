use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum GsmError {
    #[error("binomial coefficient C({n}, {k}) does not fit in 64 bits")]
    BinomialOverflow { n: usize, k: usize },
    #[error("combinadic rank does not fit in 64 bits")]
    RankOverflow,
    #[error("combination must be non-empty")]
    EmptyCombination,
    #[error("combination {0:?} is not strictly increasing")]
    NotIncreasing(Vec<usize>),
    #[error("antenna index {index} out of range for {n} antennas")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("value {value} does not fit in {width} bits")]
    WidthTooSmall { value: u64, width: usize },
    #[error("bit block of length {0} exceeds 64 bits")]
    TooManyBits(usize),
    #[error("invalid bit character {0:?}")]
    BadBit(char),
    #[error("expected {expected} entries, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("activation pattern rank {rank} is outside the allowed set of {allowed} patterns")]
    PatternNotAllowed { rank: u64, allowed: u64 },
    #[error("entry {antenna} is not a constellation point")]
    MalformedSymbol { antenna: usize },
    #[error("vector has {got} nonzero entries, expected {expected}")]
    BadSupport { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("target BER {target:e} unreachable in [{lo}, {hi}] dB")]
    TargetUnreachable { target: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("config file: {0}")]
    ConfigFile(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Infeasible,
    Runtime,
}

impl GsmError {
    pub fn class(&self) -> ErrorClass {
        match self {
            GsmError::Infeasible(_)
            | GsmError::TargetUnreachable { .. }
            | GsmError::BinomialOverflow { .. }
            | GsmError::RankOverflow => ErrorClass::Infeasible,
            GsmError::NotPositiveDefinite { .. } => ErrorClass::Runtime,
            GsmError::Io(_) | GsmError::Csv(_) => ErrorClass::Runtime,
            _ => ErrorClass::Usage,
        }
    }
}

pub type Result<T, E = GsmError> = std::result::Result<T, E>;
