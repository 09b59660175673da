use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("vector has (near) zero norm and no direction")]
    ZeroVector,
    #[error("need at least {needed} base classes, got {got}")]
    TooFewClasses { needed: usize, got: usize },
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("memory holds no novel prototypes")]
    NoNovelPrototypes,
    #[error("candidate index {index} out of range for {len} prototypes")]
    BadCandidate { index: usize, len: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid support set: {0}")]
    InvalidSupport(String),
    #[error("benchmark spec infeasible: {0}")]
    SpecInfeasible(String),
}
