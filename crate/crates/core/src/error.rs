use thiserror::Error;

/// Errors raised by the simulation and recovery pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("angle {0} rad is outside the open interval (0, pi)")]
    AngleOutOfRange(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible scene configuration: {0}")]
    Infeasible(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("under-detection: {found} peaks for {expected} users")]
    UnderDetection { found: usize, expected: usize },

    #[error("clustering produced an empty cluster (index {0})")]
    EmptyCluster(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),
}

pub type Result<T> = std::result::Result<T, Error>;
