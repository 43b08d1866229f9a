use thiserror::Error;

/// Errors raised while constructing or evaluating maps, schemes and measures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point {x} lies within {clearance:e} of the singular set")]
    SingularPoint { x: f64, clearance: f64 },

    #[error("point {x} is outside the phase space [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("root bracket [{lo}, {hi}] does not contain a sign change (values {f_lo}, {f_hi})")]
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("root solve did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("branch {index} is not onto the phase space (image [{lo}, {hi}])")]
    NotFullBranch { index: usize, lo: f64, hi: f64 },

    #[error("point {x} lies in a truncated cell (return time beyond n_max)")]
    TruncatedCell { x: f64 },

    #[error("level {level} is not below the return time {return_time}")]
    InvalidLevel { level: u32, return_time: u32 },

    #[error("exact-linear invariant measure requires a constant Jacobian on every cell (cell {cell})")]
    NonlinearJacobian { cell: usize },

    #[error("Ulam power iteration did not converge: last L1 increment {increment:e} after {iterations} iterations")]
    UlamNoConvergence { iterations: usize, increment: f64 },

    #[error("normalizer partial sums fail the Cauchy test: |S(n/2) - S(n)| = {gap:e} exceeds {bound:e}")]
    RhoDivergent { gap: f64, bound: f64 },

    #[error("truncation too coarse: tail mass {tail_mass} exceeds half of the base")]
    TruncationTooCoarse { tail_mass: f64 },

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
