use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("norm weights must be strictly positive (weight[{index}] = {value})")]
    NonpositiveWeight { index: usize, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("modulus bracket never reached delta = {delta} (max b tried = {b_hi})")]
    NoMassAtDelta { delta: f64, b_hi: f64 },

    #[error("degenerate modulus: all hinge weights are zero")]
    DegenerateModulus,

    #[error("no design point activates at delta = {delta}")]
    AllZeroWeights { delta: f64 },

    #[error("solver failed to converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("smoother degrees of freedom degenerate: n - 2nu1 + nu2 = {dof}")]
    DegenerateDof { dof: f64 },

    #[error("duplicate points with conflicting values at index {first} and {second}")]
    ConflictingValues { first: usize, second: usize },

    #[error("class ladder is not nested on this design: {0}")]
    NestingViolation(String),

    #[error("all {levels} ladder levels failed: {last_error}")]
    AllLevelsFailed { levels: usize, last_error: String },
}

pub type Result<T> = std::result::Result<T, Error>;
