use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed tree file: {0}")]
    Syntax(#[from] serde_json::Error),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("trees have different heights ({0} vs {1})")]
    HeightMismatch(usize, usize),

    #[error("invalid marginal: {0}")]
    InvalidMarginal(String),

    #[error("non-finite cost entry at ({0}, {1})")]
    NonFiniteCost(usize, usize),

    #[error("regularization parameter must be positive, got {0}")]
    NonPositiveLambda(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The Gibbs kernel underflowed to zero along a whole row or column; the
    /// log-domain iteration handles this case.
    #[error("kernel underflow in {0}; use the stabilized iteration")]
    KernelUnderflow(String),

    #[error("linear program failed: {0}")]
    LpFailure(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("instance too large: {pairs} leaf pairs exceeds cap {cap}")]
    TooLarge { pairs: usize, cap: usize },

    #[error("result did not converge: {0}")]
    Unconverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
