use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("model is not normalized: {0}")]
    ModelNotNormalized(String),

    #[error("operation requires a fully probabilistic model")]
    NotFullyProbabilistic,

    #[error("horizon must be at least 1")]
    HorizonZero,

    #[error("model contains a cycle; pass an explicit horizon")]
    CyclicModel,

    #[error("no kernel or input row for positive-probability history {0}")]
    MissingKernelRow(String),

    #[error("{what}: {count} items exceeds the size guard of {cap}")]
    SizeGuard {
        what: &'static str,
        count: String,
        cap: u64,
    },

    #[error("not a probability distribution (total mass {0})")]
    NotADistribution(f64),

    #[error("kernel row is not stochastic: {0}")]
    NonStochasticKernel(String),

    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    #[error("linear program is infeasible")]
    LpInfeasible,

    #[error("linear program is unbounded")]
    LpUnbounded,

    #[error("unknown example '{0}'")]
    UnknownExample(String),

    #[error("forced output '{symbol}' has probability 0 at step {step}")]
    ForcedOutputInvalid { step: usize, symbol: String },

    #[error("all message bits have been acknowledged")]
    MessageExhausted,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
