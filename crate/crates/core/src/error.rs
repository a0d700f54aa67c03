use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("tree order must be at least 2, got {0}")]
    InvalidOrder(usize),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("node index {index} out of range for a tree of {n_nodes} nodes")]
    IndexOutOfRange { index: usize, n_nodes: usize },
    #[error("duplicate node index {0} in support")]
    DuplicateIndex(usize),
    #[error("support does not contain the root")]
    MissingRoot,
    #[error("node {0} is in the support but its parent is not")]
    OrphanNode(usize),
    #[error("no rooted subtree of cardinality {k} exists in a tree of {n_nodes} nodes")]
    InfeasibleSparsity { k: usize, n_nodes: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{quantity} is undefined at rho = {rho}: {reason}")]
    OutOfDomain {
        quantity: &'static str,
        rho: f64,
        reason: String,
    },
    #[error("root bracket failed for {0}")]
    BracketFailure(&'static str),
    #[error("no sign change for {0} on the search interval")]
    NoSignChange(&'static str),
    #[error("denominator of the stability factor is not positive at rho = {0}")]
    DenominatorNonpositive(f64),
    #[error("submatrix on support is rank deficient")]
    RankDeficient,
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Failures of the numerics themselves, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BracketFailure(_)
                | Error::NoSignChange(_)
                | Error::DenominatorNonpositive(_)
                | Error::RankDeficient
        )
    }
}
