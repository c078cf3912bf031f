use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid population: {0}")]
    Population(String),
    #[error("invalid assignment: {0}")]
    Assignment(String),
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("composition vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("composition vector is infeasible for this population: {0}")]
    Infeasible(String),
    #[error("group size {group_size} does not divide population size {n}")]
    Indivisible { n: usize, group_size: usize },
    #[error("cell (attribute {}, peer set {}) is undefined: {reason}", .attr + 1, .treatment + 1)]
    /// `attr` and `treatment` are 0-based; the message shows them 1-based.
    UndefinedCell { attr: usize, treatment: usize, reason: &'static str },
    #[error("contrast compares treatment {0} with itself")]
    DegenerateContrast(usize),
    #[error("variance must be non-negative, got {0}")]
    NegativeVariance(f64),
    #[error("level alpha must lie in (0, 1), got {0}")]
    Alpha(f64),
    #[error("enumeration would visit {count} assignments, above the cap of {cap}")]
    CapExceeded { count: String, cap: u64 },
    #[error("covariance matrix is not positive semidefinite (min eigenvalue {0})")]
    NotPsd(f64),
    #[error("{0}")]
    Invalid(String),
}
