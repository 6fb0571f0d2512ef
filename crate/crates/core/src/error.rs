use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is singular over GF(2)")]
    SingularMatrix,
    #[error("kernel is not polarizing")]
    NotPolarizing,
    #[error("dimension {ell} exceeds the supported maximum {max}")]
    DimensionTooLarge { ell: usize, max: usize },
    #[error("value outside the operation domain: {0}")]
    DomainError(String),
    #[error("enumeration needs {required} leaves but the budget is {budget}")]
    BudgetExceeded { required: u128, budget: u64 },
    #[error("kernel assumption not met: {0}")]
    AssumptionUnmet(String),
    #[error("variance is zero, so the threshold offset is undefined")]
    DegenerateVariance,
    #[error("operation requires an exactly enumerated level")]
    RequiresExactCdf,
    #[error("mismatched levels: {0}")]
    MismatchedLevel(String),
    #[error("prefix depth {m} needs {required} leaves, budget is {budget}")]
    PrefixTooDeep { m: usize, required: u128, budget: u64 },
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: u64, max: u64 },
    #[error("frozen bit at channel index {index} is nonzero")]
    FrozenBitNonzero { index: u64 },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
