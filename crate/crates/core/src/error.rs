use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("variable index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("jet truncation order must be at least 1")]
    InvalidCap,
    #[error("dimension or truncation mismatch: {0}")]
    DimensionMismatch(String),
    #[error("division by a series with zero constant term")]
    DivisionByZeroConstantTerm,
    #[error("logarithm of a series with non-positive constant term")]
    NonPositiveConstantTerm,
    #[error("exact logarithm requires constant term 1")]
    ExactLogOfNonUnit,
    #[error("integer power requires a non-negative integer exponent, got {0}")]
    InvalidExponent(i64),

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown parameter `{name}` at line {line}")]
    UnknownParameter { name: String, line: usize },
    #[error("duplicate outcome `{0}`")]
    DuplicateOutcome(String),
    #[error("exponent must be a non-negative integer literal (line {line}, column {column})")]
    NonIntegerExponent { line: usize, column: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("unknown outcome `{0}`")]
    UnknownOutcome(String),
    #[error("outcome `{0}` has zero probability at the realization point")]
    OutcomeOutsideSupport(String),

    #[error("random variables are defined on different supports")]
    SupportMismatch,
    #[error("basis random variables are linearly dependent")]
    BasisNotIndependent,

    #[error("model is not semi-regular at the realization point (Fisher information has rank 0)")]
    NotSemiRegular,
    #[error("vanishing-order search exceeded the cap of {0}")]
    CapExceeded(u32),

    #[error("G-function order {order} exceeds the supported maximum {max}")]
    OrderTooHigh { order: usize, max: usize },
    #[error("leading form disagrees with the K expansion at {index:?}")]
    MismatchDetected { index: Vec<u32> },

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("cannot factor the zero polynomial")]
    ZeroPolynomial,
    #[error("classification requires d = 2, got d = {0}")]
    WrongDimension(usize),
    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),
    #[error("inconsistent verifications: {0}")]
    InconsistentVerifications(String),

    #[error("all grid log-likelihoods are -inf")]
    GridUnderflow,
    #[error("free-energy quadrature supports d <= 3, got d = {0}")]
    DimensionTooHigh(usize),
    #[error("invalid free-energy configuration: {0}")]
    InvalidConfig(String),
}
