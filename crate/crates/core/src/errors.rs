use thiserror::Error;

/// Errors produced by the lattice-rule library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported smoothness alpha = {0}; only 1, 2 and 3 are available")]
    UnsupportedSmoothness(u32),

    #[error("invalid space parameters: {0}")]
    InvalidParams(String),

    #[error("{name} = {value} outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("budget n = {0} is too small; need n >= 4")]
    BudgetTooSmall(u64),

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("{g} is not a primitive root modulo {p}")]
    InvalidRoot { g: u64, p: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "cached pair tables need about {required} bytes but the budget is {budget} bytes; \
         use streaming mode instead"
    )]
    Capacity { required: u64, budget: u64 },

    #[error("sequencing error: {0}")]
    Sequencing(String),

    #[error("rejection sampling gave up after {tries} draws for p = {p}")]
    SamplingFailure { p: u64, tries: u64 },

    #[error("validation error: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
