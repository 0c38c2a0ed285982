use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // field construction and arithmetic
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("modulus {0} is reducible over the prime field")]
    ReduciblePolynomial(String),
    #[error("unsupported field size {p}^{m} (limit is 2^16)")]
    UnsupportedSize { p: u64, m: u32 },
    #[error("invalid modulus: {0}")]
    InvalidModulus(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("element set is not a subfield: {0}")]
    NotASubfield(String),
    #[error("cannot parse field spec {spec:?}: {reason}")]
    BadFieldSpec { spec: String, reason: String },

    // matrices and kernels
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("computation budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("kernel size {ell} exceeds field size {q}")]
    SizeExceedsField { ell: usize, q: usize },

    // sources and channels
    #[error("negative probability {value} at input {input}, output {output}")]
    NegativeProbability {
        input: usize,
        output: usize,
        value: f64,
    },
    #[error("joint distribution sums to {0}, expected 1")]
    NotNormalized(f64),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("quantity is only defined for uniform-input channels")]
    NonUniformInputForChannelQuantity,
    #[error("operation requires a uniform-input channel")]
    NonUniformInput,

    // polarization and decoding
    #[error("all candidates have zero likelihood")]
    ZeroLikelihood,
    #[error("sample count must be at least 1")]
    BadSampleCount,
    #[error("transform path digit {digit} out of range for kernel size {ell}")]
    BadPathDigit { digit: usize, ell: usize },

    // codes
    #[error("requested rate {0} is infeasible")]
    RateInfeasible(f64),
    #[error("bad selection threshold: {0}")]
    BadThreshold(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    // experiments
    #[error("kernel not admissible here: {0}")]
    BadKernel(String),
    #[error("depth {depth} exceeds limit {limit}")]
    DepthExceeded { depth: usize, limit: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("configuration error: {0}")]
    ConfigError(String),
    #[error("parse error: {0}")]
    Parse(String),
}
