use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("characteristic {0} is not prime")]
    NonPrime(u64),
    #[error("extension degree must be at least 1")]
    ZeroDegree,
    #[error("modulus has degree {got}, expected {expected}")]
    ModulusDegree { expected: usize, got: usize },
    #[error("modulus is not irreducible over F_{0}")]
    ReducibleModulus(u64),
    #[error("field size {p}^{n} exceeds the table ceiling {ceiling}")]
    SizeExceeded { p: u64, n: u32, ceiling: u64 },
    #[error("element {code} does not have multiplicative order q-1")]
    NotGenerator { code: u32 },
    #[error("element code {code} out of range for q = {q}")]
    ElemOutOfRange { code: u64, q: u64 },
    #[error("character index {index} out of range for q - 1 = {order}")]
    CharOutOfRange { index: u64, order: u64 },

    #[error("trivial character where a non-trivial one is required: {0}")]
    TrivialCharacter(String),
    #[error("argument t must be nonzero")]
    ZeroArgument,
    #[error("enumeration cost {cost:.3e} exceeds budget {budget:.3e}")]
    BudgetExceeded { cost: f64, budget: f64 },
    #[error("empty hypergeometric spec (m + n = 0)")]
    EmptySpec,

    #[error("character tuples are not disjoint: {0}")]
    NotDisjoint(String),
    #[error("invalid moment spec: {0}")]
    InvalidSpec(String),

    #[error("cannot take the argument of zero (index {0})")]
    ZeroValue(usize),
    #[error("empty sample")]
    EmptySample,
    #[error("box discrepancy needs dimension >= 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("grid resolution must be >= 2, got {0}")]
    GridTooSmall(usize),
    #[error("grid {grid}^{dim} cells exceeds the cell limit")]
    GridTooLarge { grid: usize, dim: usize },
    #[error("points have inconsistent dimensions")]
    RaggedSample,
    #[error("duplicate eta index {0}")]
    DuplicateEta(u32),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("bad magic in cache file")]
    BadMagic,
    #[error("cache file truncated")]
    Truncated,
    #[error("corrupt cache file: {0}")]
    CorruptCache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
