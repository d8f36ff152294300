use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("menu is empty")]
    EmptyMenu,
    #[error("alternative {alt} is not a member of menu {menu:#04x}")]
    NotInMenu { alt: usize, menu: u16 },
    #[error("alternative count {n} outside supported range 2..={max}")]
    BadAlternativeCount { n: usize, max: usize },
    #[error("labels must be distinct and nonempty")]
    BadLabels,
    #[error("ranking is not a permutation of the alternatives")]
    NotAPermutation,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("kernel is missing an entry for (alternative {alt}, order {order})")]
    MissingKernelEntry { alt: usize, order: usize },
    #[error("chain is not ergodic: {0}")]
    NotErgodic(String),
    #[error("menu {menu:#04x} must contain at least {need} alternatives")]
    MenuTooSmall { menu: u16, need: usize },
    #[error("difference matrix is rank deficient")]
    RankDeficient,
    #[error("passage-weighted denominator is within 1e-12 of zero")]
    DegenerateDenominator,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("choice table is missing domain entries: {0}")]
    IncompleteDomain(String),
    #[error("axiom violated: {0}")]
    AxiomViolated(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("objective is unbounded")]
    Unbounded,
    #[error("weight matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("problem size exceeds configured cap: {0}")]
    SizeCap(String),
    #[error("cannot parse probability literal {0:?}")]
    BadProbability(String),
    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
