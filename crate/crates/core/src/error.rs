use thiserror::Error;

/// Errors raised by the geometry, measure, lattice and norm engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0} (supported: 1, 2, 3)")]
    UnsupportedDimension(usize),

    #[error("scale factor must be positive and finite, got {0}")]
    NonPositiveScale(f64),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("measure has no atoms")]
    EmptyMeasure,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("covering precondition violated: {0}")]
    CoveringPrecondition(String),

    #[error("invariant breach: {0}")]
    InvariantBreach(String),

    #[error("dyadic search exhausted: {0}")]
    SearchExhausted(String),

    #[error("cubes come from different dyadic systems")]
    MixedSystems,

    #[error("region is not ({alpha}, {beta})-doubling")]
    NotDoubling { alpha: f64, beta: f64 },

    #[error("dyadic cube {0} was not pre-seeded in this build; widen the generation window")]
    NotPreseeded(String),

    #[error("no ancestor {depth} levels above the atom")]
    BeyondRoot { depth: usize },

    #[error("atoms are not nested in one filtration")]
    NotNested,

    #[error("regions do not intersect")]
    EmptyIntersection,

    #[error("region carries no mass")]
    ZeroMass,

    #[error("test function has {found} values for {expected} atoms")]
    FunctionLength { expected: usize, found: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
