use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("samples {0} and {1} coincide (distance below 1e-12)")]
    DuplicatePoint(usize, usize),
    #[error("non-finite entry in {0}")]
    NonFinite(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("pair statistics need two distinct indices, got {0} twice")]
    SamePair(usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("kappa {kappa} is below the field's gamma1 {gamma1}")]
    KappaTooSmall { kappa: f64, gamma1: f64 },
    #[error("kappa must be positive for a non-affine field (got {0})")]
    NonPositiveKappa(f64),
    #[error("solver did not converge after {iterations} iterations (gap {gap:e}, violation {violation:e})")]
    NoConvergence { iterations: usize, gap: f64, violation: f64 },
    #[error("constraint set is empty (violation {0:e})")]
    Infeasible(f64),
    #[error("query {index}: {source}")]
    Query {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("subset enumeration over {m} samples exceeds the cap of {cap}")]
    SubsetBudget { m: usize, cap: usize },
    #[error("dimension {n} exceeds the configured cap of {cap}")]
    DimensionBudget { n: usize, cap: usize },
    #[error("no cell contains the query point (best defect {0:e})")]
    NoContainingCell(f64),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("region closure contains data sample {0}")]
    RegionIntersectsData(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl Error {
    /// Stable snake_case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DuplicatePoint(..) => "duplicate_point",
            Error::NonFinite(_) => "non_finite",
            Error::Empty(_) => "empty",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::SamePair(_) => "same_pair",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::KappaTooSmall { .. } => "kappa_too_small",
            Error::NonPositiveKappa(_) => "non_positive_kappa",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Infeasible(_) => "infeasible",
            Error::Query { source, .. } => source.kind(),
            Error::SubsetBudget { .. } => "subset_budget",
            Error::DimensionBudget { .. } => "dimension_budget",
            Error::NoContainingCell(_) => "no_containing_cell",
            Error::Unsupported(_) => "unsupported",
            Error::RegionIntersectsData(_) => "region_intersects_data",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
