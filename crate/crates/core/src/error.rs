use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The second density vanishes where the first one carries mass.
    #[error("support mismatch: {mass:.3e} of the reference mass falls where the other density is zero")]
    SupportMismatch { mass: f64 },

    /// The exponentially tilted moment keeps growing when the truncation is widened.
    #[error("exponential moment diverges (value {coarse:.6e} at radius {radius}, {wide:.6e} when widened)")]
    MomentDiverges { coarse: f64, wide: f64, radius: f64 },

    #[error("invalid parameter for {family}: {reason}")]
    InvalidTheta { family: &'static str, reason: String },

    #[error("dimension {dim} exceeds the tensor-grid limit {max}")]
    DimensionTooHigh { dim: usize, max: usize },

    #[error("degenerate importance proposal: {0}")]
    DegenerateProposal(String),

    #[error("inequality evaluated outside its domain: {0}")]
    DomainViolation(String),

    #[error("no bracket radius in (0, {eta_max}] satisfies the bracket conditions at delta = {delta}")]
    EtaSearchFailed { delta: f64, eta_max: f64 },

    #[error("extra component has zero weight")]
    DegenerateWeight,

    #[error("true coefficient {index} is zero")]
    ZeroCoefficient { index: usize },

    #[error("rate fit needs at least {needed} grid points with nonzero counts, found {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: key `{key}` violates constraint: {constraint}")]
    Validation { line: usize, key: String, constraint: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
