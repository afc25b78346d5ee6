use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("inadmissible state: {0}")]
    Domain(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("no nontrivial Rankine-Hugoniot root: {0}")]
    NoShock(String),
    #[error("Lax condition violated: {0}")]
    LaxViolation(String),
    #[error("NoBurnedState: {0}")]
    NoBurnedState(String),
    #[error("ignition failure: {0}")]
    IgnitionError(String),
    #[error("transversality failure (df - s singular): {0}")]
    Transversality(String),
    #[error("profile domain exhausted: {0}")]
    DomainExhausted(String),
    #[error("no viscous connection: {0}")]
    NoConnection(String),
    #[error("Newton iteration failed to converge (last residual {residual:e}): {msg}")]
    Convergence { msg: String, residual: f64 },
    #[error("structure error: {0}")]
    Structure(String),
    #[error("ambiguous spectral splitting: {0}")]
    SplitAmbiguous(String),
    #[error("analytic continuation failed: {0}")]
    Continuation(String),
    #[error("step-size collapse: {0}")]
    Stiffness(String),
    #[error("exterior-power lift lost decomposability: {0}")]
    Lift(String),
    #[error("contour passes through (or too close to) a zero: {0}")]
    ContourThroughZero(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short variant name, used for CLI messages and reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "DomainError",
            Error::Usage(_) => "UsageError",
            Error::Config(_) => "ConfigError",
            Error::NoShock(_) => "NoShock",
            Error::LaxViolation(_) => "LaxViolation",
            Error::NoBurnedState(_) => "NoBurnedState",
            Error::IgnitionError(_) => "IgnitionError",
            Error::Transversality(_) => "TransversalityError",
            Error::DomainExhausted(_) => "DomainExhausted",
            Error::NoConnection(_) => "NoConnection",
            Error::Convergence { .. } => "ConvergenceError",
            Error::Structure(_) => "StructureError",
            Error::SplitAmbiguous(_) => "SplitAmbiguous",
            Error::Continuation(_) => "ContinuationError",
            Error::Stiffness(_) => "StiffnessError",
            Error::Lift(_) => "LiftError",
            Error::ContourThroughZero(_) => "ContourThroughZero",
            Error::Io(_) => "IoError",
        }
    }

    /// Usage and configuration problems, as opposed to numerical failures.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_) | Error::Config(_) | Error::Io(_))
    }
}
