use thiserror::Error;

/// Every failure the solver suite can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("inadmissible data: {0}")]
    InadmissibleData(String),
    #[error("solver diverged: {0}")]
    SolverDiverged(String),
    #[error("admissibility violated at x1 = {x1} (j = {j}): {detail}")]
    AdmissibilityViolation { x1: f64, j: usize, detail: String },
    #[error("grid incompatible with the extension operator: {0}")]
    GridIncompatible(String),
    #[error("state too large: {0}")]
    StateTooLarge(String),
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("continuation failed: {0}")]
    ContinuationFailure(String),
    #[error("degenerate coefficient: {0}")]
    DegenerateCoefficient(String),
    #[error("fixed point left the solution ball: {0}")]
    BallEscape(String),
    #[error("fixed point is not contracting: {0}")]
    NonContraction(String),
    #[error("Mach number not monotone in x1: {0}")]
    DegenerateSonic(String),
    #[error("no sonic point: {0}")]
    NoSonicPoint(String),
    #[error("stagnation: {0}")]
    Stagnation(String),
    #[error("characteristic left the cross-section: {0}")]
    GeometryViolation(String),
    #[error("compatibility violated: {0}")]
    Compatibility(String),
    #[error("invalid source: {0}")]
    InvalidSource(String),
    #[error("inconsistent data: {0}")]
    DataInconsistency(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGeometry(_) => "invalid_geometry",
            Error::UnsupportedGeometry(_) => "unsupported_geometry",
            Error::Dimension(_) => "dimension",
            Error::InadmissibleData(_) => "inadmissible_data",
            Error::SolverDiverged(_) => "solver_diverged",
            Error::AdmissibilityViolation { .. } => "admissibility_violation",
            Error::GridIncompatible(_) => "grid_incompatible",
            Error::StateTooLarge(_) => "state_too_large",
            Error::Singular(_) => "singular",
            Error::ContinuationFailure(_) => "continuation_failure",
            Error::DegenerateCoefficient(_) => "degenerate_coefficient",
            Error::BallEscape(_) => "ball_escape",
            Error::NonContraction(_) => "non_contraction",
            Error::DegenerateSonic(_) => "degenerate_sonic",
            Error::NoSonicPoint(_) => "no_sonic_point",
            Error::Stagnation(_) => "stagnation",
            Error::GeometryViolation(_) => "geometry_violation",
            Error::Compatibility(_) => "compatibility",
            Error::InvalidSource(_) => "invalid_source",
            Error::DataInconsistency(_) => "data_inconsistency",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    /// True for errors caused by bad input rather than solver trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidGeometry(_)
                | Error::UnsupportedGeometry(_)
                | Error::InadmissibleData(_)
                | Error::GridIncompatible(_)
                | Error::Compatibility(_)
                | Error::InvalidSource(_)
                | Error::Config(_)
                | Error::Dimension(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
