use thiserror::Error;

use crate::space::PointId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("distance table is not symmetric at ({0}, {1})")]
    SymmetryViolation(PointId, PointId),
    #[error("distance table has a nonzero diagonal entry at {0}")]
    DiagonalViolation(PointId),
    #[error("distinct points {0} and {1} are at distance zero")]
    ZeroDistance(PointId, PointId),
    #[error("invalid distance {value} between {a} and {b}")]
    InvalidDistance { a: PointId, b: PointId, value: f64 },
    #[error("fewer than two points")]
    TooFewPoints,
    #[error("empty sample")]
    EmptySample,
    #[error("duplicate point id {0}")]
    DuplicateId(PointId),
    #[error("unknown point id {0}")]
    UnknownPoint(PointId),
    #[error("point {0} is an obstacle, a sample point was expected")]
    NotASamplePoint(PointId),
    #[error("weight of point {id} must be positive and finite, got {value}")]
    InvalidWeight { id: PointId, value: f64 },
    #[error("coordinates: {0}")]
    Coordinates(String),
    #[error("no finite triangular constant: the table is not a quasi-metric (triple {0}, {1}, {2})")]
    NotQuasiMetric(PointId, PointId, PointId),
    #[error("distance tables are defined on different point sets")]
    IncompatiblePointSets,

    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("invalid chain-distance parameter: {0}")]
    InvalidParams(String),
    #[error("composition depth cap {0} is too small: one more layer still changes reachability")]
    DepthCapTooSmall(u32),

    #[error("the obstacle set is empty")]
    EmptyObstacleSet,
    #[error("every ball in scope has zero maximal hole")]
    NoPositiveDenominators,
    #[error("no ball meets the obstacle set with a positive hole")]
    NoQualifyingBalls,

    #[error("ball has {0} members; the exhaustive packing search accepts at most {1}")]
    BallTooLarge(usize, usize),
    #[error("gamma {gamma} outside (0, {upper})")]
    GammaOutOfRange { gamma: f64, upper: f64 },
    #[error("sample point {0} lies on the obstacle set, its distance weight is infinite")]
    SampleOnObstacle(PointId),
    #[error("ball centered at {0} does not reach the obstacle set")]
    BallMissesE(PointId),
    #[error("no admissible eta: {0}")]
    NoAdmissibleEta(String),
    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),

    #[error("omega is empty")]
    EmptyOmega,
    #[error("omega contains every sample point")]
    OmegaIsEverything,

    #[error("snowflake exponent {0} < 1 requires a metric input (K = {1})")]
    SnowflakeOnNonMetric(f64, f64),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("section {section}: {source}")]
    Section { section: String, source: Box<Error> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse { location: location.into(), message: message.to_string() }
    }

    /// The error with any section wrapper removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Section { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for errors raised while checking that an input is a valid space.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::SymmetryViolation(..)
                | Error::DiagonalViolation(_)
                | Error::ZeroDistance(..)
                | Error::InvalidDistance { .. }
                | Error::TooFewPoints
                | Error::EmptySample
                | Error::DuplicateId(_)
                | Error::InvalidWeight { .. }
                | Error::Coordinates(_)
                | Error::NotQuasiMetric(..)
        )
    }
}
