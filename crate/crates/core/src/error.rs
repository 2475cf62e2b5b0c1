use thiserror::Error;

/// Every failure the library can report. `name()` gives a stable identifier
/// used in manifests and exit reporting.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("period-map differential minus identity is singular")]
    DegenerateJacobian,
    #[error("lost hyperbolicity at a = {a}: multiplier modulus {modulus}")]
    LostHyperbolicity { a: f64, modulus: f64 },
    #[error("no dominated splitting: angle between directions {angle} rad")]
    ConeFieldViolation { angle: f64 },
    #[error("value {y} is below the critical value {critical}")]
    BelowCriticalValue { y: f64, critical: f64 },
    #[error("parameter guard violated: {0}")]
    GuardViolated(String),
    #[error("sample {x} too close to the metric singularity")]
    MetricSingularity { x: f64 },
    #[error("need at least {needed} scales, got {got}")]
    InsufficientRange { needed: usize, got: usize },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("bin {i} with epsilon {epsilon} is not expanding")]
    NonHyperbolicBin { i: u64, epsilon: f64 },
    #[error("periodic orbit is not a saddle")]
    NotASaddle,
    #[error("inverse solve failed at ({x}, {y})")]
    InverseSolveFailed { x: f64, y: f64 },
    #[error("no fold of the unstable arc near the stable arc")]
    NoFoldDetected,
    #[error("tangency distance has no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("fold coefficient {xi} below tolerance")]
    FitDegenerate { xi: f64 },
    #[error("only {0} lamination leaves hit the transversal")]
    TooFewIntersections(usize),
    #[error("no sink of period {period} at a = {a}")]
    NoSinkAtSeed { period: usize, a: f64 },
    #[error("insufficient spread: {0}")]
    InsufficientSpread(String),
    #[error("orbit escaped from ({x}, {y})")]
    OrbitEscaped { x: f64, y: f64 },
    #[error("least-squares system is rank deficient")]
    RankDeficientFit,
    #[error("fitted fold lies outside the sampling box")]
    FoldOutsideBox,
    #[error("renormalized map has no real fixed point")]
    NoFixedPoint,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("level {level} interval yields multiplicity {m} < 2")]
    MultiplicityCollapse { level: usize, m: usize },
    #[error("level {level} would hold {count} intervals, over the budget")]
    IntervalBudget { level: usize, count: usize },
    #[error("resolution floor reached at level {0}")]
    ResolutionFloor(usize),
    #[error("invalid cover: {0}")]
    InvalidCover(String),
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    pub fn name(&self) -> &'static str {
        match self {
            Error::NoConvergence { .. } => "NoConvergence",
            Error::DegenerateJacobian => "DegenerateJacobian",
            Error::LostHyperbolicity { .. } => "LostHyperbolicity",
            Error::ConeFieldViolation { .. } => "ConeFieldViolation",
            Error::BelowCriticalValue { .. } => "BelowCriticalValue",
            Error::GuardViolated(_) => "GuardViolated",
            Error::MetricSingularity { .. } => "MetricSingularity",
            Error::InsufficientRange { .. } => "InsufficientRange",
            Error::InvalidSchedule(_) => "InvalidSchedule",
            Error::NonHyperbolicBin { .. } => "NonHyperbolicBin",
            Error::NotASaddle => "NotASaddle",
            Error::InverseSolveFailed { .. } => "InverseSolveFailed",
            Error::NoFoldDetected => "NoFoldDetected",
            Error::NoSignChange { .. } => "NoSignChange",
            Error::FitDegenerate { .. } => "FitDegenerate",
            Error::TooFewIntersections(_) => "TooFewIntersections",
            Error::NoSinkAtSeed { .. } => "NoSinkAtSeed",
            Error::InsufficientSpread(_) => "InsufficientSpread",
            Error::OrbitEscaped { .. } => "OrbitEscaped",
            Error::RankDeficientFit => "RankDeficientFit",
            Error::FoldOutsideBox => "FoldOutsideBox",
            Error::NoFixedPoint => "NoFixedPoint",
            Error::InvalidParams(_) => "InvalidParams",
            Error::MultiplicityCollapse { .. } => "MultiplicityCollapse",
            Error::IntervalBudget { .. } => "IntervalBudget",
            Error::ResolutionFloor(_) => "ResolutionFloor",
            Error::InvalidCover(_) => "InvalidCover",
            Error::InvalidFamily(_) => "InvalidFamily",
            Error::Io(_) => "Io",
            Error::Parse(_) => "Parse",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
