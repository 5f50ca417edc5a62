use thiserror::Error;

/// Errors raised by the bundle, quantization and limit machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty matrix")]
    EmptyMatrix,
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("hbar must be positive, got {0}")]
    NonPositiveHbar(f64),
    #[error("operator is not self-adjoint (deviation {deviation:e})")]
    NotSelfAdjoint { deviation: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("metric audit failed: {0}")]
    InvalidMetric(String),
    #[error("base space already carries a limit point")]
    LimitPointPresent,
    #[error("base space has no limit point")]
    NoLimitPoint,
    #[error("hbar = {0} is not a sampled point")]
    UnsampledPoint(f64),
    #[error("base map error: {0}")]
    InvalidBaseMap(String),

    #[error("unknown generator label `{0}`")]
    UnknownLabel(String),
    #[error("invalid scheme parameters: {0}")]
    InvalidScheme(String),
    #[error("coefficient function sampled on {found} points, base has {expected}")]
    GridMismatch { expected: usize, found: usize },
    #[error("coefficient function has no value at the limit point")]
    MissingLimitValue,
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("expression parse error: {0}")]
    Parse(String),

    #[error("too few samples: need {needed}, have {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("tail is not Cauchy (successive differences do not contract)")]
    NonCauchyTail,
    #[error("bundle is not extended to a limit point")]
    NotExtended,
    #[error("extension requires a dense isometric embedding: {0}")]
    NotDenseIsometric(String),

    #[error("classical bracket missing for pair ({0}, {1})")]
    MissingBracket(String, String),
    #[error("compatibility violated at hbar = {hbar}: deviation {deviation:e}")]
    CompatibilityViolation { hbar: f64, deviation: f64 },
    #[error("base map is not a metric map: d({x},{y}) expands")]
    NotMetricMap { x: f64, y: f64 },
    #[error("base map is not proper")]
    NotProper,
    #[error("morphisms do not compose: {0}")]
    CompositionMismatch(String),
    #[error("morphism is not smooth: {0}")]
    NotSmooth(String),
    #[error("base map is not second-order")]
    NotSecondOrder,
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
