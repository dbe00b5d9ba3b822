use thiserror::Error;

/// Errors raised by the tokenization pipeline and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("non-finite coordinate at point {0}")]
    NonFiniteCoordinate(usize),
    #[error("feature rows ({features}) do not match position rows ({positions})")]
    FeatureRowMismatch { positions: usize, features: usize },
    #[error("point cloud needs at least one feature channel")]
    NoFeatureChannels,

    #[error("invalid layer shape ({0}, {1}): both sides must be >= 1")]
    InvalidShape(usize, usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("bit depth {0} outside 1..=16")]
    InvalidBitDepth(u32),
    #[error("degenerate extent on axis {0}")]
    DegenerateExtent(usize),

    #[error("embedding width {0} is too small (need at least 6)")]
    WidthTooSmall(usize),
    #[error("embedding width {0} must be even")]
    OddWidth(usize),
    #[error("frequency base {0} must be > 1")]
    InvalidFrequencyBase(f64),

    #[error("superpoint {0} has no points")]
    EmptySuperpoint(usize),
    #[error("label {label} at point {index} is out of range for {count} superpoints")]
    LabelOutOfRange { index: usize, label: i64, count: usize },
    #[error("neighbor count {k} exceeds point count {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("invalid enhancer config: {0}")]
    InvalidEnhancerConfig(String),
    #[error("curve order covers {got} tokens, expected {expected}")]
    CurveLengthMismatch { expected: usize, got: usize },

    #[error("rank {rank} exceeds min({rows}, {cols})")]
    RankTooLarge { rank: usize, rows: usize, cols: usize },
    #[error("invalid marginals: {0}")]
    InvalidMarginals(String),
    #[error("invalid temperature {0}")]
    InvalidTemperature(f64),
    #[error("transport kernel is not finite")]
    NonFiniteKernel,

    #[error("filter width mismatch: {0}")]
    WidthMismatch(String),

    #[error("parse error at {location}: {message}")]
    ParseError { location: String, message: String },
    #[error("unsupported property: {0}")]
    UnsupportedProperty(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no point is assigned to a valid superpoint")]
    NoValidSuperpoints,
    #[error("token budget {tokens} exceeds superpoint count {superpoints}; lower the token budget")]
    SuggestLowerT { tokens: usize, superpoints: usize },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ParseError {
            location: location.into(),
            message: message.into(),
        }
    }

    /// Tag an error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
