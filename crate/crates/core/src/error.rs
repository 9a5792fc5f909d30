use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),

    #[error("degenerate 6D rotation: columns are parallel or zero")]
    DegenerateRotation,

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("sequences are not aligned: {0}")]
    Alignment(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid motion: {0}")]
    InvalidMotion(String),

    #[error("no active files to sample from")]
    EmptyActiveSet,

    #[error("empty routing history")]
    EmptyHistory,

    #[error("level {level} exceeds the {unlocked} unlocked experts")]
    LevelOutOfRange { level: usize, unlocked: usize },

    #[error("expert pool is at capacity ({0})")]
    PoolAtCapacity(usize),

    #[error("unknown tag `{0}`")]
    UnknownTag(String),

    #[error("plug-in contract violated: {0}")]
    Contract(String),

    #[error("unsupported format_version {found} (expected {expected})")]
    UnknownVersion { expected: u32, found: u32 },

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(what: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected,
            found,
        }
    }

    /// Short machine-readable tag, used in the CLI's JSON error payloads.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidRotation(_) => "invalid_rotation",
            Error::DegenerateRotation => "degenerate_rotation",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Alignment(_) => "alignment",
            Error::Config(_) => "config",
            Error::InvalidMotion(_) => "invalid_motion",
            Error::EmptyActiveSet => "empty_active_set",
            Error::EmptyHistory => "empty_history",
            Error::LevelOutOfRange { .. } => "level_out_of_range",
            Error::PoolAtCapacity(_) => "pool_at_capacity",
            Error::UnknownTag(_) => "unknown_tag",
            Error::Contract(_) => "contract",
            Error::UnknownVersion { .. } => "unknown_version",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}
