use thiserror::Error;

pub type Result<T, E = GdmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GdmError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("scenario `{scenario}` needs {required}: {found}")]
    PlanShape {
        scenario: &'static str,
        required: String,
        found: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GdmError {
    /// Stable machine-readable prefix used by the command-line frontend.
    pub fn code(&self) -> &'static str {
        match self {
            GdmError::DimensionMismatch { .. } => "E_DIM",
            GdmError::Contract(_) => "E_CONTRACT",
            GdmError::Config(_) => "E_CONFIG",
            GdmError::Parse { .. } => "E_PARSE",
            GdmError::Dataset(_) => "E_DATASET",
            GdmError::PlanShape { .. } => "E_SHAPE",
            GdmError::Io(_) => "E_IO",
        }
    }

    pub(crate) fn parse(offset: u64, message: impl Into<String>) -> Self {
        GdmError::Parse {
            offset,
            message: message.into(),
        }
    }
}
