use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("non-finite value in {op}")]
    NonFinite { op: &'static str },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("batch normalization needs at least 2 samples in training mode, got {0}")]
    DegenerateBatch(usize),
}

impl EngineError {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        EngineError::Dimension {
            op,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = EngineError> = std::result::Result<T, E>;
