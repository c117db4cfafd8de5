use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: {msg}")]
    InvalidArg { op: &'static str, msg: String },

    #[error("backward: loss must be a scalar, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },

    #[error("{context}: non-finite value encountered")]
    NonFinite { context: String },

    #[error("checkpoint: {msg}")]
    Checkpoint { msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl NumError {
    pub fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        NumError::InvalidArg {
            op,
            msg: msg.into(),
        }
    }
}
