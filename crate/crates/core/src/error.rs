use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QwkError {
    #[error("system label `{0}` appears in both operands")]
    LabelCollision(String),
    #[error("unknown system label `{0}`")]
    UnknownLabel(String),
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("invalid quantum state: {0}")]
    InvalidState(String),
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("ancilla dimension {ancilla} is smaller than rank {rank}")]
    AncillaTooSmall { ancilla: usize, rank: usize },
    #[error("resource cap exceeded: {0}")]
    CapExceeded(String),
    #[error("channel variant mismatch: {0}")]
    VariantMismatch(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("typical set is empty")]
    EmptyTypicalSet,
    #[error("word is not typical")]
    AtypicalWord,
    #[error("net has no elements")]
    EmptyNet,
    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, QwkError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> QwkError {
    QwkError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
