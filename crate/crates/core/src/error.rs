use alloc::string::String;

/// Everything that can go wrong inside the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("embedding has zero norm")]
    ZeroNorm,

    #[error("embedding must have at least one component")]
    EmptyEmbedding,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("projected embedding is degenerate (norm {norm:e} below 1e-12)")]
    DegenerateProjection { norm: f64 },

    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("label {label} outside [0, 1]")]
    LabelOutOfRange { label: f64 },

    #[error("label {label} is not positive; clip labels to [1e-10, 1] before computing the SLD loss")]
    UnclippedLabel { label: f64 },

    #[error("label {label} is not binary (expected 0 or 1)")]
    NonBinaryLabel { label: f64 },

    #[error("no embedding for prompt id {0:?}")]
    MissingEmbedding(String),

    #[error("unknown prompt id {0:?}")]
    UnknownPrompt(String),

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("duplicate pair ({0:?}, {1:?})")]
    DuplicatePair(String, String),

    #[error("pair joins prompt {0:?} with itself")]
    SelfPair(String),

    #[error("index is empty")]
    EmptyIndex,

    #[error("requested {k} neighbours but only {available} are available")]
    NotEnoughNeighbours { k: usize, available: usize },

    #[error("ROC/AUC needs at least one positive and one negative label")]
    SingleClass,

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("loss type {0:?} is not implemented (expected bce or sld)")]
    NotImplemented(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("need {needed} prompt-disjoint pairs with label {label}, found {available}")]
    InsufficientPairs {
        label: u8,
        needed: usize,
        available: usize,
    },

    #[error("construction failed: {0}")]
    ConstructionFailed(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
