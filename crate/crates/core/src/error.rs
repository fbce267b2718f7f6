use thiserror::Error;

/// Errors produced by training, inference, and data handling.
#[derive(Debug, Error)]
pub enum Error {
    /// Two operands had incompatible shapes for the requested operation.
    #[error("shape mismatch in {op}: left is {left:?}, right is {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    /// A matrix that must be symmetric positive definite failed to factor
    /// even after the largest permitted diagonal jitter.
    #[error(
        "matrix of order {order} is not positive definite (last jitter tried: {last_jitter:e})"
    )]
    NotPositiveDefinite { order: usize, last_jitter: f64 },

    /// A column that must be normalized has zero Euclidean norm.
    #[error("column {index} has zero norm and cannot be normalized")]
    ZeroNormColumn { index: usize },

    /// An argument had a value outside its documented domain.
    #[error("invalid argument for {name}: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    /// A delimited text record failed to parse.
    #[error("parse error at row {row}, column {column}: {reason}")]
    Parse {
        row: usize,
        column: usize,
        reason: String,
    },

    /// An IDX file carried an unexpected magic number.
    #[error("bad IDX magic in {path}: expected {expected:#010x}, found {found:#010x}")]
    IdxMagic {
        path: String,
        expected: u32,
        found: u32,
    },

    /// An IDX file ended before its header-declared payload.
    #[error(
        "truncated IDX file {path}: header declares {expected} bytes of payload, found {found}"
    )]
    IdxTruncated {
        path: String,
        expected: usize,
        found: usize,
    },

    /// Image and label files declare different sample counts.
    #[error("item count mismatch: {images} images but {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    /// A model file did not start with the expected magic bytes.
    #[error("bad model magic: expected {expected:?}, found {found:?}")]
    ModelMagic { expected: String, found: String },

    /// A model file declared an unsupported format version.
    #[error("unsupported model format version {found} (supported: {supported})")]
    ModelVersion { found: u32, supported: u32 },

    /// Header dimensions and payload matrix dimensions disagree.
    #[error(
        "model dimension mismatch for {field}: header declares {header}, payload has {payload}"
    )]
    ModelDims {
        field: &'static str,
        header: usize,
        payload: usize,
    },

    /// A run configuration was structurally or semantically invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// Classifier training needs at least two distinct labels.
    #[error("cannot train a classifier on a single class (only class {class} present)")]
    SingleClass { class: usize },

    /// The pairwise optimizer hit its update budget before meeting the
    /// stopping tolerance.
    #[error("optimizer did not converge within {max_updates} pair updates (worst KKT violation: {violation:e})")]
    NonConvergence { max_updates: usize, violation: f64 },

    /// Supervised training requires every class in every fold complement.
    #[error("class {class} has no samples in the training split for fold {fold}")]
    MissingClassInFold { class: usize, fold: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
