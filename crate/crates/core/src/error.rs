use thiserror::Error;

/// Errors produced by model loading, parsing and evaluation.
#[derive(Debug, Error)]
pub enum FoilError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unbound free variable `{0}`")]
    UnboundVariable(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("model is not a free diagram; use the width engine on complete OBDDs or the naive engine")]
    ModelNotFree,

    #[error("model is not a complete ordered diagram; the width engine requires a COBDD")]
    ModelNotComplete,

    #[error("no determinization oracle for this model class: {0}")]
    MissingOracle(String),

    #[error("work cap exceeded: {spent} atom evaluations (cap {cap}); raise --max-work to continue")]
    WorkCapExceeded { spent: u64, cap: u64 },

    #[error("diagram width cap exceeded: {width} > {cap}; raise --max-width to continue")]
    WidthCapExceeded { width: usize, cap: usize },

    #[error("diagram node cap exceeded: {nodes} > {cap}; raise --max-nodes to continue")]
    NodeCapExceeded { nodes: usize, cap: usize },

    #[error("macro `{name}` expects {expected} arguments, got {got}")]
    MacroArity { name: String, expected: usize, got: usize },

    #[error("{0}")]
    Unsupported(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FoilError>;
