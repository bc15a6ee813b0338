use thiserror::Error;

pub type Result<T> = std::result::Result<T, SqcError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SqcError {
    #[error("malformed instance document: {0}")]
    Malformed(String),

    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),

    #[error("unknown vertex id `{0}`")]
    UnknownVertex(String),

    #[error("vertex `{id}`: {reason}")]
    InvalidVertex { id: String, reason: String },

    #[error("edge {a}-{b}: {reason}")]
    InvalidEdge { a: String, b: String, reason: String },

    #[error("not a tree: {0}")]
    NotATree(String),

    #[error("all demand rates are zero")]
    ZeroDemand,

    #[error("cruising speed must be positive and finite, got {0}")]
    InvalidSpeed(f64),

    #[error("a tree needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("the extension recursion requires identical handling times at every vertex")]
    HeterogeneousHandling,

    #[error("invalid window length {length}: {reason}")]
    InvalidLength { length: f64, reason: String },

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),
}
