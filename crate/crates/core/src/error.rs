use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite feature value at position {0}")]
    NonFinite(usize),

    #[error("graph has no labeled vertex")]
    NoLabeledVertices,

    #[error("singular system: unlabeled component {component:?} has no path to a labeled vertex and gamma_g = 0")]
    Singular { component: Vec<usize> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("random walk from vertex {start} did not terminate within {max_steps} steps")]
    WalkCutoff { start: usize, max_steps: usize },

    #[error("oracle size cap exceeded: {size} > {cap}")]
    CapExceeded { size: usize, cap: usize },

    #[error("record {0} has no ground-truth label")]
    MissingTruth(usize),

    #[error("snapshot version {found} is not supported (expected {expected})")]
    SnapshotVersion { found: u32, expected: u32 },

    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("length mismatch: {0}")]
    Misaligned(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numerical failures map to CLI exit code 3, everything else to 2.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Singular { .. } | Error::Numerical(_) | Error::WalkCutoff { .. })
    }
}
