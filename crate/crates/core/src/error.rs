use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("label count {labels} does not match sample count {samples}")]
    LabelLengthMismatch { labels: usize, samples: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("cannot merge labeled and unlabeled datasets")]
    MixedLabeling,

    #[error("all columns are numerically zero")]
    ZeroMatrix,

    #[error("Sylvester operator is numerically singular (eigenvalue {eigenvalue:e})")]
    SingularSystem { eigenvalue: f64 },

    #[error("requested {clusters} clusters for {samples} samples")]
    TooManyClusters { clusters: usize, samples: usize },

    #[error("no K-means group has at least {anchor_size} samples")]
    NoAnchors { anchor_size: usize },

    #[error("class {0} has no training samples")]
    EmptyClass(usize),

    #[error("SVM solver for class {class} stopped at duality gap {gap:e} after {epochs} epochs")]
    SolverFailure { class: usize, gap: f64, epochs: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("bad dimensions: {0}")]
    BadDimensions(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular value decomposition did not converge")]
    SvdNoConvergence,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }
}
