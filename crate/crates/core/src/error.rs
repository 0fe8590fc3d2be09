use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("degenerate rows (norm < 1e-12) at indices {rows:?}")]
    DegenerateRow { rows: Vec<usize> },

    #[error("invalid permutation: {0}")]
    Permutation(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("objective undefined: {0}")]
    ObjectiveUndefined(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from caller-supplied parameters rather than
    /// from reading or interpreting input data.
    pub fn is_parameter_error(&self) -> bool {
        matches!(self, Error::Parameter(_) | Error::Capacity(_))
    }
}
