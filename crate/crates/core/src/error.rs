use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("Fock basis of {modes} modes and {photons} photons has {size} states, above the cap of {cap}")]
    Capacity {
        modes: usize,
        photons: usize,
        size: u128,
        cap: usize,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("batch norm in train mode needs at least 2 samples, got {0}")]
    DegenerateBatch(usize),

    #[error("dropout rate {0} must lie in [0, 1)")]
    InvalidRate(f64),

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Diverged {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: offset {offset}: {message}")]
    Format {
        path: String,
        offset: u64,
        message: String,
    },

    #[error("cannot reach {target} parameters: nearest achievable is {nearest}")]
    Sizing { target: usize, nearest: usize },

    #[error("class {0} has no samples")]
    Coverage(usize),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("gene table: {0}")]
    GeneTable(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
