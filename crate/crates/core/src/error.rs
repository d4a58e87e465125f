use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("input dimension {dim} is constant (min = max = {value}); max-min scaling needs two distinct values")]
    ConstantColumn { dim: usize, value: f64 },

    #[error("series too short: windowing needs at least {required} points, got {actual}")]
    InsufficientLength { required: usize, actual: usize },

    #[error("csv row {row}: {msg}")]
    Csv { row: usize, msg: String },

    #[error("model file field `{field}`: {msg}")]
    ModelField { field: String, msg: String },

    #[error("model file is not valid: {0}")]
    ModelParse(#[from] serde_json::Error),

    #[error("numeric abort: {0}")]
    NonFinite(String),

    #[error("percentage error undefined: actual value at index {index} is zero; set an epsilon floor (--mpe-epsilon / mpe_epsilon)")]
    ZeroActual { index: usize },

    #[error("scheme mismatch: {0}")]
    Scheme(String),

    #[error("structure learning: {0}")]
    Learning(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
