use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed wav: {chunk} chunk: {detail}")]
    Decode { chunk: &'static str, detail: String },

    #[error("unsupported wav encoding: format tag {format}, {bits} bits, {channels} channels")]
    UnsupportedFormat { format: u16, bits: u16, channels: u16 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{what} mismatch: {detail}")]
    Mismatch { what: &'static str, detail: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("cannot stratify class {class:?}: {count} sources, need at least 3")]
    Stratification { class: String, count: usize },

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("non-finite activation in layer {layer}")]
    NonFinite { layer: &'static str },

    #[error("{0}")]
    Data(String),

    #[error("unsupported {what} version {found} (expected {expected})")]
    Version { what: &'static str, found: u32, expected: u32 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    /// Short machine-readable category, used by the CLI's error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Decode { .. } => "decode",
            Error::UnsupportedFormat { .. } => "unsupported_format",
            Error::Config(_) => "config",
            Error::Mismatch { .. } => "config_mismatch",
            Error::Shape(_) => "shape",
            Error::Stratification { .. } => "stratification",
            Error::Label { .. } => "label",
            Error::NonFinite { .. } => "non_finite",
            Error::Data(_) => "data",
            Error::Version { .. } => "version",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
