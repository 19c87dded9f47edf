use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {key}: {reason}")]
    Config { key: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("address {addr:#x} outside configured regions [{regions}]")]
    AddressFault { addr: u64, regions: String },

    #[error("translation fault at vaddr {vaddr:#x}: {detail}")]
    TranslationFault { vaddr: u64, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// True for faults that indicate a broken simulation invariant rather
    /// than bad user input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            Error::AddressFault { .. } | Error::TranslationFault { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
