use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("slot capacity exceeded: {dl_blocks} DL + {ul_blocks} UL blocks do not fit in 14 symbols")]
    SlotCapacity { dl_blocks: usize, ul_blocks: usize },

    #[error("ratio {0} is not a member of the configured frame set")]
    UnknownRatio(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("degenerate channel: all entries are zero")]
    DegenerateChannel,

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("simulation error at frame {frame}, slot {slot}, cell {cell}: {source}")]
    Run {
        frame: u64,
        slot: u64,
        cell: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(field: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Coarse category used for process exit codes.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } => 2,
            Error::Validation { .. } | Error::UnknownRatio(_) => 3,
            Error::Io { .. } => 4,
            _ => 5,
        }
    }
}
