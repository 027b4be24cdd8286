use std::path::PathBuf;

/// Errors surfaced by the simulator library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data file {path} at byte {offset}: {detail}")]
    DataFormat {
        path: PathBuf,
        offset: u64,
        detail: String,
    },

    #[error("phase-order violation in round {round}: {detail}")]
    PhaseViolation { round: u64, detail: String },

    #[error("baseline `{0}` is a named stub; its update rule is defined elsewhere and is not implemented here")]
    UnimplementedBaseline(String),

    #[error("length mismatch in {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
