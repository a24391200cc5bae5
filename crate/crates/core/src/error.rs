use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or inconsistent input file.
    #[error("data error in {}{}: {message}", file.display(), line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Data {
        file: PathBuf,
        line: Option<u64>,
        message: String,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A lottery number the ten-bit combiner cannot produce.
    #[error("{0} cannot be encoded: the ten-bit combiner only reaches 0..=47")]
    Unrepresentable(u32),

    /// The bit source ran out of rounds before six distinct numbers appeared.
    #[error("no complete draw after {rounds} rounds; collected {collected:?}")]
    Exhausted { rounds: u32, collected: Vec<u32> },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn data(
        file: impl Into<PathBuf>,
        line: Option<u64>,
        msg: impl Into<String>,
    ) -> Self {
        Error::Data {
            file: file.into(),
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
