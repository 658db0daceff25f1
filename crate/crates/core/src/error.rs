use std::path::PathBuf;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the recognition engine.
///
/// Variants split into two families: invalid inputs (bad files, contract
/// violations, mismatched dimensions) and numerical failures (degenerate
/// encodings that cannot be normalized). [`Error::exit_code`] maps the
/// families onto the process exit codes used by the command-line tools.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("label {label:?}{} has no tokens in the embedding vocabulary", index_suffix(.index))]
    UnencodableLabel {
        label: String,
        index: Option<usize>,
    },

    #[error("degenerate zero encoding for label {label:?}")]
    DegenerateEncoding { label: String },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

fn index_suffix(index: &Option<usize>) -> String {
    match index {
        Some(i) => format!(" (index {i})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }

    /// Process exit code for this error: 1 for input errors, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DegenerateEncoding { .. } | Error::Numerical(_) => 2,
            _ => 1,
        }
    }
}
