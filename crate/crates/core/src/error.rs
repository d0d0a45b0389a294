use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        line: Option<usize>,
        msg: String,
    },
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("validation error at line {line}: {msg}")]
    Validation { line: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("point is behind the camera (depth {0})")]
    BehindCamera(f64),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("registration failure: {0}")]
    Registration(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("meshing error: {0}")]
    Meshing(String),
    #[error("generation error: {0}")]
    Generation(String),
    #[error("evaluation error: {0}")]
    Eval(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// True for errors caused by bad or missing inputs, as opposed to an
    /// algorithm failing on valid inputs.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::Unsupported(_)
                | Error::Validation { .. }
                | Error::Config(_)
                | Error::Input(_)
        )
    }
}
