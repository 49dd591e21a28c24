use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failure classes with their process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }

    /// Stable machine-readable tag printed with every error.
    pub fn tag(self) -> &'static str {
        match self {
            ErrorKind::Config => "config",
            ErrorKind::Data => "data",
            ErrorKind::Numeric => "numeric",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] fercoh_core::Error),
}

impl CliError {
    pub fn kind(&self) -> ErrorKind {
        use fercoh_core::Error as E;
        match self {
            CliError::Config(_) => ErrorKind::Config,
            CliError::Data(_) | CliError::Io { .. } => ErrorKind::Data,
            CliError::Numeric(_) => ErrorKind::Numeric,
            CliError::Core(e) => match e {
                E::Config(_) => ErrorKind::Config,
                E::NonFinite { .. } => ErrorKind::Numeric,
                E::Shape { .. }
                | E::DegenerateBox { .. }
                | E::Landmarks(_)
                | E::Label(_)
                | E::EmptyInput(_)
                | E::Validation(_)
                | E::Format(_) => ErrorKind::Data,
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind().exit_code()
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Data("x".into()).exit_code(), 3);
        assert_eq!(CliError::Numeric("x".into()).exit_code(), 4);
        let core = |e| CliError::Core(e).exit_code();
        assert_eq!(core(fercoh_core::Error::Config("a".into())), 2);
        assert_eq!(core(fercoh_core::Error::NonFinite { what: "loss".into() }), 4);
        assert_eq!(core(fercoh_core::Error::Landmarks("67 points".into())), 3);
        assert_eq!(core(fercoh_core::Error::Format("bad".into())), 3);
    }
}
