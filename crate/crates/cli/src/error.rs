use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit statuses, one per failure class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const DOMAIN: i32 = 3;
    pub const UNSUPPORTED_SCHEME: i32 = 4;
    pub const USAGE: i32 = 64;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] kgreason_core::Error),

    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        source: kgreason_core::Error,
    },

    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn in_file(path: &Path, source: impl Into<kgreason_core::Error>) -> Self {
        CliError::InFile {
            path: path.to_owned(),
            source: source.into(),
        }
    }

    fn core(&self) -> Option<&kgreason_core::Error> {
        match self {
            CliError::Core(e) | CliError::InFile { source: e, .. } => Some(e),
            _ => None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use kgreason_core::Error as E;
        match self {
            CliError::Config { .. } => exit::PARSE,
            CliError::Usage(_) => exit::USAGE,
            _ => match self.core() {
                Some(E::Parse { .. }) => exit::PARSE,
                Some(E::Domain(_)) => exit::DOMAIN,
                Some(E::UnsupportedScheme(_)) => exit::UNSUPPORTED_SCHEME,
                _ => exit::IO,
            },
        }
    }

    /// Short failure-class tag used as the diagnostic prefix.
    pub fn class(&self) -> &'static str {
        match self.exit_code() {
            exit::PARSE => "parse",
            exit::DOMAIN => "domain",
            exit::UNSUPPORTED_SCHEME => "unsupported-scheme",
            exit::USAGE => "usage",
            _ => "io",
        }
    }

    /// The one-line diagnostic printed on failure.
    pub fn diagnostic(&self) -> String {
        let msg = self.to_string().replace('\n', " ");
        format!("error[{}]: {msg}", self.class())
    }
}
