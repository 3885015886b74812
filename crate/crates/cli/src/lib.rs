//! Command-line front end for the `spinlabor` crate.
//!
//! Exit codes: 0 on success, 1 for I/O errors or a failed internal check,
//! 2 for invalid parameters.

use std::path::PathBuf;

pub mod commands;
pub mod config;
pub mod output;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(clap::Error),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("internal check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) => e.exit_code(),
            CliError::Invalid(_) => 2,
            CliError::Io { .. } | CliError::Check(_) => 1,
        }
    }
}

/// Parses, computes and writes; the whole output is rendered before any
/// byte is written.
pub fn run<I, S>(argv: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let config = config::parse_and_validate(argv)?;
    let text = commands::run(&config)?.into_text()?;
    output::emit(&text, config.output.as_deref())
}
