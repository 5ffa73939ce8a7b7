use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed{}: {source}", destination.as_ref().map(|d| format!(" for {d}")).unwrap_or_default())]
    Stage {
        stage: &'static str,
        destination: Option<String>,
        #[source]
        source: rise_core::Error,
    },

    #[error("stage `{stage}`: {message}")]
    Artifact { stage: &'static str, message: String },

    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn stage<'a>(stage: &'static str, destination: &'a str) -> impl FnOnce(rise_core::Error) -> CliError + 'a {
        move |source| CliError::Stage { stage, destination: Some(destination.to_string()), source }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |e| CliError::Io { path, message: e.to_string() }
    }
}
