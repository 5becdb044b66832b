use stratshap::Error as CoreError;

/// Failure of a command, carrying its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config file contents or inconsistent inputs. Exit 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// Unreadable or malformed input files, unwritable outputs. Exit 3.
    #[error("I/O error: {0}")]
    Io(String),
    /// A check failed or some instances could not be explained. Exit 1.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e.root() {
            CoreError::Io(_) | CoreError::Csv(_) | CoreError::Data(_) | CoreError::ModelFormat { .. } => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Attaches a path to I/O failures.
pub(crate) fn io_at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}
