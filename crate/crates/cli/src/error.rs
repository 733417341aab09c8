use std::fmt;
use std::process::ExitCode;

use gaze_core::GazeError;
use gaze_server::ConfigError;

/// Failure of a command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or arguments (exit 1).
    Usage(String),
    /// Unreadable or inconsistent input data (exit 2).
    Data(String),
    /// Environment failures, numerical breakdown or a failed self-check (exit 3).
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<GazeError> for CliError {
    fn from(e: GazeError) -> Self {
        match e {
            GazeError::InvalidArgument(_) => CliError::Usage(e.to_string()),
            GazeError::Io { .. } if matches!(&e, GazeError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound) => {
                CliError::Data(e.to_string())
            }
            _ if e.is_data_error() => CliError::Data(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Model(g) => g.into(),
            ConfigError::Invalid(m) => CliError::Data(m),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn write_file(path: &std::path::Path, contents: impl AsRef<[u8]>) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}
