use ambvib::Error as CoreError;

/// CLI failure classes, mapped onto the exit-code contract:
/// 1 usage/config, 2 data, 3 insufficient data.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Insufficient(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Insufficient(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(m) => write!(f, "{m}"),
            CliError::Insufficient(m) => write!(f, "{m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(_) | CoreError::Parameter(_) => CliError::Usage(e.to_string()),
            CoreError::InsufficientData(_) => CliError::Insufficient(e.to_string()),
            CoreError::Parse { .. }
            | CoreError::InvalidState(_)
            | CoreError::Numerical(_)
            | CoreError::Io(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
