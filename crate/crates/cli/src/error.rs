use std::fmt;

/// A CLI failure with its exit status: 2 for bad input (arguments, config,
/// unreadable or malformed files), 1 for a failed computation.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Compute(_) => 1,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

/// One line: `rectify: input error: ...` or `rectify: compute error: ...`.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, msg) = match self {
            CliError::Input(m) => ("input error", m),
            CliError::Compute(m) => ("compute error", m),
        };
        write!(f, "rectify: {kind}: {}", msg.replace('\n', " "))
    }
}

impl std::error::Error for CliError {}

/// Unreadable files and rejected parameters are input errors; everything else
/// a core routine reports is a computation failure.
impl From<rectify_core::Error> for CliError {
    fn from(e: rectify_core::Error) -> Self {
        use rectify_core::Error as E;
        match e {
            E::Io { .. } | E::Format { .. } | E::InvalidParameter(_) | E::UnknownKind(_) => {
                CliError::Input(e.to_string())
            }
            other => CliError::Compute(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
