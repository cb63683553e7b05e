use std::fmt;

/// Failure of a command, classified by exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad flags or flag values. Exit code 1.
    Usage(String),
    /// Unreadable or malformed input. Exit code 2.
    Data(String),
    /// An internal consistency check failed. Exit code 3.
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }

    pub fn data(context: impl fmt::Display, err: impl fmt::Display) -> Self {
        CliError::Data(format!("{context}: {err}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Invariant(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<txallo::Error> for CliError {
    fn from(e: txallo::Error) -> Self {
        use txallo::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidParams(_) | E::InvalidSchedule(_) | E::InvalidSpec(_) => CliError::Usage(msg),
            E::InvalidAccount(_)
            | E::EmptyTransaction { .. }
            | E::UnmappedAccount(_)
            | E::ShardOutOfRange { .. }
            | E::EmptyGraph
            | E::EmptyTransactions => CliError::Data(msg),
            E::ContractViolation(_) | E::StaleDelta(_) | E::StaleAllocation(_) => {
                CliError::Invariant(msg)
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
