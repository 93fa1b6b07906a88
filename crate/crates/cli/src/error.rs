use std::fmt;
use std::io;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad config, flag, genome arity or out-of-bounds gene.
    Config(String),
    /// Remote scorer failed its startup health check.
    ScorerUnreachable(String),
    Io(String),
    Interrupted,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::ScorerUnreachable(_) => 3,
            CliError::Io(_) => 4,
            CliError::Interrupted => 130,
        }
    }

    pub fn io(context: impl fmt::Display, err: io::Error) -> Self {
        CliError::Io(format!("{context}: {err}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::ScorerUnreachable(msg) => write!(f, "scorer unreachable: {msg}"),
            CliError::Io(msg) => write!(f, "io error: {msg}"),
            CliError::Interrupted => write!(f, "interrupted"),
        }
    }
}

impl std::error::Error for CliError {}
