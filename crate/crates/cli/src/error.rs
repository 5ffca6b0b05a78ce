use std::fmt;

/// What went wrong, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, inputs or configuration. Exit code 2.
    Usage(String),
    /// Failure while doing the work. Exit code 1.
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

pub fn usage(m: impl Into<String>) -> CliError {
    CliError::Usage(m.into())
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<macpilot_train::TrainError> for CliError {
    fn from(e: macpilot_train::TrainError) -> Self {
        use macpilot_core::zoo::ZooError;
        use macpilot_train::TrainError as T;
        match e {
            T::Config(_) | T::Model(ZooError::UnknownArchitecture(_)) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.into()),
        }
    }
}

impl From<macpilot_eval::EvalError> for CliError {
    fn from(e: macpilot_eval::EvalError) -> Self {
        use macpilot_eval::EvalError as E;
        match e {
            E::Config(_) => CliError::Usage(e.to_string()),
            E::Train(t) => t.into(),
            other => CliError::Runtime(other.into()),
        }
    }
}

impl From<macpilot_gateway::GatewayError> for CliError {
    fn from(e: macpilot_gateway::GatewayError) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
