use thiserror::Error;

/// Process exit codes: 0 success, 1 bad input, 2 a mathematical condition failed.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Condition(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Condition(_) => 2,
        }
    }
}

impl From<lqgvar::Error> for CliError {
    fn from(e: lqgvar::Error) -> Self {
        if e.is_condition_error() {
            CliError::Condition(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
