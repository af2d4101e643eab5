use crsirl_core::Error as CoreError;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("missing input `{name}` at {path}: {reason}")]
    MissingInput { name: String, path: PathBuf, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl CliError {
    pub fn field(name: &str) -> Self {
        CliError::Config(format!("`{name}` is out of range"))
    }
}

pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

/// 2 for usage and input problems, 3 for numeric failures, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<CliError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::Numeric(_) | CoreError::DegenerateWeights(_) => EXIT_NUMERIC,
                CoreError::InvalidArgument(_) | CoreError::Format(_) | CoreError::NoPair => EXIT_USAGE,
                _ => EXIT_IO,
            };
        }
    }
    EXIT_IO
}
