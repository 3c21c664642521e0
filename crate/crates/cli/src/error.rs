use std::path::Path;

use kpo_core::{ErrorClass, KpoError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] KpoError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for configuration errors, 3 for numerical failures, 4 for tripped
    /// physics guards, 1 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Numerics => 3,
                ErrorClass::PhysicsGuard => 4,
            },
            CliError::Io(_) => 1,
        }
    }

    pub fn in_file(self, path: &Path) -> Self {
        match self {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(KpoError::IntegratorAccuracy("x".into())).exit_code(), 3);
        assert_eq!(CliError::Core(KpoError::Truncation { dim: 8, tail: 1.0, limit: 1e-6 }).exit_code(), 4);
        assert_eq!(CliError::Core(KpoError::Parse("x".into())).exit_code(), 2);
        assert_eq!(CliError::Io("x".into()).exit_code(), 1);
    }
}
