//! Exit codes and the error type carrying them.

use std::fmt;

use planecover::Error;

pub const OK: i32 = 0;
pub const USAGE: i32 = 1;
pub const CONFIG: i32 = 2;
pub const CHECK: i32 = 3;
pub const IO: i32 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure { code: CONFIG, message: message.into() }
    }

    pub fn check(message: impl Into<String>) -> Self {
        Failure { code: CHECK, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Failure { code: IO, message: message.into() }
    }

    /// Library errors raised while reading the config.
    pub fn config_from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::io(e.to_string()),
            _ => Failure::config(e.to_string()),
        }
    }
}

/// Library errors raised while running: bad inputs are config errors,
/// failed geometric conditions and integrations are check failures.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Csv(_) => IO,
            Error::DimensionMismatch { .. }
            | Error::InvalidAlgebra(_)
            | Error::InvalidGrid(_)
            | Error::InvalidArgument(_)
            | Error::Empty(_)
            | Error::Json(_)
            | Error::DegenerateSpan
            | Error::NotNested(_)
            | Error::AxisDegenerate => CONFIG,
            _ => CHECK,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::io(e.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}
