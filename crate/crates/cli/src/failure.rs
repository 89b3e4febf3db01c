use std::fmt;

use densclf::Error;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

/// An error paired with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Self {
            code: EXIT_USAGE,
            message: msg.to_string(),
        }
    }

    pub fn runtime(msg: impl fmt::Display) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: msg.to_string(),
        }
    }

    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

/// Bad inputs, paths and settings exit with 2; fitting failures with 3.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::DimensionMismatch { .. }
        | Error::SchemaMismatch(_)
        | Error::UnparseableValue { .. }
        | Error::InvalidConfig(_)
        | Error::InvalidOrdering(_)
        | Error::ModelFormat(_)
        | Error::UnknownClass(_)
        | Error::EmptyClass(_)
        | Error::ClassTooSmall { .. }
        | Error::InsufficientData(_)
        | Error::Io { .. }
        | Error::Csv(_)
        | Error::Json(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}
