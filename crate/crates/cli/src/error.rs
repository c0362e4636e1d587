use std::fmt;
use std::io::ErrorKind;

use photonas_core::Error;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_RUNTIME: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }

    pub fn output(path: &std::path::Path, e: impl fmt::Display) -> Self {
        Self::runtime(format!("writing {}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Argument(_)
            | Error::GeneTable(_)
            | Error::UnknownStrategy { .. }
            | Error::Sizing { .. }
            | Error::Capacity { .. }
            | Error::State(_) => EXIT_USAGE,
            Error::Io { source, .. } if source.kind() == ErrorKind::NotFound => EXIT_USAGE,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Format { .. }
            | Error::Label { .. }
            | Error::Json(_)
            | Error::Coverage(_) => EXIT_DATA,
            _ => EXIT_RUNTIME,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}
