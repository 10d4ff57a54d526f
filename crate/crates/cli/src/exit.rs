use std::fmt;

use sentivec::Error;

pub const USAGE: i32 = 1;
pub const DATA: i32 = 2;
pub const NUMERIC: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: DATA,
            message: message.into(),
        }
    }

    /// An artifact produced by an earlier command is absent.
    pub fn missing(what: &str, path: &std::path::Path, command: &str) -> Self {
        CliError::data(format!(
            "{what} not found at {}; run `sentivec {command}` first",
            path.display()
        ))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_numeric() { NUMERIC } else { DATA };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}
