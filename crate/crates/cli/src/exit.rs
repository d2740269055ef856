//! Process exit codes and the failures that map to them.

use std::fmt;

pub const OK: u8 = 0;
pub const USAGE: u8 = 1;
pub const SYNTAX: u8 = 2;
pub const UNMET: u8 = 10;
pub const NOT_FOUND: u8 = 11;
pub const NO_VERSION: u8 = 12;

/// A failed invocation: the exit code plus a message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: Option<String>,
}

impl Failure {
    pub fn usage(message: impl fmt::Display) -> Self {
        Failure {
            code: USAGE,
            message: Some(message.to_string()),
        }
    }

    pub fn syntax(message: impl fmt::Display) -> Self {
        Failure {
            code: SYNTAX,
            message: Some(message.to_string()),
        }
    }

    pub fn with_code(code: u8, message: impl fmt::Display) -> Self {
        Failure {
            code,
            message: Some(message.to_string()),
        }
    }
}

pub type Outcome = Result<(), Failure>;
