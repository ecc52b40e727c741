use std::fmt;

use albumstory::model::FailureKind;

pub const OK: i32 = 0;
pub const OTHER: i32 = 1;
pub const VALIDATION: i32 = 2;
pub const BACKEND: i32 = 3;
pub const PARSE: i32 = 4;
pub const USAGE: i32 = 64;

/// A command failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: VALIDATION,
            message: message.into(),
        }
    }

    pub fn backend(message: impl Into<String>) -> Self {
        Failure {
            code: BACKEND,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

pub fn for_kind(kind: FailureKind) -> i32 {
    match kind {
        FailureKind::Backend => BACKEND,
        FailureKind::Parse => PARSE,
        FailureKind::Invalid => VALIDATION,
    }
}

/// The code reported when several albums failed differently.
pub fn worst(codes: impl IntoIterator<Item = i32>) -> i32 {
    let rank = |c: i32| match c {
        BACKEND => 4,
        PARSE => 3,
        VALIDATION => 2,
        OTHER => 1,
        _ => 0,
    };
    codes.into_iter().max_by_key(|&c| rank(c)).unwrap_or(OK)
}

/// Exit code for an error bubbling out of a command.
pub fn code_of(err: &anyhow::Error) -> i32 {
    err.downcast_ref::<Failure>().map_or(OTHER, |f| f.code)
}
