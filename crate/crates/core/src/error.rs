//! Diagnostics shared by the checker, the elaborator and both evaluators.

use std::fmt;

use serde::{Deserialize, Serialize};

pub use crate::parse::ParseError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCode {
    Parse,
    Unbound,
    Mismatch,
    TyAppArity,
    RuleAppMismatch,
    NotApplicable,
    BinderClash,
    NoMatch,
    RecursiveNoMatch,
    Overlap,
    DuplicateArgs,
    Unambiguous,
    AmbiguousInstantiation,
    ResolutionDepth,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Parse => "E0101",
            ErrorCode::Unbound => "E0201",
            ErrorCode::Mismatch => "E0202",
            ErrorCode::TyAppArity => "E0203",
            ErrorCode::RuleAppMismatch => "E0204",
            ErrorCode::NotApplicable => "E0205",
            ErrorCode::BinderClash => "E0206",
            ErrorCode::NoMatch => "E0301",
            ErrorCode::RecursiveNoMatch => "E0302",
            ErrorCode::Overlap => "E0303",
            ErrorCode::DuplicateArgs => "E0304",
            ErrorCode::Unambiguous => "E0305",
            ErrorCode::AmbiguousInstantiation => "E0306",
            ErrorCode::ResolutionDepth => "E0307",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A static error. `path` lists the resolution goals leading to the failure,
/// outermost first, when the error arose during resolution.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("error[{code}]: {message}{}", render_path(.path))]
pub struct TypeError {
    pub code: ErrorCode,
    pub message: String,
    pub path: Vec<String>,
}

fn render_path(path: &[String]) -> String {
    if path.is_empty() {
        return String::new();
    }
    let mut s = String::from("\n  while resolving:");
    for (i, g) in path.iter().enumerate() {
        s.push_str(&format!("\n  {}{g}", "  ".repeat(i)));
    }
    s
}

impl TypeError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        TypeError { code, message: message.into(), path: Vec::new() }
    }

    pub fn within(mut self, goal: String) -> Self {
        self.path.insert(0, goal);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("runtime error: {message}")]
pub struct RuntimeError {
    pub message: String,
}

impl RuntimeError {
    pub fn new(message: impl Into<String>) -> Self {
        RuntimeError { message: message.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

impl Error {
    pub fn code(&self) -> Option<ErrorCode> {
        match self {
            Error::Parse(_) => Some(ErrorCode::Parse),
            Error::Type(e) => Some(e.code),
            Error::Runtime(_) => None,
        }
    }
}
