//! Error types shared across modules.

use std::fmt;

/// Syntax error with an optional source position (1-based).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub message: String,
    pub line: usize,
    pub col: usize,
}

impl ParseError {
    pub fn msg(m: impl Into<String>) -> ParseError {
        ParseError { message: m.into(), line: 0, col: 0 }
    }

    pub fn at(m: impl Into<String>, line: usize, col: usize) -> ParseError {
        ParseError { message: m.into(), line, col }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "syntax error at {}:{}: {}", self.line, self.col, self.message)
        } else {
            write!(f, "syntax error: {}", self.message)
        }
    }
}

impl std::error::Error for ParseError {}
