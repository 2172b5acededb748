//! Text surface for protocol models and contexts.
//!
//! Protocol files are line oriented with explicit section keywords:
//!
//! ```text
//! protocol Example {
//!   keypairs { pkB / prvB; }
//!   participant A {
//!     precondition: CON_TERM(pkB);
//!     effect: CON_CONF(Na);
//!     generates: Na;
//!     types: TYPE_U(A), TYPE_NA(Na), TYPE_KPUB(pkB, B);
//!     chain:
//!       + {A, Na}pk(pkB)
//!   }
//!   participant B { ... }
//! }
//! ```
//!
//! Encryption bodies may list several comma-separated terms, which is sugar
//! for a right-nested tuple. `#` starts a comment.

mod lexer;
mod parser;
mod printer;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::model::{Context, ProtocolModel, Violation};

pub use parser::parse_protocol_unchecked;
pub use printer::{serialize_context, serialize_protocol};

/// 1-based location in an input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceSpan {
    pub file: Option<PathBuf>,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{}:", file.display())?;
        }
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("{span}: syntax error: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        span: SourceSpan,
        expected: Vec<String>,
        found: String,
    },
    #[error("{}", format_violations(violations))]
    Semantic { violations: Vec<Violation> },
}

fn format_violations(vs: &[Violation]) -> String {
    let mut s = String::from("model is not well formed:");
    for v in vs {
        s.push_str("\n  ");
        s.push_str(&v.to_string());
    }
    s
}

pub fn parse_protocol(text: &str) -> Result<ProtocolModel, DslError> {
    parser::parse_protocol_at(text, None)
}

pub fn parse_context(text: &str) -> Result<Context, DslError> {
    parser::parse_context_at(text, None)
}

/// Like [`parse_protocol`], with the file name recorded in error spans.
pub fn parse_protocol_file(text: &str, file: &Path) -> Result<ProtocolModel, DslError> {
    parser::parse_protocol_at(text, Some(file))
}

pub fn parse_context_file(text: &str, file: &Path) -> Result<Context, DslError> {
    parser::parse_context_at(text, Some(file))
}
