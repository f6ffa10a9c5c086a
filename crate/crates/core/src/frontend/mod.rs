//! C-subset frontend: tokenizer, parser, type resolution and printer.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod types;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

pub use ast::*;
pub use lexer::{tokenize, Comment, Token, TokenKind};
pub use parser::parse_unit;
pub use types::{builtin_type, resolve_types, DataModel, IntType};

/// A location in a source file. Lines and columns are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
    pub length: u32,
    /// Byte offset of the first character; not part of the public record.
    #[serde(skip)]
    pub offset: usize,
}

impl SourceSpan {
    pub fn new(file: Arc<str>, line: u32, column: u32, length: u32, offset: usize) -> Self {
        SourceSpan {
            file,
            line,
            column,
            length: length.max(1),
            offset,
        }
    }

    /// Smallest span covering `self` and `other`, assuming `other` does not
    /// start before `self`.
    pub fn to(&self, other: &SourceSpan) -> SourceSpan {
        let end = (other.offset + other.length as usize).max(self.offset + self.length as usize);
        SourceSpan {
            file: self.file.clone(),
            line: self.line,
            column: self.column,
            length: (end - self.offset) as u32,
            offset: self.offset,
        }
    }

    pub fn end(&self) -> usize {
        self.offset + self.length as usize
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{span}: illegal character {ch:?}")]
    Lex { span: SourceSpan, ch: char },
    #[error("{span}: integer literal `{text}` does not fit in 64 bits")]
    LiteralOverflow { span: SourceSpan, text: String },
    #[error("{span}: expected {expected}, found {found}")]
    Parse {
        span: SourceSpan,
        expected: String,
        found: String,
    },
    #[error("{span}: {message}")]
    Type { span: SourceSpan, message: String },
}

impl FrontendError {
    pub fn span(&self) -> &SourceSpan {
        match self {
            FrontendError::Lex { span, .. }
            | FrontendError::LiteralOverflow { span, .. }
            | FrontendError::Parse { span, .. }
            | FrontendError::Type { span, .. } => span,
        }
    }
}

/// Tokenizes, parses and type-resolves one source text.
pub fn load(file: &str, source: &str, model: &DataModel) -> Result<TranslationUnit, FrontendError> {
    let lexed = tokenize(file, source)?;
    let unit = parse_unit(file, source, lexed)?;
    resolve_types(unit, model)
}
