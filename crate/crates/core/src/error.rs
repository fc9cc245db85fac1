use alloc::string::String;

use thiserror::Error;

/// Errors from tokenizing or parsing formula text. Offsets are byte offsets.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unexpected character at byte {offset}: `{snippet}`")]
    Lex { offset: usize, snippet: String },
    #[error("at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("unbalanced parenthesis at byte {offset}")]
    UnbalancedParens { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Lex { offset, .. }
            | ParseError::Syntax { offset, .. }
            | ParseError::UnbalancedParens { offset } => *offset,
        }
    }
}
