//! Tokenizer for the textual formula notation.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    LParen,
    RParen,
    Comma,
    And,
    Or,
    Not,
    Implies,
    Forall,
    Exists,
    Dot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// Byte offset of the first byte of `text` in the source.
    pub offset: usize,
}

impl Token {
    pub fn end(&self) -> usize {
        self.offset + self.text.len()
    }
}

/// Splits `source` into tokens.
///
/// Connectives: `->` / `=>` / `⇒` / `→`, `&` / `∧`, `|` / `∨`, `~` / `¬`.
/// Quantifiers: `forall` / `exists` (any case) and `∀` / `∃`.
pub fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = source.char_indices().peekable();
    while let Some(&(offset, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let single = match c {
            '(' => Some(TokenKind::LParen),
            ')' => Some(TokenKind::RParen),
            ',' => Some(TokenKind::Comma),
            '.' => Some(TokenKind::Dot),
            '&' | '∧' => Some(TokenKind::And),
            '|' | '∨' => Some(TokenKind::Or),
            '~' | '¬' => Some(TokenKind::Not),
            '⇒' | '→' => Some(TokenKind::Implies),
            '∀' => Some(TokenKind::Forall),
            '∃' => Some(TokenKind::Exists),
            _ => None,
        };
        if let Some(kind) = single {
            chars.next();
            tokens.push(Token {
                kind,
                text: source[offset..offset + c.len_utf8()].into(),
                offset,
            });
            continue;
        }
        if c == '-' || c == '=' {
            chars.next();
            match chars.peek() {
                Some(&(_, '>')) => {
                    chars.next();
                    tokens.push(Token {
                        kind: TokenKind::Implies,
                        text: source[offset..offset + 2].into(),
                        offset,
                    });
                    continue;
                }
                _ => return Err(lex_error(source, offset)),
            }
        }
        if c.is_ascii_alphabetic() {
            let mut end = offset;
            while let Some(&(i, d)) = chars.peek() {
                if d.is_ascii_alphanumeric() || d == '_' {
                    end = i + d.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            let text = &source[offset..end];
            let kind = if text.eq_ignore_ascii_case("forall") {
                TokenKind::Forall
            } else if text.eq_ignore_ascii_case("exists") {
                TokenKind::Exists
            } else {
                TokenKind::Ident
            };
            tokens.push(Token {
                kind,
                text: text.into(),
                offset,
            });
            continue;
        }
        return Err(lex_error(source, offset));
    }
    Ok(tokens)
}

fn lex_error(source: &str, offset: usize) -> ParseError {
    let snippet: String = source[offset..].chars().take(12).collect();
    ParseError::Lex { offset, snippet }
}
