//! Minimal SMT-LIB s-expression reader and writer.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SExpr {
    Atom(String),
    List(Vec<SExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SExprError {
    #[error("unbalanced `(` opened at byte {0}")]
    Unclosed(usize),
    #[error("unexpected `)` at byte {0}")]
    UnexpectedClose(usize),
    #[error("unterminated {what} starting at byte {offset}")]
    Unterminated { what: &'static str, offset: usize },
}

impl SExpr {
    pub fn atom<S: Into<String>>(s: S) -> Self {
        SExpr::Atom(s.into())
    }

    pub fn list<I: IntoIterator<Item = SExpr>>(items: I) -> Self {
        SExpr::List(items.into_iter().collect())
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(a) => Some(a),
            SExpr::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items) => Some(items),
            SExpr::Atom(_) => None,
        }
    }

    /// `(head ...)` check.
    pub fn is_call(&self, head: &str) -> bool {
        matches!(self.as_list(), Some([SExpr::Atom(h), ..]) if h == head)
    }

    /// Every atom in the expression, depth-first.
    pub fn atoms(&self) -> Vec<&str> {
        let mut out = Vec::new();
        fn go<'a>(e: &'a SExpr, out: &mut Vec<&'a str>) {
            match e {
                SExpr::Atom(a) => out.push(a),
                SExpr::List(items) => items.iter().for_each(|i| go(i, out)),
            }
        }
        go(self, &mut out);
        out
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Atom(a) => f.write_str(a),
            SExpr::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Reads every top-level expression in `src`. `;` comments are skipped;
/// `|quoted|` symbols and `"strings"` are kept verbatim as atoms.
pub fn parse_sexprs(src: &str) -> Result<Vec<SExpr>, SExprError> {
    let bytes = src.as_bytes();
    let mut stack: Vec<(usize, Vec<SExpr>)> = Vec::new();
    let mut top = Vec::new();
    let mut i = 0;
    let push = |e: SExpr, stack: &mut Vec<(usize, Vec<SExpr>)>, top: &mut Vec<SExpr>| match stack
        .last_mut()
    {
        Some((_, items)) => items.push(e),
        None => top.push(e),
    };
    while i < bytes.len() {
        match bytes[i] {
            b if b.is_ascii_whitespace() => i += 1,
            b';' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'(' => {
                stack.push((i, Vec::new()));
                i += 1;
            }
            b')' => {
                let (_, items) = stack.pop().ok_or(SExprError::UnexpectedClose(i))?;
                push(SExpr::List(items), &mut stack, &mut top);
                i += 1;
            }
            b'|' | b'"' => {
                let delim = bytes[i];
                let start = i;
                i += 1;
                loop {
                    match bytes.get(i) {
                        None => {
                            return Err(SExprError::Unterminated {
                                what: if delim == b'|' { "quoted symbol" } else { "string" },
                                offset: start,
                            })
                        }
                        // "" escapes a quote inside strings
                        Some(&b) if b == delim => {
                            if delim == b'"' && bytes.get(i + 1) == Some(&b'"') {
                                i += 2;
                                continue;
                            }
                            i += 1;
                            break;
                        }
                        Some(_) => i += 1,
                    }
                }
                push(SExpr::Atom(src[start..i].into()), &mut stack, &mut top);
            }
            _ => {
                let start = i;
                while i < bytes.len() {
                    let b = bytes[i];
                    if b.is_ascii_whitespace() || matches!(b, b'(' | b')' | b';' | b'"' | b'|') {
                        break;
                    }
                    i += 1;
                }
                push(SExpr::Atom(src[start..i].into()), &mut stack, &mut top);
            }
        }
    }
    if let Some((offset, _)) = stack.pop() {
        return Err(SExprError::Unclosed(offset));
    }
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn reads_nested_lists_and_skips_comments() {
        let got = parse_sexprs("; header\n(a (b c) |q x|) \"s\"\"t\" d").unwrap();
        assert_eq!(
            got,
            vec![
                SExpr::list([
                    SExpr::atom("a"),
                    SExpr::list([SExpr::atom("b"), SExpr::atom("c")]),
                    SExpr::atom("|q x|"),
                ]),
                SExpr::atom("\"s\"\"t\""),
                SExpr::atom("d"),
            ]
        );
    }

    #[test]
    fn display_round_trip() {
        let src = "(define-fun Tall ((x S0)) Bool (= x @S0_0))";
        let e = parse_sexprs(src).unwrap();
        assert_eq!(e[0].to_string(), src);
    }

    #[test]
    fn unbalanced_is_an_error() {
        assert_eq!(parse_sexprs("(a (b)"), Err(SExprError::Unclosed(0)));
        assert_eq!(parse_sexprs("a)"), Err(SExprError::UnexpectedClose(1)));
        assert!(matches!(
            parse_sexprs("(a |b"),
            Err(SExprError::Unterminated { .. })
        ));
    }
}
