//! First-order formula front end and SMT-LIB back end.
//!
//! `no_std` (with `alloc`): tokenizing and parsing formula text, sort
//! inference, emission of a script asserting the formula's negation, and
//! reading counterexample models back from solver output.

#![no_std]

extern crate alloc;

pub mod ast;
pub mod error;
pub mod lexer;
pub mod metrics;
pub mod model;
pub mod parser;
pub mod printer;
pub mod sexpr;
pub mod smt;
pub mod sorts;

#[cfg(feature = "serde")]
mod serde_impls;

pub use ast::{collect_predicates, free_variables, substitute, Arg, AstError, Formula, Term};
pub use error::ParseError;
pub use lexer::{tokenize, Token, TokenKind};
pub use model::{parse_model, Model, ModelParseError};
pub use parser::{parse, parse_formula};
pub use printer::pretty_print;
pub use smt::{emit_smt, to_prefix, EmitError, SmtScript};
pub use sorts::{unify_sorts, Signature, Sort, SortError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Sort(#[from] SortError),
    #[error(transparent)]
    Emit(#[from] EmitError),
}

/// Formula text to script: parse, infer sorts, emit.
pub fn compile(source: &str) -> Result<(Formula, Signature, SmtScript), CompileError> {
    let formula = parse_formula(source)?;
    let signature = unify_sorts(&formula)?;
    let script = emit_smt(&formula, &signature)?;
    Ok((formula, signature, script))
}
