//! Fallacy detection for short arguments: an LLM pipeline turns the text
//! into a formula, and an SMT solver looks for a counterexample.

pub mod cli;
pub mod config;
pub mod eval;
pub mod llm;
pub mod pipeline;
pub mod solver;

pub use nl2fol_core as core;
