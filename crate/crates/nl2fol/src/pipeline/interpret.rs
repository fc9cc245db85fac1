//! Counterexample explanations.

use std::fmt::Write;

use nl2fol_core::model::{Interpretation, Model};

use super::types::{Explanation, PipelineTrace, ReferringExpression};
use crate::llm::{bindings, CallLog, Gateway, TemplateId};

/// Plain listing of the model: domains, constants, then each predicate's
/// truth table. Independent of any LLM.
pub fn render_model(model: &Model, entities: &[ReferringExpression]) -> String {
    let mut out = String::new();
    if model.is_empty() {
        out.push_str("(empty model: no symbols constrained)\n");
        return out;
    }
    for u in &model.universes {
        let _ = writeln!(out, "domain {} = {{{}}}", u.sort, u.elements.join(", "));
    }
    let surface = |sym: &str| {
        entities
            .iter()
            .find(|e| e.symbol == sym && e.surface != sym)
            .map(|e| format!("  ({})", e.surface))
            .unwrap_or_default()
    };
    for d in &model.definitions {
        match &d.interpretation {
            Interpretation::Value(v) => {
                let _ = writeln!(out, "{} = {}{}", d.symbol, v, surface(&d.symbol));
            }
            Interpretation::Table(rows) => {
                for row in rows {
                    let _ = writeln!(
                        out,
                        "{}({}) = {}",
                        d.symbol,
                        row.args.join(", "),
                        row.value
                    );
                }
            }
        }
    }
    for frag in &model.unparsed {
        let _ = writeln!(out, "unparsed: {frag}");
    }
    if model.incomplete {
        out.push_str("(model incomplete)\n");
    }
    out
}

/// Deterministic rendering, plus the LLM's reading of it when available.
pub fn interpret_counterexample(
    model: &Model,
    trace: &PipelineTrace,
    gateway: &Gateway,
    log: &CallLog,
) -> Explanation {
    let fallback = render_model(model, &trace.entities);
    let ci = trace.claim_implication.as_ref();
    let list = |items: Vec<String>| {
        if items.is_empty() {
            "none".to_string()
        } else {
            items.join(", ")
        }
    };
    let b = bindings([
        (
            "claims",
            ci.map(|c| list(c.claims.clone())).unwrap_or_else(|| "none".into()),
        ),
        (
            "implication",
            ci.map(|c| c.implication.clone()).unwrap_or_default(),
        ),
        (
            "referring_expressions",
            list(trace.entities.iter().map(|e| e.to_string()).collect()),
        ),
        (
            "properties",
            list(trace.properties.iter().map(|p| p.to_string()).collect()),
        ),
        ("fol", trace.fol_text.clone().unwrap_or_default()),
        ("counterexample", fallback.trim_end().to_string()),
    ]);
    match gateway.complete(TemplateId::Interpret, &b, log) {
        Ok(text) => Explanation {
            text: Some(text.trim().to_string()),
            fallback,
            llm_failed: false,
        },
        Err(_) => Explanation {
            text: None,
            fallback,
            llm_failed: true,
        },
    }
}
