//! Regenerates `fixtures/llm` from the scripted answers in
//! `fixtures/scripts.json`, by running every corpus example (and the
//! single-prompt baseline) in record mode against a scripted backend.
//!
//!     cargo run -p nl2fol --example record_fixtures

use std::collections::BTreeMap;
use std::path::Path;

use nl2fol::eval::{load_dataset, DatasetFormat, DEFAULT_CONNECTIVE};
use nl2fol::llm::{bindings, CallLog, FixtureStore, Gateway, LlmConfig, Mode, ScriptedBackend, ScriptedResponses, TemplateId};
use nl2fol::pipeline::Pipeline;
use nl2fol::solver::SolverConfig;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let corpus = load_dataset(&root.join("corpus.jsonl"), DatasetFormat::Jsonl, DEFAULT_CONNECTIVE).expect("corpus");
    let scripts: BTreeMap<String, ScriptedResponses> =
        serde_json::from_slice(&std::fs::read(root.join("scripts.json")).expect("scripts")).expect("scripts.json");
    let store_dir = root.join("llm");
    for ex in &corpus {
        let script = scripts.get(&ex.id).unwrap_or_else(|| panic!("no script for {}", ex.id)).clone();
        let gateway = Gateway::with_backend(
            Mode::Record,
            LlmConfig::default(),
            Some(Box::new(ScriptedBackend::new(script))),
            Some(FixtureStore::new(&store_dir)),
        );
        let pipeline = Pipeline::new(gateway, SolverConfig::default());
        let (c, trace) = pipeline.classify(&ex.text);
        let baseline = pipeline.gateway.complete(
            TemplateId::EndToEnd,
            &bindings([("input", ex.text.clone())]),
            &CallLog::default(),
        );
        println!(
            "{:<28} {:<8} {:<13} calls={:<3} warnings={} baseline={}",
            ex.id,
            format!("{:?}", ex.label).to_lowercase(),
            c.label(),
            trace.llm_calls.len(),
            trace.warnings.len(),
            baseline.map(|b| b.chars().take(20).collect::<String>()).unwrap_or_else(|e| e.to_string()),
        );
        for w in &trace.warnings {
            println!("    warning: {w}");
        }
    }
    println!("{} fixtures in {}", FixtureStore::new(&store_dir).len(), store_dir.display());
}
