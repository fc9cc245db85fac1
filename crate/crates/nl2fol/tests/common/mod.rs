#![allow(dead_code)]

pub mod gen;
pub mod par;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nl2fol::eval::{load_dataset, DatasetFormat, LabeledExample, DEFAULT_CONNECTIVE};
use nl2fol::llm::{FixtureStore, Gateway, LlmConfig, Mode, ScriptedBackend, ScriptedResponses};
use nl2fol::pipeline::Pipeline;
use nl2fol::solver::SolverConfig;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn corpus() -> Vec<LabeledExample> {
    load_dataset(&fixtures().join("corpus.jsonl"), DatasetFormat::Jsonl, DEFAULT_CONNECTIVE).unwrap()
}

pub fn example(id: &str) -> LabeledExample {
    corpus().into_iter().find(|e| e.id == id).unwrap_or_else(|| panic!("no example {id}"))
}

pub fn scripts() -> BTreeMap<String, ScriptedResponses> {
    serde_json::from_slice(&std::fs::read(fixtures().join("scripts.json")).unwrap()).unwrap()
}

pub fn solver() -> SolverConfig {
    SolverConfig::default()
}

pub fn replay() -> Pipeline {
    let gateway = Gateway::replay(LlmConfig::default(), FixtureStore::new(fixtures().join("llm")));
    Pipeline::new(gateway, solver())
}

/// Pipeline answering from `script` with no fixture store behind it.
pub fn scripted(script: ScriptedResponses) -> Pipeline {
    let gateway = Gateway::with_backend(
        Mode::Live,
        LlmConfig::default(),
        Some(Box::new(ScriptedBackend::new(script))),
        None,
    );
    Pipeline::new(gateway, solver())
}

/// Runs several scripts through one solver process, separated by
/// `(reset)`. Returns the verdict lines and any `(error` lines.
pub fn solve_batch(scripts: &[nl2fol_core::SmtScript]) -> (Vec<String>, Vec<String>) {
    use std::io::Write;
    let mut text = String::new();
    for s in scripts {
        for line in s.lines() {
            if line != "(get-model)" {
                text.push_str(&line);
                text.push('\n');
            }
        }
        text.push_str("(reset)\n");
    }
    let mut file = tempfile::Builder::new().suffix(".smt2").tempfile().unwrap();
    file.write_all(text.as_bytes()).unwrap();
    let out = std::process::Command::new(&solver().executable)
        .arg("-smt2")
        .arg(file.path())
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let verdicts = stdout.lines().filter(|l| matches!(l.trim(), "sat" | "unsat" | "unknown")).map(String::from).collect();
    let errors = stdout.lines().filter(|l| l.starts_with("(error")).map(String::from).collect();
    (verdicts, errors)
}
