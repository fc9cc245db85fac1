use std::fmt;

use nl2fol_core::{Formula, Signature};
use serde::{Deserialize, Serialize};

use crate::llm::{CallRecord, Mode, NliBackend, NliJudgment};
use crate::solver::{SolverOutcome, Verdict};

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimImplication {
    pub claims: Vec<String>,
    pub implication: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExprKind {
    Quantified,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferringExpression {
    pub surface: String,
    pub symbol: String,
    pub kind: ExprKind,
}

impl fmt::Display for ReferringExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.surface == self.symbol {
            f.write_str(&self.surface)
        } else {
            write!(f, "{}: {}", self.surface, self.symbol)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Relation {
    Equal,
    /// left ⊆ right
    SubsetLr,
    /// right ⊆ left
    SubsetRl,
    Unrelated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRelation {
    pub left: String,
    pub right: String,
    pub relation: Relation,
}

impl EntityRelation {
    /// Whether the pair is linked by equality or inclusion in either order.
    pub fn links(&self, a: &str, b: &str) -> bool {
        let pair = (self.left == a && self.right == b) || (self.left == b && self.right == a);
        pair && self.relation != Relation::Unrelated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomSource {
    Claim,
    Implication,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyAtom {
    pub predicate: String,
    pub args: Vec<String>,
    pub source: AtomSource,
}

impl PropertyAtom {
    pub fn same_atom(&self, other: &PropertyAtom) -> bool {
        self.predicate == other.predicate && self.args == other.args
    }
}

impl fmt::Display for PropertyAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.predicate, self.args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundFact {
    pub antecedent: PropertyAtom,
    pub consequent: PropertyAtom,
    pub judgment: NliJudgment,
    /// Canonical universally quantified implication.
    pub formula: String,
    /// Exactly one matching conjunct was found in the final formula.
    pub realized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    ClaimImplication,
    Entities,
    EntityRelations,
    Properties,
    Background,
    Fol,
    Compile,
    Solve,
    Interpret,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::ClaimImplication => "claim_implication",
            Stage::Entities => "entities",
            Stage::EntityRelations => "entity_relations",
            Stage::Properties => "properties",
            Stage::Background => "background",
            Stage::Fol => "fol",
            Stage::Compile => "compile",
            Stage::Solve => "solve",
            Stage::Interpret => "interpret",
        }
    }

    pub const ALL: [Stage; 9] = [
        Stage::ClaimImplication,
        Stage::Entities,
        Stage::EntityRelations,
        Stage::Properties,
        Stage::Background,
        Stage::Fol,
        Stage::Compile,
        Stage::Solve,
        Stage::Interpret,
    ];
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InconclusiveReason {
    Unknown,
    Timeout,
    StageFailure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    Fallacy {
        explanation: String,
    },
    Valid,
    Inconclusive {
        reason: InconclusiveReason,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stage: Option<Stage>,
    },
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Classification::Fallacy { .. } => "fallacy",
            Classification::Valid => "valid",
            Classification::Inconclusive { .. } => "inconclusive",
        }
    }

    pub fn is_fallacy(&self) -> bool {
        matches!(self, Classification::Fallacy { .. })
    }

    /// Fallacy iff SAT, Valid iff UNSAT, Inconclusive otherwise.
    pub fn agrees_with(&self, verdict: Option<Verdict>) -> bool {
        match self {
            Classification::Fallacy { .. } => verdict == Some(Verdict::Sat),
            Classification::Valid => verdict == Some(Verdict::Unsat),
            Classification::Inconclusive { .. } => {
                !matches!(verdict, Some(Verdict::Sat | Verdict::Unsat))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    /// Natural-language reading of the counterexample, when the LLM gave one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Deterministic rendering of the model.
    pub fallback: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub llm_failed: bool,
}

/// Settings that affect a run's outcome, recorded in every trace and report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub mode: Mode,
    pub model: String,
    pub temperature: f64,
    pub nli_backend: NliBackend,
    pub nli_threshold: f64,
    /// Executable name, without its directory.
    pub solver: String,
    pub solver_timeout_secs: f64,
    pub finite_model_find: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub trace_version: u32,
    pub input: String,
    pub settings: RunSettings,
    pub claim_implication: Option<ClaimImplication>,
    pub entities: Vec<ReferringExpression>,
    pub entity_relations: Vec<EntityRelation>,
    pub properties: Vec<PropertyAtom>,
    /// Every entailment judgment made, positive or not.
    pub nli_judgments: Vec<NliJudgment>,
    pub background: Vec<BackgroundFact>,
    pub fol_text: Option<String>,
    pub formula: Option<Formula>,
    pub signature: Option<Signature>,
    pub smt: Option<String>,
    pub solver: Option<SolverOutcome>,
    pub classification: Classification,
    pub explanation: Option<Explanation>,
    pub stages: Vec<StageRecord>,
    pub warnings: Vec<String>,
    pub llm_calls: Vec<CallRecord>,
}

impl PipelineTrace {
    pub fn new(input: &str, settings: RunSettings) -> Self {
        PipelineTrace {
            trace_version: TRACE_VERSION,
            input: input.to_string(),
            settings,
            claim_implication: None,
            entities: Vec::new(),
            entity_relations: Vec::new(),
            properties: Vec::new(),
            nli_judgments: Vec::new(),
            background: Vec::new(),
            fol_text: None,
            formula: None,
            signature: None,
            smt: None,
            solver: None,
            classification: Classification::Inconclusive {
                reason: InconclusiveReason::StageFailure,
                stage: None,
            },
            explanation: None,
            stages: Vec::new(),
            warnings: Vec::new(),
            llm_calls: Vec::new(),
        }
    }

    pub fn verdict(&self) -> Option<Verdict> {
        self.solver.as_ref().map(|s| s.verdict)
    }

    pub fn stage(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|r| r.stage == stage)
    }

    /// Copy with wall-clock fields zeroed, for run-to-run comparison.
    pub fn without_timings(&self) -> PipelineTrace {
        let mut t = self.clone();
        for s in &mut t.stages {
            s.elapsed_ms = 0;
        }
        if let Some(s) = &mut t.solver {
            s.wall_time_ms = 0;
        }
        t
    }

    /// Hex content hash of the input text; traces are stored under it.
    pub fn file_stem(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(&Sha256::digest(self.input.as_bytes())[..8])
    }
}
