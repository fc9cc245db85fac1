//! Staged translation of an argument into a formula, then solving and
//! explaining it.

pub mod background;
mod interpret;
pub mod parse;
mod types;

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nl2fol_core::{compile, CompileError, Formula, Term};
use thiserror::Error;

pub use interpret::{interpret_counterexample, render_model};
pub use types::*;

use crate::llm::{bindings, CallLog, Gateway, LlmError, NliBackend, NliLabel, TemplateId, DEFAULT_THRESHOLD};
use crate::solver::{run_solver, run_solver_text, SolverConfig, SolverOutcome, Verdict};

/// Answers per stage: the first ask plus one repair.
pub const STAGE_ATTEMPTS: u32 = 2;
/// Formula formulation gets two repairs.
pub const FOL_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{stage} stage failed: {message}")]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
}

impl StageError {
    fn new(stage: Stage, message: impl Into<String>) -> Self {
        StageError {
            stage,
            message: message.into(),
        }
    }

    fn llm(stage: Stage, e: LlmError) -> Self {
        StageError::new(stage, e.to_string())
    }
}

/// Per-run bookkeeping shared by the stage functions.
#[derive(Debug, Default)]
pub struct StageCtx {
    pub log: CallLog,
    pub warnings: Vec<String>,
    /// Answers requested by the current stage.
    pub attempts: u32,
}

/// Output of formula formulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Formulated {
    pub text: String,
    pub formula: Formula,
}

#[derive(Debug)]
pub struct Pipeline {
    pub gateway: Gateway,
    pub solver: SolverConfig,
    pub nli_backend: NliBackend,
    pub nli_threshold: f64,
}

fn sentence_of(ci: &ClaimImplication) -> String {
    let mut parts = ci.claims.clone();
    parts.push(ci.implication.clone());
    parts.join(" ")
}

fn list_or_none<I: IntoIterator<Item = String>>(items: I) -> String {
    let v: Vec<String> = items.into_iter().collect();
    if v.is_empty() {
        "none".into()
    } else {
        v.join(", ")
    }
}

fn entity_list(entities: &[ReferringExpression]) -> String {
    list_or_none(entities.iter().map(|e| e.to_string()))
}

fn relation_text(r: &EntityRelation, entities: &[ReferringExpression]) -> Option<String> {
    let name = |sym: &str| {
        entities
            .iter()
            .find(|e| e.symbol == sym)
            .map_or(sym.to_string(), |e| e.surface.clone())
    };
    let (l, r_) = (name(&r.left), name(&r.right));
    match r.relation {
        Relation::Equal => Some(format!("{l} is equal to {r_}")),
        Relation::SubsetLr => Some(format!("{l} is a subset of {r_}")),
        Relation::SubsetRl => Some(format!("{r_} is a subset of {l}")),
        Relation::Unrelated => None,
    }
}

impl Pipeline {
    pub fn new(gateway: Gateway, solver: SolverConfig) -> Self {
        Pipeline {
            gateway,
            solver,
            nli_backend: NliBackend::default(),
            nli_threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn settings(&self) -> RunSettings {
        let cfg = self.gateway.config();
        RunSettings {
            mode: self.gateway.mode(),
            model: cfg.model.clone(),
            temperature: cfg.temperature,
            nli_backend: self.nli_backend,
            nli_threshold: self.nli_threshold,
            solver: self
                .solver
                .executable
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            solver_timeout_secs: self.solver.timeout_secs,
            finite_model_find: self.solver.finite_model_find,
        }
    }

    fn ask(&self, template: TemplateId, b: crate::llm::Bindings, ctx: &mut StageCtx, stage: Stage) -> Result<String, StageError> {
        ctx.attempts += 1;
        self.gateway
            .complete(template, &b, &ctx.log)
            .map_err(|e| StageError::llm(stage, e))
    }

    pub fn parse_claim_implication(&self, text: &str, ctx: &mut StageCtx) -> Result<ClaimImplication, StageError> {
        let stage = Stage::ClaimImplication;
        if text.trim().is_empty() {
            return Err(StageError::new(stage, "empty input"));
        }
        let mut feedback = String::new();
        for _ in 0..STAGE_ATTEMPTS {
            let answer = self.ask(
                TemplateId::ClaimImplication,
                bindings([("input", text.trim().to_string()), ("feedback", feedback.clone())]),
                ctx,
                stage,
            )?;
            if let Some(ci) = parse::claim_implication(&answer) {
                if ci.claims.is_empty() {
                    ctx.warnings
                        .push("no claim found: the antecedent is empty (NoClaim)".into());
                }
                return Ok(ci);
            }
            feedback = "\nYour previous answer had no `Implication:` line. Answer with `Claim:` lines and exactly one `Implication:` line.\n".into();
        }
        Err(StageError::new(stage, "no `Implication:` line in the answer"))
    }

    pub fn extract_entities(&self, ci: &ClaimImplication, ctx: &mut StageCtx) -> Result<Vec<ReferringExpression>, StageError> {
        let stage = Stage::Entities;
        let mut feedback = String::new();
        for _ in 0..STAGE_ATTEMPTS {
            let answer = self.ask(
                TemplateId::Entities,
                bindings([("input", sentence_of(ci)), ("feedback", feedback.clone())]),
                ctx,
                stage,
            )?;
            let entities = build_entities(parse::entity_items(&answer));
            if !entities.is_empty() {
                return Ok(entities);
            }
            feedback = "\nYour previous answer listed no referring expressions. List them as `name: symbol` separated by commas.\n".into();
        }
        Err(StageError::new(stage, "no referring expressions found"))
    }

    /// One judgment per unordered pair. Never fails: unusable answers become
    /// UNRELATED with a warning.
    pub fn classify_entity_relations(&self, entities: &[ReferringExpression], ctx: &mut StageCtx) -> Vec<EntityRelation> {
        let mut out = Vec::new();
        for (i, a) in entities.iter().enumerate() {
            for b in &entities[i + 1..] {
                let relation = if a.surface.trim().eq_ignore_ascii_case(b.surface.trim()) {
                    Relation::Equal
                } else {
                    ctx.attempts += 1;
                    let answer = self.gateway.complete(
                        TemplateId::EntityRelation,
                        &bindings([("entity_a", a.surface.clone()), ("entity_b", b.surface.clone())]),
                        &ctx.log,
                    );
                    match answer.as_deref().map(parse::relation_answer) {
                        Ok(Some(r)) => r,
                        Ok(None) => {
                            ctx.warnings.push(format!(
                                "relation {} / {}: no numeric answer, taken as UNRELATED",
                                a.surface, b.surface
                            ));
                            Relation::Unrelated
                        }
                        Err(e) => {
                            ctx.warnings.push(format!(
                                "relation {} / {}: {e}; taken as UNRELATED",
                                a.surface, b.surface
                            ));
                            Relation::Unrelated
                        }
                    }
                };
                out.push(EntityRelation {
                    left: a.symbol.clone(),
                    right: b.symbol.clone(),
                    relation,
                });
            }
        }
        out
    }

    pub fn extract_properties(
        &self,
        ci: &ClaimImplication,
        entities: &[ReferringExpression],
        ctx: &mut StageCtx,
    ) -> Result<Vec<PropertyAtom>, StageError> {
        let stage = Stage::Properties;
        let mut parts = Vec::new();
        if !ci.claims.is_empty() {
            parts.push((AtomSource::Claim, ci.claims.join(" ")));
        }
        parts.push((AtomSource::Implication, ci.implication.clone()));

        let mut atoms: Vec<PropertyAtom> = Vec::new();
        for (source, sentence) in parts {
            let mut feedback = String::new();
            let mut found = None;
            for _ in 0..STAGE_ATTEMPTS {
                let answer = self.ask(
                    TemplateId::Properties,
                    bindings([
                        ("sentence", sentence.clone()),
                        ("referring_expressions", entity_list(entities)),
                        ("feedback", feedback.clone()),
                    ]),
                    ctx,
                    stage,
                )?;
                let raw = parse::property_atoms(&answer);
                let mut unknown = Vec::new();
                let resolved: Vec<PropertyAtom> = raw
                    .into_iter()
                    .map(|(predicate, args)| PropertyAtom {
                        predicate,
                        args: args
                            .into_iter()
                            .map(|a| {
                                resolve_symbol(&a, entities).unwrap_or_else(|| {
                                    unknown.push(a.clone());
                                    a
                                })
                            })
                            .collect(),
                        source,
                    })
                    .collect();
                if unknown.is_empty() && !resolved.is_empty() {
                    found = Some(resolved);
                    break;
                }
                feedback = if unknown.is_empty() {
                    "\nYour previous answer contained no properties. Answer as `Properties: Name(symbol, ...)`.\n".into()
                } else {
                    format!(
                        "\nYour previous answer used unknown referring expressions: {}. Use only these symbols: {}.\n",
                        unknown.join(", "),
                        entities.iter().map(|e| e.symbol.as_str()).collect::<Vec<_>>().join(", ")
                    )
                };
                found = if unknown.is_empty() { Some(Vec::new()) } else { None };
            }
            match found {
                Some(found) if found.is_empty() => ctx
                    .warnings
                    .push(format!("no properties found for the {} sentence", match source {
                        AtomSource::Claim => "claim",
                        AtomSource::Implication => "implication",
                    })),
                Some(found) => {
                    for atom in found {
                        if !atoms.iter().any(|a| a.same_atom(&atom)) {
                            atoms.push(atom);
                        }
                    }
                }
                None => {
                    return Err(StageError::new(stage, "properties refer to undeclared referring expressions"))
                }
            }
        }
        if atoms.is_empty() {
            return Err(StageError::new(stage, "no properties found"));
        }
        Ok(atoms)
    }

    /// Entailment over ordered pairs of atoms with distinct predicates, with
    /// referring expressions substituted for symbols. Returns the facts and
    /// every judgment made.
    pub fn retrieve_background(
        &self,
        atoms: &[PropertyAtom],
        entities: &[ReferringExpression],
        relations: &[EntityRelation],
        sentence: &str,
        ctx: &mut StageCtx,
    ) -> (Vec<BackgroundFact>, Vec<crate::llm::NliJudgment>) {
        let mut facts = Vec::new();
        let mut judgments = Vec::new();
        let mut seen = BTreeMap::new();
        for a in atoms {
            for b in atoms {
                if a.predicate == b.predicate {
                    continue;
                }
                let premise = surface_clause(a, entities);
                let hypothesis = surface_clause(b, entities);
                if seen.insert((premise.clone(), hypothesis.clone()), ()).is_some() {
                    continue;
                }
                ctx.attempts += 1;
                let judged = self.gateway.nli_entails(
                    &premise,
                    &hypothesis,
                    self.nli_backend,
                    Some(sentence),
                    self.nli_threshold,
                    &ctx.log,
                );
                let judgment = match judged {
                    Ok(j) => j,
                    Err(e) => {
                        ctx.warnings
                            .push(format!("entailment {premise} => {hypothesis}: {e}"));
                        continue;
                    }
                };
                if judgment.unparsed {
                    ctx.warnings.push(format!(
                        "entailment {premise} => {hypothesis}: no label in answer, taken as NOT_ENTAILMENT"
                    ));
                }
                if judgment.label == NliLabel::Entailment {
                    facts.push(BackgroundFact {
                        antecedent: a.clone(),
                        consequent: b.clone(),
                        judgment: judgment.clone(),
                        formula: background::realize(a, b, relations).to_string(),
                        realized: false,
                    });
                }
                judgments.push(judgment);
            }
        }
        (facts, judgments)
    }

    pub fn formulate_fol(
        &self,
        sentence: &str,
        entities: &[ReferringExpression],
        relations: &[EntityRelation],
        atoms: &[PropertyAtom],
        facts: &[BackgroundFact],
        ctx: &mut StageCtx,
    ) -> Result<Formulated, StageError> {
        let stage = Stage::Fol;
        let by_source = |s: AtomSource| list_or_none(atoms.iter().filter(|a| a.source == s).map(|a| a.to_string()));
        let base = bindings([
            ("sentence", sentence.to_string()),
            ("referring_expressions", entity_list(entities)),
            ("properties", list_or_none(atoms.iter().map(|a| a.to_string()))),
            (
                "relations",
                list_or_none(relations.iter().filter_map(|r| relation_text(r, entities))),
            ),
            ("background", list_or_none(facts.iter().map(|f| f.formula.clone()))),
            ("claim_properties", by_source(AtomSource::Claim)),
            ("implication_properties", by_source(AtomSource::Implication)),
        ]);
        let mut feedback = String::new();
        let mut last_error = String::new();
        for _ in 0..FOL_ATTEMPTS {
            let mut b = base.clone();
            b.insert("feedback".into(), feedback.clone());
            let answer = self.ask(TemplateId::FolFormulation, b, ctx, stage)?;
            let Some(text) = parse::fol_text(&answer) else {
                last_error = "empty answer".into();
                feedback = "\nYour previous answer contained no formula.\n".into();
                continue;
            };
            match nl2fol_core::parse_formula(&text) {
                Ok(formula) => return Ok(Formulated { text, formula }),
                Err(e) => {
                    last_error = format!("`{text}`: {e}");
                    feedback = format!(
                        "\nYour previous answer `{text}` could not be parsed: {e}. Reply with one formula on a single line.\n"
                    );
                }
            }
        }
        Err(StageError::new(stage, last_error))
    }

    /// Runs every stage. Never fails: problems end in an inconclusive
    /// classification, and the trace records where.
    pub fn classify(&self, text: &str) -> (Classification, PipelineTrace) {
        let mut trace = PipelineTrace::new(text, self.settings());
        let mut ctx = StageCtx::default();
        let result = self.run_stages(text, &mut trace, &mut ctx);
        if let Err(e) = result {
            trace.classification = Classification::Inconclusive {
                reason: InconclusiveReason::StageFailure,
                stage: Some(e.stage),
            };
        }
        for stage in Stage::ALL {
            if trace.stage(stage).is_none() {
                trace.stages.push(StageRecord {
                    stage,
                    status: StageStatus::Skipped,
                    attempts: 0,
                    error: None,
                    elapsed_ms: 0,
                });
            }
        }
        trace.warnings.append(&mut ctx.warnings);
        trace.llm_calls = ctx.log.take();
        (trace.classification.clone(), trace)
    }

    fn run_stages(&self, text: &str, trace: &mut PipelineTrace, ctx: &mut StageCtx) -> Result<(), StageError> {
        fn timed<T>(
            trace: &mut PipelineTrace,
            ctx: &mut StageCtx,
            stage: Stage,
            f: impl FnOnce(&mut StageCtx) -> Result<T, StageError>,
        ) -> Result<T, StageError> {
            ctx.attempts = 0;
            let start = Instant::now();
            let out = f(ctx);
            trace.stages.push(StageRecord {
                stage,
                status: if out.is_ok() { StageStatus::Ok } else { StageStatus::Failed },
                attempts: ctx.attempts,
                error: out.as_ref().err().map(|e| e.message.clone()),
                elapsed_ms: start.elapsed().as_millis() as u64,
            });
            out
        }

        let ci = timed(trace, ctx, Stage::ClaimImplication, |c| self.parse_claim_implication(text, c))?;
        trace.claim_implication = Some(ci.clone());

        let mut entities = timed(trace, ctx, Stage::Entities, |c| self.extract_entities(&ci, c))?;
        trace.entities = entities.clone();

        let relations = timed(trace, ctx, Stage::EntityRelations, |c| {
            Ok(self.classify_entity_relations(&entities, c))
        })?;
        trace.entity_relations = relations.clone();

        let atoms = timed(trace, ctx, Stage::Properties, |c| self.extract_properties(&ci, &entities, c))?;
        trace.properties = atoms.clone();

        let (mut facts, judgments) = timed(trace, ctx, Stage::Background, |c| {
            Ok(self.retrieve_background(&atoms, &entities, &relations, text, c))
        })?;
        trace.background = facts.clone();
        trace.nli_judgments = judgments;

        let formulated = timed(trace, ctx, Stage::Fol, |c| {
            self.formulate_fol(text, &entities, &relations, &atoms, &facts, c)
        })?;
        trace.fol_text = Some(formulated.text.clone());
        trace.formula = Some(formulated.formula.clone());

        reconcile_kinds(&mut entities, &formulated.formula);
        trace.entities = entities;
        for fact in &mut facts {
            let n = background::realizations(
                &formulated.formula,
                &fact.antecedent.predicate,
                &fact.consequent.predicate,
            );
            fact.realized = n == 1;
            if n != 1 {
                ctx.warnings.push(format!(
                    "background fact {} appears {n} times in the formula",
                    fact.formula
                ));
            }
        }
        trace.background = facts;

        let (_, signature, script) = timed(trace, ctx, Stage::Compile, |c| {
            c.attempts = 1;
            compile(&formulated.text).map_err(|e| StageError::new(Stage::Compile, e.to_string()))
        })?;
        ctx.warnings.extend(signature.warnings.iter().cloned());
        trace.signature = Some(signature);
        trace.smt = Some(script.render());

        let outcome = timed(trace, ctx, Stage::Solve, |c| {
            c.attempts = 1;
            Ok(run_solver(&script, &self.solver))
        })?;
        if outcome.verdict == Verdict::SolverError {
            ctx.warnings.push(format!("solver error: {}", outcome.diagnostics.trim()));
        }
        trace.classification = match outcome.verdict {
            Verdict::Unsat => Classification::Valid,
            Verdict::Unknown => Classification::Inconclusive {
                reason: InconclusiveReason::Unknown,
                stage: None,
            },
            Verdict::Timeout => Classification::Inconclusive {
                reason: InconclusiveReason::Timeout,
                stage: None,
            },
            Verdict::SolverError => Classification::Inconclusive {
                reason: InconclusiveReason::StageFailure,
                stage: Some(Stage::Solve),
            },
            Verdict::Sat => Classification::Fallacy {
                explanation: String::new(),
            },
        };
        let model = outcome.model.clone();
        trace.solver = Some(outcome);

        if let Some(model) = model {
            let start = Instant::now();
            let explanation = interpret_counterexample(&model, trace, &self.gateway, &ctx.log);
            trace.stages.push(StageRecord {
                stage: Stage::Interpret,
                status: if explanation.llm_failed { StageStatus::Failed } else { StageStatus::Ok },
                attempts: 1,
                error: explanation.llm_failed.then(|| "no explanation from the LLM".to_string()),
                elapsed_ms: start.elapsed().as_millis() as u64,
            });
            if explanation.llm_failed {
                ctx.warnings
                    .push("counterexample explanation unavailable; deterministic rendering only".into());
            }
            trace.classification = Classification::Fallacy {
                explanation: explanation
                    .text
                    .clone()
                    .unwrap_or_else(|| explanation.fallback.clone()),
            };
            trace.explanation = Some(explanation);
        }
        Ok(())
    }
}

/// Symbols bound somewhere in the final formula are quantified, the rest
/// constants.
fn reconcile_kinds(entities: &mut [ReferringExpression], f: &Formula) {
    let terms = f.terms();
    for e in entities {
        if terms.iter().any(|t| matches!(t, Term::Var(v) if *v == e.symbol)) {
            e.kind = ExprKind::Quantified;
        } else if terms.iter().any(|t| matches!(t, Term::Const(c) if *c == e.symbol)) {
            e.kind = ExprKind::Constant;
        }
    }
}

/// Merges duplicate surfaces (ignoring case) and assigns unique symbols,
/// deriving one from the surface text when none usable was given.
pub fn build_entities(items: Vec<(String, Option<String>)>) -> Vec<ReferringExpression> {
    let mut out: Vec<ReferringExpression> = Vec::new();
    for (surface, symbol) in items {
        if out.iter().any(|e| e.surface.eq_ignore_ascii_case(&surface)) {
            continue;
        }
        let taken = |s: &str| out.iter().any(|e| e.symbol == s);
        let explicit = symbol.filter(|s| !taken(s));
        let kind = if explicit.is_some() {
            ExprKind::Quantified
        } else {
            ExprKind::Constant
        };
        let symbol = explicit.unwrap_or_else(|| {
            let base = parse::identifier_for(&surface);
            std::iter::once(base.clone())
                .chain((2..).map(|i| format!("{base}{i}")))
                .find(|s| !taken(s))
                .expect("unbounded candidates")
        });
        out.push(ReferringExpression {
            surface,
            symbol,
            kind,
        });
    }
    out
}

fn resolve_symbol(arg: &str, entities: &[ReferringExpression]) -> Option<String> {
    entities
        .iter()
        .find(|e| e.symbol == arg)
        .or_else(|| {
            entities.iter().find(|e| {
                e.surface.eq_ignore_ascii_case(arg) || parse::identifier_for(&e.surface) == arg
            })
        })
        .map(|e| e.symbol.clone())
}

/// `Pred(surface, ...)` with each symbol replaced by its referring
/// expression.
pub fn surface_clause(atom: &PropertyAtom, entities: &[ReferringExpression]) -> String {
    let mapping: BTreeMap<String, String> = entities
        .iter()
        .map(|e| (e.symbol.clone(), parse::identifier_for(&e.surface)))
        .collect();
    let f = Formula::atom(
        atom.predicate.clone(),
        atom.args
            .iter()
            .map(|a| nl2fol_core::Arg::Term(Term::Const(a.clone())))
            .collect(),
    );
    nl2fol_core::substitute(&f, &mapping)
        .map(|g| g.to_string())
        .unwrap_or_else(|_| f.to_string())
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("trace has no formula text")]
    NoFormula,
    #[error(transparent)]
    Compile(#[from] CompileError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub outcome: SolverOutcome,
    /// The recompiled script equals the one stored in the trace.
    pub script_matches: bool,
    /// The fresh verdict classifies the same way as the stored one.
    pub agrees: bool,
}

/// Recompiles and re-solves a stored trace; no LLM involved.
pub fn replay_trace(trace: &PipelineTrace, solver: &SolverConfig) -> Result<ReplayOutcome, ReplayError> {
    let text = trace.fol_text.as_deref().ok_or(ReplayError::NoFormula)?;
    let (_, _, script) = compile(text)?;
    let rendered = script.render();
    let script_matches = trace.smt.as_deref() == Some(rendered.as_str());
    let outcome = run_solver_text(&rendered, &script, solver);
    let agrees = trace.classification.agrees_with(Some(outcome.verdict));
    Ok(ReplayOutcome {
        outcome,
        script_matches,
        agrees,
    })
}

/// Writes `<dir>/<hash>.json` atomically and returns the path.
pub fn write_trace(dir: &Path, trace: &PipelineTrace) -> io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.json", trace.file_stem()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    serde_json::to_writer_pretty(&mut tmp, trace).map_err(io::Error::other)?;
    tmp.write_all(b"\n")?;
    tmp.persist(&path).map_err(|e| e.error)?;
    Ok(path)
}

pub fn read_trace(path: &Path) -> io::Result<PipelineTrace> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}
