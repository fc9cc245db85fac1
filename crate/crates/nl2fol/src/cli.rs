//! Command-line interface.

use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nl2fol_core::{compile, CompileError, SmtScript};

use crate::config::Config;
use crate::eval::{
    balanced_sample, evaluate, load_dataset, read_report, run_baseline, write_report, DatasetFormat, EvalOptions,
    UnknownAs,
};
use crate::llm::{FixtureStore, Gateway, Mode, NliBackend};
use crate::pipeline::{read_trace, render_model, replay_trace, write_trace, Classification, Pipeline};
use crate::solver::{run_solver_text, Verdict};

pub mod exit {
    pub const OK: u8 = 0;
    pub const FALLACY: u8 = 1;
    pub const PARSE: u8 = 2;
    pub const SORT: u8 = 3;
    pub const SOLVER_ERROR: u8 = 3;
    pub const INCONCLUSIVE: u8 = 4;
    pub const CONFIG: u8 = 5;
}

#[derive(Debug, Parser)]
#[command(name = "nl2fol", version, about = "Detect logical fallacies by translating arguments to first-order logic")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Solver executable.
    #[arg(long, global = true)]
    pub solver: Option<PathBuf>,
    /// Solver time limit in seconds.
    #[arg(long, global = true)]
    pub solver_timeout: Option<f64>,
    #[arg(long, global = true)]
    pub llm_url: Option<String>,
    #[arg(long, global = true)]
    pub llm_model: Option<String>,
    #[arg(long, global = true)]
    pub llm_key: Option<String>,
    /// live, record or replay.
    #[arg(long, global = true, conflicts_with_all = ["live", "record", "replay"])]
    pub mode: Option<Mode>,
    #[arg(long, global = true, conflicts_with_all = ["record", "replay"])]
    pub live: bool,
    #[arg(long, global = true, conflicts_with = "replay")]
    pub record: bool,
    #[arg(long, global = true)]
    pub replay: bool,
    /// Fixture directory for record and replay.
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,
    /// llm, llm_with_context or external_classifier.
    #[arg(long, global = true)]
    pub nli_backend: Option<NliBackend>,
    #[arg(long, global = true)]
    pub nli_threshold: Option<f64>,
    /// Output directory for traces and reports.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    pub json: bool,
}

impl GlobalArgs {
    fn mode(&self) -> Option<Mode> {
        self.mode.or(if self.live {
            Some(Mode::Live)
        } else if self.record {
            Some(Mode::Record)
        } else if self.replay {
            Some(Mode::Replay)
        } else {
            None
        })
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a formula to an SMT-LIB script.
    Compile {
        /// Formula file, or `-` for stdin.
        input: Option<PathBuf>,
        /// Formula text given inline.
        #[arg(long, short = 'e', conflicts_with = "input")]
        formula: Option<String>,
    },
    /// Run the solver on a script, or on a formula compiled first.
    Solve {
        /// `.smt2` script or formula file, or `-` for stdin.
        input: Option<PathBuf>,
        #[arg(long, short = 'e', conflicts_with = "input")]
        formula: Option<String>,
    },
    /// Classify one argument.
    Classify {
        /// The argument text; read from stdin when absent.
        text: Option<String>,
        /// Do not write a trace file.
        #[arg(long)]
        no_trace: bool,
    },
    /// Re-solve a stored trace and show its counterexample.
    Explain { trace: PathBuf },
    /// Evaluate the pipeline on a labelled dataset.
    #[command(alias = "evaluate")]
    Eval(EvalArgs),
    /// Evaluate the single-prompt classifier on a labelled dataset.
    Baseline(EvalArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// One or more files, pooled; with several, ids get a `<file stem>:` prefix.
    #[arg(required = true, num_args = 1..)]
    pub dataset: Vec<PathBuf>,
    /// jsonl, csv or snli; guessed from each file's extension otherwise.
    #[arg(long)]
    pub format: Option<DatasetFormat>,
    /// Balanced sample with this many examples per class.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// How inconclusive results are counted: fallacy, valid or drop.
    #[arg(long)]
    pub unknown_as: Option<UnknownAs>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Earlier report to compare against.
    #[arg(long, conflicts_with = "baseline")]
    pub compare: Option<PathBuf>,
    /// Also run this baseline and compare against it (only `end_to_end`).
    #[arg(long, value_parser = ["end_to_end"])]
    pub baseline: Option<String>,
}

struct Failure(u8, String);

impl<E: std::fmt::Display> From<(u8, E)> for Failure {
    fn from((code, e): (u8, E)) -> Self {
        Failure(code, e.to_string())
    }
}

type CmdResult = Result<u8, Failure>;

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn config(g: &GlobalArgs) -> Result<Config, Failure> {
    let mut cfg = Config::load(g.config.as_deref()).map_err(|e| Failure::from((exit::CONFIG, e)))?;
    if let Some(s) = &g.solver {
        cfg.solver.executable = s.clone();
    }
    if let Some(t) = g.solver_timeout {
        cfg.solver.timeout_secs = t;
    }
    if let Some(u) = &g.llm_url {
        cfg.llm.url = Some(u.clone());
    }
    if let Some(m) = &g.llm_model {
        cfg.llm.model = m.clone();
    }
    if let Some(k) = &g.llm_key {
        cfg.llm.key = Some(k.clone());
    }
    if let Some(m) = g.mode() {
        cfg.mode = Some(m);
    }
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    if let Some(f) = &g.fixtures {
        cfg.fixtures = Some(f.clone());
    }
    if let Some(b) = g.nli_backend {
        cfg.nli_backend = b;
    }
    if let Some(t) = g.nli_threshold {
        cfg.nli_threshold = t;
    }
    Ok(cfg)
}

fn pipeline(cfg: &Config) -> Result<Pipeline, Failure> {
    let fail = |e: &dyn std::fmt::Display| Failure(exit::CONFIG, e.to_string());
    cfg.solver.validate().map_err(|e| fail(&e))?;
    let mode = cfg.resolved_mode();
    let store = match mode {
        Mode::Live => None,
        Mode::Replay => {
            let dir = cfg.fixture_dir();
            if !dir.is_dir() {
                return Err(fail(&format!("fixture directory {} does not exist", dir.display())));
            }
            Some(FixtureStore::new(dir))
        }
        Mode::Record => Some(FixtureStore::new(cfg.fixture_dir())),
    };
    let gateway = Gateway::from_config(mode, cfg.llm.clone(), store, cfg.nli_url.clone()).map_err(|e| fail(&e))?;
    let mut p = Pipeline::new(gateway, cfg.solver.clone());
    p.nli_backend = cfg.nli_backend;
    p.nli_threshold = cfg.nli_threshold;
    Ok(p)
}

fn read_input(path: Option<&Path>, inline: Option<&str>) -> Result<String, Failure> {
    if let Some(s) = inline {
        return Ok(s.to_string());
    }
    match path {
        Some(p) if p != Path::new("-") => {
            std::fs::read_to_string(p).map_err(|e| Failure(exit::PARSE, format!("{}: {e}", p.display())))
        }
        _ => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| Failure(exit::PARSE, e.to_string()))?;
            Ok(s)
        }
    }
}

fn compile_code(e: &CompileError) -> u8 {
    match e {
        CompileError::Parse(_) => exit::PARSE,
        CompileError::Sort(_) | CompileError::Emit(_) => exit::SORT,
    }
}

fn print_json<T: serde::Serialize>(v: &T) {
    let mut out = io::stdout().lock();
    let _ = serde_json::to_writer_pretty(&mut out, v);
    let _ = writeln!(out);
}

fn classification_code(c: &Classification) -> u8 {
    match c {
        Classification::Valid => exit::OK,
        Classification::Fallacy { .. } => exit::FALLACY,
        Classification::Inconclusive { .. } => exit::INCONCLUSIVE,
    }
}

fn run(cli: Cli) -> CmdResult {
    let g = &cli.global;
    match cli.command {
        Command::Compile { input, formula } => {
            let out = g.out.clone();
            let src = read_input(input.as_deref(), formula.as_deref())?;
            let (f, sig, script) = compile(&src).map_err(|e| Failure(compile_code(&e), e.to_string()))?;
            let text = script.render();
            if g.json {
                print_json(&serde_json::json!({ "formula": f, "signature": sig, "smt": text }));
            } else if out.is_none() {
                print!("{text}");
            }
            if let Some(path) = out {
                std::fs::write(&path, &text).map_err(|e| Failure(exit::CONFIG, format!("{}: {e}", path.display())))?;
            }
            Ok(exit::OK)
        }
        Command::Solve { input, formula } => {
            let cfg = config(g)?;
            cfg.solver.validate().map_err(|e| Failure::from((exit::CONFIG, e)))?;
            let src = read_input(input.as_deref(), formula.as_deref()).map_err(|Failure(_, m)| Failure(exit::SOLVER_ERROR, m))?;
            let is_script = formula.is_none()
                && (input.as_ref().is_some_and(|p| p.extension().is_some_and(|x| x == "smt2"))
                    || src.trim_start().starts_with(['(', ';']));
            let (text, decls) = if is_script {
                // the solver gets the text even when the declarations can't be
                // read back; its own diagnostics then decide the exit code
                let decls = SmtScript::parse(&src).unwrap_or_else(|_| SmtScript {
                    logic: String::new(),
                    sorts: Vec::new(),
                    functions: Vec::new(),
                    assertion: String::new(),
                    commands: Vec::new(),
                });
                (src, decls)
            } else {
                let (_, _, script) = compile(&src).map_err(|e| Failure(compile_code(&e), e.to_string()))?;
                (script.render(), script)
            };
            let outcome = run_solver_text(&text, &decls, &cfg.solver);
            if g.json {
                print_json(&outcome);
            } else {
                println!("{}", outcome.verdict.as_str().to_ascii_lowercase());
                if let Some(m) = &outcome.model {
                    for line in render_model(m, &[]).lines() {
                        println!("  {line}");
                    }
                }
                if outcome.verdict == Verdict::SolverError {
                    eprintln!("{}", outcome.diagnostics.trim_end());
                }
            }
            Ok(match outcome.verdict {
                Verdict::Sat | Verdict::Unsat => exit::OK,
                Verdict::Unknown | Verdict::Timeout => exit::INCONCLUSIVE,
                Verdict::SolverError => exit::SOLVER_ERROR,
            })
        }
        Command::Classify { text, no_trace } => {
            let cfg = config(g)?;
            let p = pipeline(&cfg)?;
            let text = match text {
                Some(t) => t,
                None => read_input(None, None)?,
            };
            let (c, trace) = p.classify(text.trim());
            if !no_trace {
                let path = write_trace(&cfg.out.join("traces"), &trace).map_err(|e| Failure::from((exit::CONFIG, e)))?;
                eprintln!("trace: {}", path.display());
            }
            if g.json {
                print_json(&trace);
            } else {
                print_classification(&c, &trace);
            }
            Ok(classification_code(&c))
        }
        Command::Explain { trace } => {
            let cfg = config(g)?;
            cfg.solver.validate().map_err(|e| Failure::from((exit::CONFIG, e)))?;
            let t = read_trace(&trace).map_err(|e| Failure(exit::PARSE, format!("{}: {e}", trace.display())))?;
            let r = replay_trace(&t, &cfg.solver).map_err(|e| Failure::from((exit::PARSE, e)))?;
            if g.json {
                print_json(&serde_json::json!({
                    "verdict": r.outcome.verdict,
                    "script_matches": r.script_matches,
                    "agrees": r.agrees,
                    "classification": t.classification,
                    "explanation": t.explanation,
                }));
            } else {
                println!("input:   {}", t.input);
                if let Some(f) = &t.formula {
                    println!("formula: {f}");
                }
                println!("verdict: {}", r.outcome.verdict.as_str().to_ascii_lowercase());
                println!("stored:  {}", t.classification.label());
                if !r.script_matches {
                    println!("note: recompiled script differs from the stored one");
                }
                if let Some(m) = &r.outcome.model {
                    println!("counterexample:");
                    for line in render_model(m, &t.entities).lines() {
                        println!("  {line}");
                    }
                }
                if let Some(text) = t.explanation.as_ref().and_then(|e| e.text.as_ref()) {
                    println!("explanation: {text}");
                }
            }
            Ok(match r.outcome.verdict {
                Verdict::Unsat => exit::OK,
                Verdict::Sat => exit::FALLACY,
                _ => exit::INCONCLUSIVE,
            })
        }
        Command::Eval(args) => run_eval(g, args, false),
        Command::Baseline(args) => run_eval(g, args, true),
    }
}

fn print_classification(c: &Classification, trace: &crate::pipeline::PipelineTrace) {
    match c {
        Classification::Inconclusive { reason, stage } => {
            let reason = serde_json::to_value(reason).ok();
            let reason = reason.as_ref().and_then(|v| v.as_str()).unwrap_or("?");
            match stage {
                Some(s) => {
                    println!("inconclusive ({reason} at {})", s.as_str());
                    if let Some(err) = trace.stage(*s).and_then(|r| r.error.as_ref()) {
                        eprintln!("{}: {err}", s.as_str());
                    }
                }
                None => println!("inconclusive ({reason})"),
            }
        }
        _ => println!("{}", c.label()),
    }
    if let Some(f) = &trace.formula {
        println!("formula: {f}");
    }
    if let Some(e) = &trace.explanation {
        println!("counterexample:");
        for line in e.fallback.lines() {
            println!("  {line}");
        }
        if let Some(text) = &e.text {
            println!("explanation: {text}");
        }
    }
    for w in &trace.warnings {
        eprintln!("warning: {w}");
    }
}

fn run_eval(g: &GlobalArgs, args: EvalArgs, baseline: bool) -> CmdResult {
    let mut cfg = config(g)?;
    if baseline && args.baseline.is_some() {
        return Err(Failure(exit::CONFIG, "--baseline applies to eval only".into()));
    }
    if let Some(u) = args.unknown_as {
        cfg.unknown_as = u;
    }
    if let Some(n) = args.parallelism {
        cfg.parallelism = n;
    }
    let mut data = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for path in &args.dataset {
        let format = args
            .format
            .or_else(|| DatasetFormat::from_path(path))
            .ok_or_else(|| Failure(exit::CONFIG, format!("{}: cannot tell the format; pass --format", path.display())))?;
        let mut part = load_dataset(path, format, &cfg.connective).map_err(|e| Failure(exit::PARSE, format!("{}: {e}", path.display())))?;
        if args.dataset.len() > 1 {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            for ex in &mut part {
                ex.id = format!("{stem}:{}", ex.id);
            }
        }
        for ex in &part {
            if !seen.insert(ex.id.clone()) {
                return Err(Failure(exit::PARSE, format!("duplicate id `{}`", ex.id)));
            }
        }
        data.extend(part);
    }
    if args.sample.is_some() {
        data = balanced_sample(&data, args.sample, args.seed);
    }
    let compare = match &args.compare {
        Some(p) => Some(read_report(p).map_err(|e| Failure(exit::PARSE, format!("{}: {e}", p.display())))?),
        None => None,
    };
    let p = pipeline(&cfg)?;
    let opts = EvalOptions {
        unknown_as: cfg.unknown_as,
        parallelism: cfg.parallelism,
        trace_dir: (!baseline).then(|| cfg.out.join("traces")),
        dataset_name: args
            .dataset
            .iter()
            .map(|d| d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
            .collect::<Vec<_>>()
            .join("+"),
    };
    let seed = args.sample.is_some().then_some(args.seed);
    let mut report = if baseline {
        run_baseline(&data, &p, &opts)
    } else {
        evaluate(&data, &p, &opts)
    };
    report.seed = seed;
    let io_fail = |e: io::Error| Failure::from((exit::CONFIG, e));
    let compare = match (compare, &args.baseline) {
        (Some(c), _) => Some(c),
        (None, Some(_)) => {
            let mut b = run_baseline(&data, &p, &opts);
            b.seed = seed;
            write_report(&cfg.out.join("baseline"), &b, None).map_err(io_fail)?;
            Some(b)
        }
        (None, None) => None,
    };
    write_report(&cfg.out, &report, compare.as_ref()).map_err(io_fail)?;
    if g.json {
        print_json(&report);
    } else {
        print!("{}", crate::eval::render_table(&report, compare.as_ref()));
    }
    Ok(exit::OK)
}
