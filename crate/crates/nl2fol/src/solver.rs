//! External SMT solver invocation.
//!
//! The script is written to a temp file whose path is passed on the command
//! line. A first run checks satisfiability only; a model is requested in a
//! second run only when the answer is `sat`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use nl2fol_core::smt::{SmtScript, GET_MODEL};
use nl2fol_core::{parse_model, Model};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SOLVER_ENV: &str = "NL2FOL_SOLVER";
pub const DEFAULT_TIMEOUT_SECS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub executable: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_true")]
    pub finite_model_find: bool,
}

fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT_SECS
}

fn default_true() -> bool {
    true
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            executable: std::env::var_os(SOLVER_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("z3")),
            args: Vec::new(),
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            finite_model_find: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverConfigError {
    #[error("solver timeout must be positive, got {0}")]
    BadTimeout(f64),
    #[error("solver executable `{0}` not found or not runnable")]
    NotFound(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverFamily {
    Z3,
    Cvc,
    Other,
}

impl SolverConfig {
    pub fn with_executable(executable: impl Into<PathBuf>) -> Self {
        SolverConfig {
            executable: executable.into(),
            ..SolverConfig::default()
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs.max(0.0))
    }

    pub fn family(&self) -> SolverFamily {
        let name = self
            .executable
            .file_name()
            .map(|n| n.to_string_lossy().to_lowercase())
            .unwrap_or_default();
        if name.starts_with("z3") {
            SolverFamily::Z3
        } else if name.starts_with("cvc") {
            SolverFamily::Cvc
        } else {
            SolverFamily::Other
        }
    }

    /// Checks the timeout and that the executable resolves to a file.
    pub fn validate(&self) -> Result<PathBuf, SolverConfigError> {
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return Err(SolverConfigError::BadTimeout(self.timeout_secs));
        }
        resolve_executable(&self.executable)
            .ok_or_else(|| SolverConfigError::NotFound(self.executable.display().to_string()))
    }

    fn command_args(&self, script_path: &Path) -> Vec<String> {
        let mut args = Vec::new();
        match self.family() {
            SolverFamily::Z3 => args.push("-smt2".into()),
            SolverFamily::Cvc => {
                args.push("--lang=smt2".into());
                args.push("--produce-models".into());
                if self.finite_model_find {
                    args.push("--finite-model-find".into());
                }
            }
            SolverFamily::Other => {}
        }
        args.extend(self.args.iter().cloned());
        args.push(script_path.display().to_string());
        args
    }
}

fn resolve_executable(exe: &Path) -> Option<PathBuf> {
    if exe.components().count() > 1 {
        return exe.is_file().then(|| exe.to_path_buf());
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|dir| dir.join(exe))
        .find(|p| p.is_file())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Sat,
    Unsat,
    Unknown,
    Timeout,
    SolverError,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Sat => "sat",
            Verdict::Unsat => "unsat",
            Verdict::Unknown => "unknown",
            Verdict::Timeout => "timeout",
            Verdict::SolverError => "solver-error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOutcome {
    pub verdict: Verdict,
    /// Present exactly when `verdict` is `Sat`.
    pub model: Option<Model>,
    pub raw: String,
    /// Solver stderr or a description of the failure.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub diagnostics: String,
    pub wall_time_ms: u64,
}

struct RawRun {
    stdout: String,
    stderr: String,
    exit_ok: bool,
    timed_out: bool,
}

fn run_process(cfg: &SolverConfig, text: &str, deadline: Instant) -> Result<RawRun, String> {
    let mut file = tempfile::Builder::new()
        .prefix("nl2fol-")
        .suffix(".smt2")
        .tempfile()
        .map_err(|e| format!("cannot create temp file: {e}"))?;
    file.write_all(text.as_bytes())
        .and_then(|_| file.flush())
        .map_err(|e| format!("cannot write temp file: {e}"))?;

    let mut cmd = Command::new(&cfg.executable);
    cmd.args(cfg.command_args(file.path()))
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
    let mut child = cmd
        .spawn()
        .map_err(|e| format!("cannot launch `{}`: {e}", cfg.executable.display()))?;

    let mut out_pipe = child.stdout.take().expect("stdout piped");
    let mut err_pipe = child.stderr.take().expect("stderr piped");
    let out_reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = out_pipe.read_to_string(&mut s);
        s
    });
    let err_reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = err_pipe.read_to_string(&mut s);
        s
    });

    let mut timed_out = false;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) if Instant::now() >= deadline => {
                timed_out = true;
                kill_tree(&mut child);
                break child.wait().ok();
            }
            Ok(None) => thread::sleep(Duration::from_millis(2)),
            Err(_) => {
                kill_tree(&mut child);
                break child.wait().ok();
            }
        }
    };
    // helpers a wrapper script left behind would otherwise hold the pipes open
    kill_tree(&mut child);
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();
    Ok(RawRun {
        stdout,
        stderr,
        exit_ok: status.is_some_and(|s| s.success()),
        timed_out,
    })
}

/// Kills the child and everything in its process group.
fn kill_tree(child: &mut Child) {
    #[cfg(unix)]
    if let Ok(pid) = i32::try_from(child.id()) {
        // SAFETY: plain syscall; a stale group only yields ESRCH
        unsafe {
            libc::kill(-pid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
}

fn first_verdict(stdout: &str) -> Option<Verdict> {
    stdout
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .and_then(|l| match l {
            "sat" => Some(Verdict::Sat),
            "unsat" => Some(Verdict::Unsat),
            "unknown" => Some(Verdict::Unknown),
            "timeout" => Some(Verdict::Timeout),
            _ => None,
        })
}

fn strip_get_model(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        if line.trim() != GET_MODEL {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

fn with_get_model(text: &str) -> String {
    let mut out = strip_get_model(text);
    out.push_str(GET_MODEL);
    out.push('\n');
    out
}

/// Runs the solver on `script`.
pub fn run_solver(script: &SmtScript, cfg: &SolverConfig) -> SolverOutcome {
    run_solver_text(&script.render(), script, cfg)
}

/// Runs the solver on raw script text; `decls` supplies the declarations used
/// to interpret a model.
pub fn run_solver_text(text: &str, decls: &SmtScript, cfg: &SolverConfig) -> SolverOutcome {
    let start = Instant::now();
    let deadline = start + cfg.timeout();
    let elapsed = |start: Instant| start.elapsed().as_millis() as u64;
    let failure = |verdict: Verdict, raw: String, diagnostics: String| SolverOutcome {
        verdict,
        model: None,
        raw,
        diagnostics,
        wall_time_ms: elapsed(start),
    };

    let check = match run_process(cfg, &strip_get_model(text), deadline) {
        Ok(run) => run,
        Err(msg) => return failure(Verdict::SolverError, String::new(), msg),
    };
    if check.timed_out {
        return failure(Verdict::Timeout, check.stdout, "deadline exceeded".into());
    }
    let verdict = first_verdict(&check.stdout);
    let has_error = check.stdout.contains("(error");
    match verdict {
        Some(v) if !has_error => {
            if v != Verdict::Sat {
                return failure(v, check.stdout, check.stderr);
            }
        }
        _ => {
            let mut diag = check.stderr;
            for line in check.stdout.lines().filter(|l| l.starts_with("(error")) {
                diag.push_str(line);
                diag.push('\n');
            }
            if !check.exit_ok && diag.is_empty() {
                diag = "solver exited with failure status".into();
            }
            return failure(Verdict::SolverError, check.stdout, diag);
        }
    }

    // sat: retrieve the model
    let full = match run_process(cfg, &with_get_model(text), deadline) {
        Ok(run) => run,
        Err(msg) => return failure(Verdict::SolverError, check.stdout, msg),
    };
    if full.timed_out {
        return failure(Verdict::Timeout, full.stdout, "deadline exceeded during model retrieval".into());
    }
    if first_verdict(&full.stdout) != Some(Verdict::Sat) {
        return failure(
            Verdict::SolverError,
            full.stdout,
            "verdict changed between check and model retrieval".into(),
        );
    }
    let model_text = full
        .stdout
        .trim_start()
        .strip_prefix("sat")
        .unwrap_or_default();
    let (model, diagnostics) = match parse_model(model_text, decls) {
        Ok(m) => (m, full.stderr),
        Err(e) => (
            Model {
                unparsed: vec![model_text.trim().to_string()],
                incomplete: true,
                ..Model::default()
            },
            format!("model not parsed: {e}"),
        ),
    };
    SolverOutcome {
        verdict: Verdict::Sat,
        model: Some(model),
        raw: full.stdout,
        diagnostics,
        wall_time_ms: elapsed(start),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_detection() {
        assert_eq!(SolverConfig::with_executable("/opt/bin/z3").family(), SolverFamily::Z3);
        assert_eq!(SolverConfig::with_executable("cvc5").family(), SolverFamily::Cvc);
        assert_eq!(SolverConfig::with_executable("yices-smt2").family(), SolverFamily::Other);
    }

    #[test]
    fn cvc_gets_finite_model_flag() {
        let cfg = SolverConfig::with_executable("cvc4");
        let args = cfg.command_args(Path::new("/tmp/x.smt2"));
        assert!(args.contains(&"--finite-model-find".to_string()));
        assert_eq!(args.last().unwrap(), "/tmp/x.smt2");
        let cfg = SolverConfig {
            finite_model_find: false,
            ..cfg
        };
        assert!(!cfg.command_args(Path::new("x")).contains(&"--finite-model-find".to_string()));
    }

    #[test]
    fn validation() {
        let mut cfg = SolverConfig::with_executable("definitely-not-a-solver-xyz");
        assert!(matches!(cfg.validate(), Err(SolverConfigError::NotFound(_))));
        cfg.timeout_secs = 0.0;
        assert!(matches!(cfg.validate(), Err(SolverConfigError::BadTimeout(_))));
    }

    #[test]
    fn get_model_handling() {
        let text = "(check-sat)\n(get-model)\n";
        assert_eq!(strip_get_model(text), "(check-sat)\n");
        assert_eq!(with_get_model("(check-sat)\n"), text);
        assert_eq!(with_get_model(text), text);
    }

    #[test]
    fn verdict_line() {
        assert_eq!(first_verdict("\nsat\n(model)"), Some(Verdict::Sat));
        assert_eq!(first_verdict("unsat"), Some(Verdict::Unsat));
        assert_eq!(first_verdict("(error \"x\")\nsat"), None);
    }
}
