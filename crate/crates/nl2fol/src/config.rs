//! Run configuration: defaults, then a JSON file, then environment, then
//! command-line flags (applied by the caller).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{UnknownAs, DEFAULT_CONNECTIVE};
use crate::llm::{Mode, NliBackend, DEFAULT_THRESHOLD, KEY_ENV, MODEL_ENV, URL_ENV};
use crate::solver::{SolverConfig, SOLVER_ENV};

pub const FIXTURES_ENV: &str = "NL2FOL_FIXTURES";
pub const MODE_ENV: &str = "NL2FOL_MODE";
pub const NLI_URL_ENV: &str = "NL2FOL_NLI_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub solver: SolverConfig,
    pub llm: crate::llm::LlmConfig,
    /// `None` picks replay when the fixture directory exists, live otherwise.
    pub mode: Option<Mode>,
    pub fixtures: Option<PathBuf>,
    pub nli_backend: NliBackend,
    pub nli_threshold: f64,
    pub nli_url: Option<String>,
    pub unknown_as: UnknownAs,
    pub parallelism: usize,
    pub connective: String,
    pub out: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            solver: SolverConfig::with_executable("z3"),
            llm: Default::default(),
            mode: None,
            fixtures: None,
            nli_backend: NliBackend::default(),
            nli_threshold: DEFAULT_THRESHOLD,
            nli_url: None,
            unknown_as: UnknownAs::default(),
            parallelism: 4,
            connective: DEFAULT_CONNECTIVE.into(),
            out: PathBuf::from("nl2fol-out"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("{var}: {message}")]
    Env { var: &'static str, message: String },
}

impl Config {
    /// Defaults overlaid with `file` (if any) and the process environment.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match file {
            Some(path) => Config::from_file(path)?,
            None => Config::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let err = |message: String| ConfigError::File {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let var = |k: &str| var(k).filter(|v| !v.is_empty());
        if let Some(v) = var(SOLVER_ENV) {
            self.solver.executable = v.into();
        }
        if let Some(v) = var(URL_ENV) {
            self.llm.url = Some(v);
        }
        if let Some(v) = var(MODEL_ENV) {
            self.llm.model = v;
        }
        if let Some(v) = var(KEY_ENV) {
            self.llm.key = Some(v);
        }
        if let Some(v) = var(NLI_URL_ENV) {
            self.nli_url = Some(v);
        }
        if let Some(v) = var(FIXTURES_ENV) {
            self.fixtures = Some(v.into());
        }
        if let Some(v) = var(MODE_ENV) {
            self.mode = Some(v.parse().map_err(|message| ConfigError::Env { var: MODE_ENV, message })?);
        }
        Ok(())
    }

    pub fn fixture_dir(&self) -> PathBuf {
        self.fixtures
            .clone()
            .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("llm"))
    }

    pub fn resolved_mode(&self) -> Mode {
        self.mode.unwrap_or_else(|| {
            if self.fixture_dir().is_dir() {
                Mode::Replay
            } else {
                Mode::Live
            }
        })
    }
}
