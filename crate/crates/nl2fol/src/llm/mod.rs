//! Completion and entailment requests, over HTTP or recorded fixtures.

mod backend;
mod nli;
mod store;
mod template;

use std::fmt;
use std::str::FromStr;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{HttpBackend, ScriptedBackend, ScriptedResponses};
pub use nli::{parse_nli_label, NliBackend, NliJudgment, NliLabel, DEFAULT_THRESHOLD};
pub use store::{request_hash, FixtureEntry, FixtureStore};
pub use template::{bindings, placeholders, Bindings, PromptTemplate, TemplateError, TemplateId};

pub const URL_ENV: &str = "NL2FOL_LLM_URL";
pub const MODEL_ENV: &str = "NL2FOL_LLM_MODEL";
pub const KEY_ENV: &str = "NL2FOL_LLM_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Network only, nothing written.
    Live,
    /// Network, with every new exchange written to the fixture store.
    Record,
    /// Fixture store only.
    #[default]
    Replay,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Live => "live",
            Mode::Record => "record",
            Mode::Replay => "replay",
        }
    }

    pub fn uses_network(&self) -> bool {
        !matches!(self, Mode::Replay)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Mode::Live),
            "record" => Ok(Mode::Record),
            "replay" => Ok(Mode::Replay),
            _ => Err(format!("unknown mode `{s}` (live, record, replay)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub template: TemplateId,
    pub prompt: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl CompletionRequest {
    pub fn hash(&self) -> String {
        request_hash(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    #[serde(default)]
    pub usage: Option<Usage>,
    #[serde(default)]
    pub latency_ms: u64,
}

/// Request sent to an external entailment classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierRequest {
    pub premise: String,
    pub hypothesis: String,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierResponse {
    pub entailment: f64,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("no recorded response for {template} request {hash}")]
    MissingFixture { template: String, hash: String },
    #[error("request failed after {attempts} attempts: {message}")]
    Http { attempts: u32, message: String },
    #[error("empty response from {0}")]
    EmptyResponse(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("llm configuration: {0}")]
    Config(String),
    #[error("fixture store: {0}")]
    Store(#[from] std::io::Error),
    #[error("{0}")]
    Backend(String),
}

impl LlmError {
    fn retryable(&self) -> bool {
        matches!(self, LlmError::Http { .. })
    }
}

/// A source of completions.
pub trait Backend: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError>;

    fn classify(&self, req: &ClassifierRequest) -> Result<ClassifierResponse, LlmError> {
        let _ = req;
        Err(LlmError::Config("backend has no entailment classifier".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default = "default_model")]
    pub model: String,
    /// Never serialized; supplied via env or flag.
    #[serde(skip)]
    pub key: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_attempts")]
    pub attempts: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_model() -> String {
    "gpt-4o".into()
}
fn default_max_tokens() -> u32 {
    512
}
fn default_attempts() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}
fn default_in_flight() -> usize {
    4
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            url: None,
            model: default_model(),
            key: None,
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            attempts: default_attempts(),
            backoff_ms: default_backoff(),
            max_in_flight: default_in_flight(),
        }
    }
}

/// Counting semaphore bounding concurrent backend calls.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn new(n: usize) -> Self {
        Slots {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut free = self.free.lock().unwrap();
            while *free == 0 {
                free = self.cv.wait(free).unwrap();
            }
            *free -= 1;
        }
        let out = f();
        *self.free.lock().unwrap() += 1;
        self.cv.notify_one();
        out
    }
}

/// One request/response exchange, as recorded in traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub template: String,
    pub hash: String,
    pub source: CallSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallSource {
    Fixture,
    Backend,
    ShortCircuit,
}

pub struct Gateway {
    mode: Mode,
    cfg: LlmConfig,
    backend: Option<Box<dyn Backend>>,
    store: Option<FixtureStore>,
    slots: Slots,
}

/// Exchanges made during one run, in order.
#[derive(Debug, Default)]
pub struct CallLog(Mutex<Vec<CallRecord>>);

impl CallLog {
    pub fn push(&self, template: &str, hash: String, source: CallSource) {
        self.0.lock().unwrap().push(CallRecord {
            template: template.to_string(),
            hash,
            source,
        });
    }

    pub fn take(&self) -> Vec<CallRecord> {
        std::mem::take(&mut self.0.lock().unwrap())
    }
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("mode", &self.mode)
            .field("model", &self.cfg.model)
            .field("store", &self.store.as_ref().map(|s| s.dir().to_path_buf()))
            .finish()
    }
}

impl Gateway {
    /// Fixture-only gateway.
    pub fn replay(cfg: LlmConfig, store: FixtureStore) -> Self {
        Gateway::with_backend(Mode::Replay, cfg, None, Some(store))
    }

    pub fn with_backend(
        mode: Mode,
        cfg: LlmConfig,
        backend: Option<Box<dyn Backend>>,
        store: Option<FixtureStore>,
    ) -> Self {
        let slots = Slots::new(cfg.max_in_flight);
        Gateway {
            mode,
            cfg,
            backend,
            store,
            slots,
        }
    }

    /// Builds the gateway a mode calls for, checking that live and record
    /// modes have an endpoint and key, and that replay has a store.
    pub fn from_config(
        mode: Mode,
        cfg: LlmConfig,
        store: Option<FixtureStore>,
        classifier_url: Option<String>,
    ) -> Result<Self, LlmError> {
        let backend: Option<Box<dyn Backend>> = match mode {
            Mode::Replay => {
                if store.is_none() {
                    return Err(LlmError::Config("replay mode needs a fixture directory".into()));
                }
                None
            }
            Mode::Live | Mode::Record => {
                let url = cfg
                    .url
                    .clone()
                    .ok_or_else(|| LlmError::Config(format!("{mode} mode needs {URL_ENV} or --llm-url")))?;
                let key = cfg
                    .key
                    .clone()
                    .filter(|k| !k.is_empty())
                    .ok_or_else(|| LlmError::Config(format!("{mode} mode needs {KEY_ENV} or --llm-key")))?;
                if mode == Mode::Record && store.is_none() {
                    return Err(LlmError::Config("record mode needs a fixture directory".into()));
                }
                Some(Box::new(HttpBackend::new(url, key, classifier_url)?))
            }
        };
        let store = if mode == Mode::Live { None } else { store };
        Ok(Gateway::with_backend(mode, cfg, backend, store))
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> &LlmConfig {
        &self.cfg
    }

    pub fn request(&self, template: TemplateId, bindings: &Bindings) -> Result<CompletionRequest, LlmError> {
        let prompt = PromptTemplate::shipped(template).render(bindings)?;
        Ok(CompletionRequest {
            template,
            prompt,
            model: self.cfg.model.clone(),
            temperature: self.cfg.temperature,
            max_tokens: self.cfg.max_tokens,
        })
    }

    /// Renders `template` and returns the completion text.
    pub fn complete(&self, template: TemplateId, bindings: &Bindings, log: &CallLog) -> Result<String, LlmError> {
        let req = self.request(template, bindings)?;
        let resp: CompletionResponse = self.exchange(template.as_str(), &req, log, |b| b.complete(&req))?;
        if resp.text.trim().is_empty() {
            return Err(LlmError::EmptyResponse(template.to_string()));
        }
        Ok(resp.text)
    }

    pub(crate) fn classify(&self, req: &ClassifierRequest, log: &CallLog) -> Result<ClassifierResponse, LlmError> {
        self.exchange("nli_classifier", req, log, |b| b.classify(req))
    }

    fn exchange<Q, R>(
        &self,
        label: &str,
        req: &Q,
        log: &CallLog,
        call: impl Fn(&dyn Backend) -> Result<R, LlmError>,
    ) -> Result<R, LlmError>
    where
        Q: Serialize,
        R: Serialize + serde::de::DeserializeOwned,
    {
        let hash = request_hash(req);
        if self.mode != Mode::Live {
            if let Some(store) = &self.store {
                if let Some(resp) = store.get_response::<R>(&hash)? {
                    log.push(label, hash, CallSource::Fixture);
                    return Ok(resp);
                }
            }
        }
        let backend = match (&self.backend, self.mode) {
            (Some(b), Mode::Live | Mode::Record) => b,
            _ => {
                return Err(LlmError::MissingFixture {
                    template: label.to_string(),
                    hash,
                })
            }
        };
        let resp = self.slots.run(|| self.with_retry(|| call(backend.as_ref())))?;
        if self.mode == Mode::Record {
            if let Some(store) = &self.store {
                store.put(req, &resp)?;
            }
        }
        log.push(label, hash, CallSource::Backend);
        Ok(resp)
    }

    fn with_retry<T>(&self, f: impl Fn() -> Result<T, LlmError>) -> Result<T, LlmError> {
        let attempts = self.cfg.attempts.max(1);
        let mut delay = Duration::from_millis(self.cfg.backoff_ms);
        let mut last = None;
        for attempt in 1..=attempts {
            match f() {
                Ok(v) => return Ok(v),
                Err(e) if e.retryable() => {
                    last = Some(e);
                    if attempt < attempts {
                        thread::sleep(delay);
                        delay *= 2;
                    }
                }
                Err(e) => return Err(e),
            }
        }
        let message = match last {
            Some(LlmError::Http { message, .. }) => message,
            Some(other) => other.to_string(),
            None => String::new(),
        };
        Err(LlmError::Http { attempts, message })
    }
}
