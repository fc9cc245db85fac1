use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    Backend, ClassifierRequest, ClassifierResponse, CompletionRequest, CompletionResponse, LlmError,
    TemplateId, Usage,
};

/// Chat-completions endpoint client.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    key: String,
    classifier_url: Option<String>,
}

impl HttpBackend {
    pub fn new(url: String, key: String, classifier_url: Option<String>) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        let url = if url.trim_end_matches('/').ends_with("/chat/completions") {
            url
        } else {
            format!("{}/chat/completions", url.trim_end_matches('/'))
        };
        Ok(HttpBackend {
            client,
            url,
            key,
            classifier_url,
        })
    }

    fn post(&self, url: &str, body: &Value) -> Result<Value, LlmError> {
        let http = |message: String| LlmError::Http {
            attempts: 1,
            message,
        };
        let resp = self
            .client
            .post(url)
            .bearer_auth(&self.key)
            .json(body)
            .send()
            .map_err(|e| http(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            let message = format!("{status}: {}", text.chars().take(200).collect::<String>());
            // client errors other than rate limiting will not go away on retry
            if status.is_client_error() && status.as_u16() != 429 {
                return Err(LlmError::Backend(message));
            }
            return Err(http(message));
        }
        resp.json().map_err(|e| http(e.to_string()))
    }
}

impl Backend for HttpBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        let start = Instant::now();
        let body = json!({
            "model": req.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let v = self.post(&self.url, &body)?;
        let text = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| LlmError::EmptyResponse(req.template.to_string()))?
            .to_string();
        let usage = v.get("usage").map(|u| Usage {
            prompt_tokens: u["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: u["completion_tokens"].as_u64().unwrap_or(0),
        });
        Ok(CompletionResponse {
            text,
            usage,
            latency_ms: start.elapsed().as_millis() as u64,
        })
    }

    fn classify(&self, req: &ClassifierRequest) -> Result<ClassifierResponse, LlmError> {
        let url = self
            .classifier_url
            .as_deref()
            .ok_or_else(|| LlmError::Config("external classifier needs NL2FOL_NLI_URL".into()))?;
        let v = self.post(url, &serde_json::to_value(req).expect("serializable"))?;
        let p = v["entailment"]
            .as_f64()
            .ok_or_else(|| LlmError::EmptyResponse("nli_classifier".into()))?;
        Ok(ClassifierResponse { entailment: p })
    }
}

/// Canned answers for one input, used to author fixtures and in tests.
///
/// Sequential stages pop their answers in order; entity relations and
/// entailments are looked up by the pair named in the prompt.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedResponses {
    #[serde(default)]
    pub claim_implication: Vec<String>,
    #[serde(default)]
    pub entities: Vec<String>,
    /// `"A|B"` to the answer text; unlisted pairs answer `4`.
    #[serde(default)]
    pub relations: BTreeMap<String, String>,
    #[serde(default)]
    pub properties: Vec<String>,
    /// `"premise => hypothesis"` pairs answered ENTAILMENT; others are not.
    #[serde(default)]
    pub entailments: Vec<String>,
    /// Entailment probabilities for the classifier backend.
    #[serde(default)]
    pub classifier: BTreeMap<String, f64>,
    #[serde(default)]
    pub fol: Vec<String>,
    #[serde(default)]
    pub interpret: Option<String>,
    #[serde(default)]
    pub baseline: Option<String>,
}

pub struct ScriptedBackend {
    script: ScriptedResponses,
    cursor: Mutex<BTreeMap<TemplateId, usize>>,
}

impl ScriptedBackend {
    pub fn new(script: ScriptedResponses) -> Self {
        ScriptedBackend {
            script,
            cursor: Mutex::new(BTreeMap::new()),
        }
    }

    fn next(&self, id: TemplateId, seq: &[String]) -> Result<String, LlmError> {
        let mut cursor = self.cursor.lock().unwrap();
        let i = cursor.entry(id).or_insert(0);
        let out = seq
            .get(*i)
            .cloned()
            .ok_or_else(|| LlmError::Backend(format!("script has no answer {} for {id}", *i + 1)))?;
        *i += 1;
        Ok(out)
    }
}

fn last_field<'a>(prompt: &'a str, prefix: &str) -> &'a str {
    prompt
        .lines()
        .rev()
        .find_map(|l| l.trim_start().strip_prefix(prefix))
        .unwrap_or("")
        .trim()
}

impl Backend for ScriptedBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        let s = &self.script;
        let text = match req.template {
            TemplateId::ClaimImplication => self.next(req.template, &s.claim_implication)?,
            TemplateId::Entities => self.next(req.template, &s.entities)?,
            TemplateId::Properties => self.next(req.template, &s.properties)?,
            TemplateId::FolFormulation => self.next(req.template, &s.fol)?,
            TemplateId::EntityRelation => {
                let a = last_field(&req.prompt, "- Entity A:");
                let b = last_field(&req.prompt, "- Entity B:");
                s.relations
                    .get(&format!("{a}|{b}"))
                    .cloned()
                    .unwrap_or_else(|| "4".into())
            }
            TemplateId::NliRelation => {
                let p = last_field(&req.prompt, "Clause 1:");
                let h = last_field(&req.prompt, "Clause 2:");
                let key = format!("{p} => {h}");
                if s.entailments.contains(&key) {
                    "Answer: ENTAILMENT".into()
                } else {
                    "Answer: NOT_ENTAILMENT".into()
                }
            }
            TemplateId::Interpret => s
                .interpret
                .clone()
                .ok_or_else(|| LlmError::Backend("no explanation scripted".into()))?,
            TemplateId::EndToEnd => s
                .baseline
                .clone()
                .ok_or_else(|| LlmError::Backend("no baseline answer scripted".into()))?,
        };
        Ok(CompletionResponse {
            text,
            usage: None,
            latency_ms: 0,
        })
    }

    fn classify(&self, req: &ClassifierRequest) -> Result<ClassifierResponse, LlmError> {
        let key = format!("{} => {}", req.premise, req.hypothesis);
        let entailment = self.script.classifier.get(&key).copied().unwrap_or_else(|| {
            if self.script.entailments.contains(&key) {
                0.95
            } else {
                0.05
            }
        });
        Ok(ClassifierResponse { entailment })
    }
}
