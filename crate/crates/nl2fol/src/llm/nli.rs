use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{bindings, CallLog, CallSource, ClassifierRequest, Gateway, LlmError, TemplateId};

pub const DEFAULT_THRESHOLD: f64 = 0.80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NliBackend {
    Llm,
    #[default]
    LlmWithContext,
    ExternalClassifier,
}

impl NliBackend {
    pub fn as_str(&self) -> &'static str {
        match self {
            NliBackend::Llm => "llm",
            NliBackend::LlmWithContext => "llm_with_context",
            NliBackend::ExternalClassifier => "external_classifier",
        }
    }
}

impl fmt::Display for NliBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NliBackend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llm" => Ok(NliBackend::Llm),
            "llm_with_context" => Ok(NliBackend::LlmWithContext),
            "external_classifier" => Ok(NliBackend::ExternalClassifier),
            _ => Err(format!(
                "unknown NLI backend `{s}` (llm, llm_with_context, external_classifier)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NliLabel {
    Entailment,
    NotEntailment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliJudgment {
    pub premise: String,
    pub hypothesis: String,
    pub label: NliLabel,
    /// Entailment probability; classifier backend only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    pub backend: NliBackend,
    /// Decided without a backend call (identical clauses).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reflexive: bool,
    /// The response text named no label; NOT_ENTAILMENT assumed.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unparsed: bool,
}

/// Reads an entailment label out of free-form answer text.
pub fn parse_nli_label(text: &str) -> Option<NliLabel> {
    let t = text.to_ascii_uppercase().replace(['-', ' '], "_");
    if ["NOT_ENTAIL", "NON_ENTAIL", "CONTRADICTION", "NEUTRAL"]
        .iter()
        .any(|m| t.contains(m))
    {
        Some(NliLabel::NotEntailment)
    } else if t.contains("ENTAILMENT") || t.contains("ENTAILS") {
        Some(NliLabel::Entailment)
    } else {
        None
    }
}

impl Gateway {
    /// Does `premise` entail `hypothesis`? Identical clauses entail each
    /// other without consulting any backend.
    pub fn nli_entails(
        &self,
        premise: &str,
        hypothesis: &str,
        backend: NliBackend,
        context: Option<&str>,
        threshold: f64,
        log: &CallLog,
    ) -> Result<NliJudgment, LlmError> {
        if premise.trim().is_empty() || hypothesis.trim().is_empty() {
            return Err(LlmError::Backend("entailment needs a nonempty premise and hypothesis".into()));
        }
        let mut judgment = NliJudgment {
            premise: premise.to_string(),
            hypothesis: hypothesis.to_string(),
            label: NliLabel::Entailment,
            confidence: None,
            backend,
            reflexive: false,
            unparsed: false,
        };
        if premise.trim() == hypothesis.trim() {
            judgment.reflexive = true;
            log.push("nli_relation", String::new(), CallSource::ShortCircuit);
            return Ok(judgment);
        }
        match backend {
            NliBackend::Llm | NliBackend::LlmWithContext => {
                let context = match (backend, context) {
                    (NliBackend::LlmWithContext, Some(c)) => format!("Input sentence: {c}\n\n"),
                    _ => String::new(),
                };
                let text = self.complete(
                    TemplateId::NliRelation,
                    &bindings([
                        ("context", context),
                        ("premise", premise.to_string()),
                        ("hypothesis", hypothesis.to_string()),
                    ]),
                    log,
                )?;
                match parse_nli_label(&text) {
                    Some(label) => judgment.label = label,
                    None => {
                        judgment.label = NliLabel::NotEntailment;
                        judgment.unparsed = true;
                    }
                }
            }
            NliBackend::ExternalClassifier => {
                let resp = self.classify(&ClassifierRequest {
                    premise: premise.to_string(),
                    hypothesis: hypothesis.to_string(),
                    model: self.config().model.clone(),
                }, log)?;
                let p = resp.entailment.clamp(0.0, 1.0);
                judgment.confidence = Some(p);
                judgment.label = if p >= threshold {
                    NliLabel::Entailment
                } else {
                    NliLabel::NotEntailment
                };
            }
        }
        Ok(judgment)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{CallLog, LlmConfig, Mode, ScriptedBackend, ScriptedResponses};

    #[test]
    fn labels_from_text() {
        assert_eq!(parse_nli_label("Answer: ENTAILMENT"), Some(NliLabel::Entailment));
        assert_eq!(parse_nli_label("answer: not entailment"), Some(NliLabel::NotEntailment));
        assert_eq!(parse_nli_label("NOT_ENTAILMENT"), Some(NliLabel::NotEntailment));
        assert_eq!(parse_nli_label("I am unsure"), None);
    }

    #[test]
    fn reflexive_needs_no_backend() {
        let gw = Gateway::with_backend(Mode::Live, LlmConfig::default(), None, None);
        let j = gw
            .nli_entails("Tall(man)", "Tall(man)", NliBackend::Llm, None, DEFAULT_THRESHOLD, &CallLog::default())
            .unwrap();
        assert_eq!(j.label, NliLabel::Entailment);
        assert!(j.reflexive);
    }

    #[test]
    fn classifier_threshold() {
        let script = ScriptedResponses {
            classifier: [
                ("A(a) => B(a)".to_string(), 0.80),
                ("B(a) => A(a)".to_string(), 0.79),
            ]
            .into_iter()
            .collect(),
            ..ScriptedResponses::default()
        };
        let gw = Gateway::with_backend(
            Mode::Live,
            LlmConfig::default(),
            Some(Box::new(ScriptedBackend::new(script))),
            None,
        );
        let b = NliBackend::ExternalClassifier;
        let yes = gw.nli_entails("A(a)", "B(a)", b, None, DEFAULT_THRESHOLD, &CallLog::default()).unwrap();
        assert_eq!((yes.label, yes.confidence), (NliLabel::Entailment, Some(0.80)));
        let no = gw.nli_entails("B(a)", "A(a)", b, None, DEFAULT_THRESHOLD, &CallLog::default()).unwrap();
        assert_eq!(no.label, NliLabel::NotEntailment);
    }
}
