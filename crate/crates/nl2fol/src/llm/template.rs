//! Prompt templates with `{{name}}` placeholders.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    EndToEnd,
    ClaimImplication,
    Entities,
    EntityRelation,
    Properties,
    NliRelation,
    FolFormulation,
    Interpret,
}

impl TemplateId {
    pub const ALL: [TemplateId; 8] = [
        TemplateId::EndToEnd,
        TemplateId::ClaimImplication,
        TemplateId::Entities,
        TemplateId::EntityRelation,
        TemplateId::Properties,
        TemplateId::NliRelation,
        TemplateId::FolFormulation,
        TemplateId::Interpret,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateId::EndToEnd => "end_to_end",
            TemplateId::ClaimImplication => "claim_implication",
            TemplateId::Entities => "entities",
            TemplateId::EntityRelation => "entity_relation",
            TemplateId::Properties => "properties",
            TemplateId::NliRelation => "nli_relation",
            TemplateId::FolFormulation => "fol_formulation",
            TemplateId::Interpret => "interpret",
        }
    }

    fn sources(&self) -> (&'static str, &'static str) {
        macro_rules! t {
            ($name:literal) => {
                (
                    include_str!(concat!("../../templates/", $name, ".txt")),
                    include_str!(concat!("../../templates/examples/", $name, ".txt")),
                )
            };
        }
        match self {
            TemplateId::EndToEnd => t!("end_to_end"),
            TemplateId::ClaimImplication => t!("claim_implication"),
            TemplateId::Entities => t!("entities"),
            TemplateId::EntityRelation => t!("entity_relation"),
            TemplateId::Properties => t!("properties"),
            TemplateId::NliRelation => t!("nli_relation"),
            TemplateId::FolFormulation => t!("fol_formulation"),
            TemplateId::Interpret => (include_str!("../../templates/interpret.txt"), ""),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| TemplateError::UnknownTemplate(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template {template}: placeholder `{name}` is unbound")]
    Unbound { template: TemplateId, name: String },
    #[error("template {template}: binding `{name}` has no placeholder")]
    Unused { template: TemplateId, name: String },
}

pub type Bindings = BTreeMap<String, String>;

/// Builds a binding map from `(name, value)` pairs.
pub fn bindings<'a, I>(pairs: I) -> Bindings
where
    I: IntoIterator<Item = (&'a str, String)>,
{
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub text: String,
    /// Placeholders the caller must bind (`examples` is filled from the
    /// shipped in-context example file).
    pub required: Vec<String>,
}

impl PromptTemplate {
    pub fn shipped(id: TemplateId) -> Self {
        let (text, examples) = id.sources();
        let text = text.replace("{{examples}}", examples.trim_end());
        let required = placeholders(&text).into_iter().collect();
        PromptTemplate {
            id,
            text,
            required,
        }
    }

    pub fn render(&self, bindings: &Bindings) -> Result<String, TemplateError> {
        for name in &self.required {
            if !bindings.contains_key(name) {
                return Err(TemplateError::Unbound {
                    template: self.id,
                    name: name.clone(),
                });
            }
        }
        if let Some(name) = bindings.keys().find(|k| !self.required.contains(k)) {
            return Err(TemplateError::Unused {
                template: self.id,
                name: name.clone(),
            });
        }
        let mut out = String::with_capacity(self.text.len());
        let mut rest = self.text.as_str();
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            match after.find("}}") {
                Some(end) if is_name(&after[..end]) => {
                    out.push_str(&bindings[&after[..end]]);
                    rest = &after[end + 2..];
                }
                _ => {
                    out.push_str("{{");
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        Ok(out)
    }
}

fn is_name(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b == b'_')
}

/// Placeholder names appearing in `text`.
pub fn placeholders(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) if is_name(&after[..end]) => {
                out.insert(after[..end].to_string());
                rest = &after[end + 2..];
            }
            _ => rest = after,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples_are_spliced_in() {
        for id in TemplateId::ALL {
            let t = PromptTemplate::shipped(id);
            assert!(!t.text.contains("{{examples}}"), "{id}");
            assert!(!t.text.contains("[...]"), "{id}");
        }
    }

    #[test]
    fn unbound_placeholder_fails() {
        let t = PromptTemplate::shipped(TemplateId::EntityRelation);
        let err = t
            .render(&bindings([("entity_a", "dogs".into())]))
            .unwrap_err();
        assert_eq!(
            err,
            TemplateError::Unbound {
                template: TemplateId::EntityRelation,
                name: "entity_b".into()
            }
        );
    }

    #[test]
    fn renders_entity_pair() {
        let t = PromptTemplate::shipped(TemplateId::EntityRelation);
        let out = t
            .render(&bindings([
                ("entity_a", "man".into()),
                ("entity_b", "people".into()),
            ]))
            .unwrap();
        assert!(out.contains("- Entity A: man\n\n- Entity B: people"));
        assert!(out.contains("\"[Entity A]\" is a subset of \"[Entity B]\""));
        assert!(placeholders(&out).is_empty());
    }

    #[test]
    fn ids_round_trip() {
        for id in TemplateId::ALL {
            assert_eq!(id.as_str().parse::<TemplateId>().unwrap(), id);
        }
        assert!("nope".parse::<TemplateId>().is_err());
    }
}
