//! Template files in TOML:
//!
//! ```toml
//! [[template]]
//! name = "is-a"
//! entity = "{span} is a {type} entity"
//! none = "{span} is not a named entity"
//!
//! [label_words]
//! LOC = "place"
//! ```

use std::collections::BTreeMap;

use serde::Deserialize;
use templner_core::templates::{builtin_template, TemplateError};
use templner_core::TemplateSpec;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TemplateConfigError {
    #[error("{0}")]
    Toml(#[from] toml::de::Error),
    #[error("template `{name}`: {source}")]
    Template { name: String, source: TemplateError },
    #[error("duplicate template name `{0}`")]
    Duplicate(String),
    #[error("no template named `{0}`")]
    Unknown(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemplate {
    name: String,
    entity: String,
    none: String,
    #[serde(default)]
    dev_f1: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    template: Vec<RawTemplate>,
    #[serde(default)]
    label_words: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TemplateFile {
    pub templates: Vec<TemplateSpec>,
    /// Label-word overrides, label to word(s).
    pub label_words: BTreeMap<String, String>,
}

impl TemplateFile {
    pub fn get(&self, name: &str) -> Option<&TemplateSpec> {
        self.templates.iter().find(|t| t.name == name)
    }
}

pub fn parse_template_file(text: &str) -> Result<TemplateFile, TemplateConfigError> {
    let raw: RawFile = toml::from_str(text)?;
    let mut templates: Vec<TemplateSpec> = Vec::with_capacity(raw.template.len());
    for t in raw.template {
        if templates.iter().any(|s| s.name == t.name) {
            return Err(TemplateConfigError::Duplicate(t.name));
        }
        let mut spec = TemplateSpec::new(t.name.clone(), &t.entity, &t.none)
            .map_err(|source| TemplateConfigError::Template { name: t.name.clone(), source })?;
        spec.dev_f1 = t.dev_f1;
        templates.push(spec);
    }
    Ok(TemplateFile { templates, label_words: raw.label_words })
}

/// Resolves a template by name: entries of `file` first, then the built-in
/// templates (by name or 1-based index).
pub fn resolve_template(name: &str, file: Option<&TemplateFile>) -> Result<TemplateSpec, TemplateConfigError> {
    file.and_then(|f| f.get(name).cloned())
        .or_else(|| builtin_template(name))
        .ok_or_else(|| TemplateConfigError::Unknown(name.to_string()))
}
