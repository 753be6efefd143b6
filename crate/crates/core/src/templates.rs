//! Statement templates with a span slot and a type slot, and the one-to-one
//! label-word map used to fill the type slot.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Placeholder for the candidate span in a pattern string.
pub const SPAN_SLOT: &str = "{span}";
/// Placeholder for the entity type word(s) in a pattern string.
pub const TYPE_SLOT: &str = "{type}";

/// The label a span is classified into: an entity label or the reserved
/// non-entity sentinel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SpanLabel {
    Entity(String),
    None,
}

impl SpanLabel {
    pub fn entity(label: impl Into<String>) -> Self {
        SpanLabel::Entity(label.into())
    }

    pub fn as_entity(&self) -> Option<&str> {
        match self {
            SpanLabel::Entity(l) => Some(l),
            SpanLabel::None => None,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, SpanLabel::None)
    }
}

impl fmt::Display for SpanLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpanLabel::Entity(l) => f.write_str(l),
            SpanLabel::None => f.write_str("NONE"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateError {
    UnmappedLabel(String),
    DuplicateLabelWord { word: String, first: String, second: String },
    EmptyLabelWord(String),
    /// A pattern has the wrong number of span/type slots.
    BadPattern { pattern: String, reason: &'static str },
    EmptySpan,
}

impl fmt::Display for TemplateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateError::UnmappedLabel(l) => write!(f, "label `{l}` has no label word"),
            TemplateError::DuplicateLabelWord { word, first, second } => {
                write!(f, "labels `{first}` and `{second}` both map to `{word}`")
            }
            TemplateError::EmptyLabelWord(l) => write!(f, "label `{l}` maps to an empty word"),
            TemplateError::BadPattern { pattern, reason } => {
                write!(f, "bad template pattern `{pattern}`: {reason}")
            }
            TemplateError::EmptySpan => f.write_str("candidate span is empty"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TemplateError {}

/// Injective map from entity labels to natural-language label words.
/// A label word may span several tokens (`"person name"`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelWordMap {
    entries: BTreeMap<String, Vec<String>>,
}

impl LabelWordMap {
    pub fn new<I, L, W>(entries: I) -> Result<Self, TemplateError>
    where
        I: IntoIterator<Item = (L, W)>,
        L: Into<String>,
        W: AsRef<str>,
    {
        let mut map = Self::default();
        for (label, word) in entries {
            map.insert(label, word.as_ref())?;
        }
        Ok(map)
    }

    /// Sets (or overrides) the word for `label`, keeping the map injective.
    pub fn insert(&mut self, label: impl Into<String>, word: &str) -> Result<(), TemplateError> {
        let label = label.into();
        let tokens: Vec<String> = word.split_whitespace().map(ToString::to_string).collect();
        if tokens.is_empty() {
            return Err(TemplateError::EmptyLabelWord(label));
        }
        if let Some((other, _)) = self.entries.iter().find(|(l, w)| **l != label && **w == tokens) {
            return Err(TemplateError::DuplicateLabelWord {
                word: tokens.join(" "),
                first: other.clone(),
                second: label,
            });
        }
        self.entries.insert(label, tokens);
        Ok(())
    }

    pub fn get(&self, label: &str) -> Option<&[String]> {
        self.entries.get(label).map(Vec::as_slice)
    }

    /// Space-joined label word.
    pub fn word(&self, label: &str) -> Option<String> {
        self.get(label).map(|w| w.join(" "))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(l, w)| (l.as_str(), w.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.entries.contains_key(label)
    }
}

/// Label words for the CoNLL labels; other labels are lowercased with `_`,
/// `-` and `.` turned into spaces (`RATING_AVERAGE` becomes `rating average`).
pub fn default_label_words<'a, I>(labels: I) -> Result<LabelWordMap, TemplateError>
where
    I: IntoIterator<Item = &'a String>,
{
    let mut map = LabelWordMap::default();
    for label in labels {
        let word = match label.as_str() {
            "LOC" => "location".to_string(),
            "PER" => "person".to_string(),
            "ORG" => "organization".to_string(),
            "MISC" => "miscellaneous".to_string(),
            other => other
                .chars()
                .map(|c| if matches!(c, '_' | '-' | '.') { ' ' } else { c.to_ascii_lowercase() })
                .collect(),
        };
        map.insert(label.clone(), &word)?;
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PatternPiece {
    Word(String),
    Span,
    Type,
}

/// A whitespace-tokenized statement pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pieces: Vec<PatternPiece>,
}

impl Pattern {
    /// Parses `"{span} is a {type} entity"`. Slots must be standalone tokens.
    pub fn parse(raw: &str) -> Self {
        let pieces = raw
            .split_whitespace()
            .map(|tok| match tok {
                SPAN_SLOT => PatternPiece::Span,
                TYPE_SLOT => PatternPiece::Type,
                word => PatternPiece::Word(word.to_string()),
            })
            .collect();
        Self { pieces }
    }

    pub fn pieces(&self) -> &[PatternPiece] {
        &self.pieces
    }

    fn count(&self, piece: &PatternPiece) -> usize {
        self.pieces.iter().filter(|p| *p == piece).count()
    }

    fn substitute(&self, span: &[String], words: Option<&[String]>) -> Vec<String> {
        let mut out = Vec::with_capacity(self.pieces.len() + span.len() + 2);
        for piece in &self.pieces {
            match piece {
                PatternPiece::Word(w) => out.push(w.clone()),
                PatternPiece::Span => out.extend_from_slice(span),
                PatternPiece::Type => out.extend_from_slice(words.unwrap_or(&[])),
            }
        }
        out
    }

    /// Fixed words of the pattern (slots excluded).
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.pieces.iter().filter_map(|p| match p {
            PatternPiece::Word(w) => Some(w.as_str()),
            _ => None,
        })
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, piece) in self.pieces.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match piece {
                PatternPiece::Word(w) => f.write_str(w)?,
                PatternPiece::Span => f.write_str(SPAN_SLOT)?,
                PatternPiece::Type => f.write_str(TYPE_SLOT)?,
            }
        }
        Ok(())
    }
}

/// An entity statement pattern and its non-entity counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSpec {
    pub name: String,
    entity_pattern: Pattern,
    none_pattern: Pattern,
    /// Reference development F1 recorded for the built-in templates.
    pub dev_f1: Option<f64>,
}

impl TemplateSpec {
    pub fn new(name: impl Into<String>, entity: &str, none: &str) -> Result<Self, TemplateError> {
        let entity_pattern = Pattern::parse(entity);
        let none_pattern = Pattern::parse(none);
        let bad = |pattern: &str, reason| TemplateError::BadPattern { pattern: pattern.to_string(), reason };
        if entity_pattern.count(&PatternPiece::Span) != 1 {
            return Err(bad(entity, "entity pattern needs exactly one {span} slot"));
        }
        if entity_pattern.count(&PatternPiece::Type) != 1 {
            return Err(bad(entity, "entity pattern needs exactly one {type} slot"));
        }
        if none_pattern.count(&PatternPiece::Span) != 1 {
            return Err(bad(none, "non-entity pattern needs exactly one {span} slot"));
        }
        if none_pattern.count(&PatternPiece::Type) != 0 {
            return Err(bad(none, "non-entity pattern must not have a {type} slot"));
        }
        Ok(Self { name: name.into(), entity_pattern, none_pattern, dev_f1: None })
    }

    pub fn with_dev_f1(mut self, f1: f64) -> Self {
        self.dev_f1 = Some(f1);
        self
    }

    pub fn entity_pattern(&self) -> &Pattern {
        &self.entity_pattern
    }

    pub fn none_pattern(&self) -> &Pattern {
        &self.none_pattern
    }

    /// Fixed words appearing in either pattern.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entity_pattern.words().chain(self.none_pattern.words())
    }
}

/// A template realized for one (span, label) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilledTemplate {
    pub tokens: Vec<String>,
    pub span_text: Vec<String>,
    pub label: SpanLabel,
}

/// Splices `span_text` and the label word into the template; the entity
/// pattern is used for entity labels and the non-entity pattern for
/// [`SpanLabel::None`].
pub fn fill(
    template: &TemplateSpec,
    span_text: &[String],
    label: &SpanLabel,
    words: &LabelWordMap,
) -> Result<FilledTemplate, TemplateError> {
    if span_text.is_empty() {
        return Err(TemplateError::EmptySpan);
    }
    let tokens = match label {
        SpanLabel::Entity(l) => {
            let word = words.get(l).ok_or_else(|| TemplateError::UnmappedLabel(l.clone()))?;
            template.entity_pattern.substitute(span_text, Some(word))
        }
        SpanLabel::None => template.none_pattern.substitute(span_text, None),
    };
    Ok(FilledTemplate { tokens, span_text: span_text.to_vec(), label: label.clone() })
}

/// Recovers `(span_text, label)` from a filled target by pattern matching.
pub fn parse_filled(
    template: &TemplateSpec,
    tokens: &[String],
    words: &LabelWordMap,
) -> Option<(Vec<String>, SpanLabel)> {
    let candidates = words
        .iter()
        .map(|(l, w)| (SpanLabel::entity(l), &template.entity_pattern, Some(w)))
        .chain(core::iter::once((SpanLabel::None, &template.none_pattern, None)));
    for (label, pattern, word) in candidates {
        let split = pattern.pieces.iter().position(|p| *p == PatternPiece::Span)?;
        let expand = |pieces: &[PatternPiece]| {
            Pattern { pieces: pieces.to_vec() }.substitute(&[], word)
        };
        let prefix = expand(&pattern.pieces[..split]);
        let suffix = expand(&pattern.pieces[split + 1..]);
        if tokens.len() > prefix.len() + suffix.len()
            && tokens.starts_with(&prefix)
            && tokens.ends_with(&suffix)
        {
            let span = tokens[prefix.len()..tokens.len() - suffix.len()].to_vec();
            return Some((span, label));
        }
    }
    None
}

/// The four manual templates with their reference development F1 on CoNLL03,
/// best first.
pub fn builtin_templates() -> Vec<TemplateSpec> {
    let rows: [(&str, &str, &str, f64); 4] = [
        ("is-a-entity", "{span} is a {type} entity", "{span} is not a named entity", 95.27),
        (
            "entity-type-of",
            "The entity type of {span} is {type}",
            "The entity type of {span} is none entity",
            95.15,
        ),
        ("belongs-to", "{span} belongs to {type} category", "{span} belongs to none category", 88.42),
        (
            "should-be-tagged",
            "{span} should be tagged as {type}",
            "{span} should tagged as none entity",
            76.80,
        ),
    ];
    rows.iter()
        .map(|(name, entity, none, f1)| {
            TemplateSpec::new(*name, entity, none)
                .expect("built-in patterns are well formed")
                .with_dev_f1(*f1)
        })
        .collect()
}

/// Looks up a built-in template by name or 1-based index.
pub fn builtin_template(name: &str) -> Option<TemplateSpec> {
    let all = builtin_templates();
    if let Ok(idx) = name.parse::<usize>() {
        return idx.checked_sub(1).and_then(|i| all.get(i).cloned());
    }
    all.into_iter().find(|t| t.name == name)
}
