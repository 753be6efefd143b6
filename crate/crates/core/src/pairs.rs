//! Training pair construction: one positive pair per gold mention plus
//! sampled non-entity spans.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;

use crate::corpus::Corpus;
use crate::decoder::enumerate_spans;
use crate::rng;
use crate::templates::{fill, LabelWordMap, SpanLabel, TemplateError, TemplateSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        }
    }
}

impl core::str::FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive" => Ok(Polarity::Positive),
            "negative" => Ok(Polarity::Negative),
            other => Err(other.to_string()),
        }
    }
}

/// Where a pair came from in its corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairOrigin {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    pub label: SpanLabel,
}

/// A (sentence, filled template) sequence pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub polarity: Polarity,
    /// Known when the pair was built in-process; absent when read from a file.
    pub origin: Option<PairOrigin>,
}

impl TrainingPair {
    pub fn new(source: Vec<String>, target: Vec<String>, polarity: Polarity) -> Self {
        Self { source, target, polarity, origin: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConfig {
    /// Negatives per positive.
    pub neg_ratio: f64,
    pub max_span_len: usize,
    pub seed: u64,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self { neg_ratio: 1.5, max_span_len: 8, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairError {
    EmptyCorpus,
    InvalidConfig(&'static str),
    Template(TemplateError),
}

impl fmt::Display for PairError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairError::EmptyCorpus => f.write_str("cannot build pairs from an empty corpus"),
            PairError::InvalidConfig(why) => write!(f, "invalid pair configuration: {why}"),
            PairError::Template(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PairError {}

impl From<TemplateError> for PairError {
    fn from(e: TemplateError) -> Self {
        PairError::Template(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairStatus {
    Complete,
    /// Fewer eligible non-entity spans than requested; all were taken.
    NegativeShortfall { requested: usize, available: usize },
    /// No gold mentions to anchor the negative ratio; output is empty.
    NoGoldMentions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    /// Seed-shuffled pairs.
    pub pairs: Vec<TrainingPair>,
    pub positives: usize,
    pub negatives: usize,
    pub status: PairStatus,
}

/// `round_half_up(ratio * positives)`.
pub fn negative_count(ratio: f64, positives: usize) -> usize {
    libm::floor(ratio * positives as f64 + 0.5) as usize
}

/// Builds one positive pair per gold mention and `round(neg_ratio * P)`
/// negatives drawn uniformly without replacement, corpus-wide, from spans of
/// length up to `max_span_len` whose coordinates differ from every gold span
/// of their sentence. Spans partially overlapping an entity are eligible.
pub fn build_training_pairs(
    corpus: &Corpus,
    template: &TemplateSpec,
    words: &LabelWordMap,
    config: &PairConfig,
) -> Result<PairSet, PairError> {
    if corpus.is_empty() {
        return Err(PairError::EmptyCorpus);
    }
    if !config.neg_ratio.is_finite() || config.neg_ratio < 0.0 {
        return Err(PairError::InvalidConfig("neg_ratio must be a finite number >= 0"));
    }
    if config.max_span_len == 0 {
        return Err(PairError::InvalidConfig("max_span_len must be >= 1"));
    }

    let mut pairs = Vec::new();
    for (si, sentence) in corpus.sentences().iter().enumerate() {
        for span in sentence.spans() {
            let label = SpanLabel::entity(span.label.clone());
            let filled = fill(template, &sentence.tokens()[span.start..span.end], &label, words)?;
            pairs.push(TrainingPair {
                source: sentence.tokens().to_vec(),
                target: filled.tokens,
                polarity: Polarity::Positive,
                origin: Some(PairOrigin { sentence: si, start: span.start, end: span.end, label }),
            });
        }
    }
    let positives = pairs.len();
    if positives == 0 && config.neg_ratio > 0.0 {
        return Ok(PairSet { pairs, positives: 0, negatives: 0, status: PairStatus::NoGoldMentions });
    }

    let mut eligible: Vec<(usize, usize, usize)> = Vec::new();
    for (si, sentence) in corpus.sentences().iter().enumerate() {
        for (start, end) in enumerate_spans(sentence.len(), config.max_span_len) {
            if !sentence.spans().iter().any(|g| g.start == start && g.end == end) {
                eligible.push((si, start, end));
            }
        }
    }

    let requested = negative_count(config.neg_ratio, positives);
    let take = requested.min(eligible.len());
    let mut rng = rng::seeded(config.seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, eligible.len(), take).into_vec();
    picked.sort_unstable();
    for idx in picked {
        let (si, start, end) = eligible[idx];
        let sentence = &corpus.sentences()[si];
        let filled = fill(template, &sentence.tokens()[start..end], &SpanLabel::None, words)?;
        pairs.push(TrainingPair {
            source: sentence.tokens().to_vec(),
            target: filled.tokens,
            polarity: Polarity::Negative,
            origin: Some(PairOrigin { sentence: si, start, end, label: SpanLabel::None }),
        });
    }
    pairs.shuffle(&mut rng);

    let status = if take < requested {
        PairStatus::NegativeShortfall { requested, available: eligible.len() }
    } else {
        PairStatus::Complete
    };
    Ok(PairSet { pairs, positives, negatives: take, status })
}
