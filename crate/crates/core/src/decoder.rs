//! Inference: enumerate spans, rank every (span, label) statement, resolve
//! overlapping predictions, and entity-level voting across models.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::corpus::{EntitySpan, LabeledSentence};
use crate::scorer::{with_eos, GenerativeScorer, ScoreError};
use crate::templates::{fill, LabelWordMap, SpanLabel, TemplateError, TemplateSpec};

/// All `(start, end)` with `1 <= end - start <= min(max_span_len, n)`,
/// ordered by start, then length.
pub fn enumerate_spans(n: usize, max_span_len: usize) -> Vec<(usize, usize)> {
    let longest = max_span_len.min(n);
    let mut spans = Vec::with_capacity(span_count(n, max_span_len));
    for start in 0..n {
        for len in 1..=longest {
            if start + len > n {
                break;
            }
            spans.push((start, start + len));
        }
    }
    spans
}

/// Closed form of `enumerate_spans(n, max).len()`.
pub fn span_count(n: usize, max_span_len: usize) -> usize {
    (1..=max_span_len.min(n)).map(|l| n - l + 1).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeConfig {
    pub max_span_len: usize,
    pub template: TemplateSpec,
    pub words: LabelWordMap,
    /// Rank by mean per-token log-probability instead of the raw sum.
    pub length_normalize: bool,
    /// Append `</s>` to every filled template before scoring.
    pub append_eos: bool,
}

impl DecodeConfig {
    pub fn new(template: TemplateSpec, words: LabelWordMap) -> Self {
        Self { max_span_len: 8, template, words, length_normalize: false, append_eos: true }
    }

    /// Labels tried for every span: each mapped entity label, then NONE.
    pub fn candidate_labels(&self) -> Vec<SpanLabel> {
        let mut labels: Vec<SpanLabel> = self.words.labels().map(SpanLabel::entity).collect();
        labels.push(SpanLabel::None);
        labels
    }

    fn label_word(&self, label: &SpanLabel) -> Option<String> {
        label.as_entity().and_then(|l| self.words.word(l))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecodeError {
    InvalidConfig(&'static str),
    SpanOutOfRange { start: usize, end: usize, length: usize },
    Template(TemplateError),
    Scorer { sentence: Option<usize>, span: Option<(usize, usize)>, source: ScoreError },
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::InvalidConfig(m) => write!(f, "invalid decode configuration: {m}"),
            DecodeError::SpanOutOfRange { start, end, length } => {
                write!(f, "span ({start},{end}) outside sentence of length {length}")
            }
            DecodeError::Template(e) => write!(f, "{e}"),
            DecodeError::Scorer { sentence, span, source } => {
                f.write_str("scoring failed")?;
                if let Some(s) = sentence {
                    write!(f, " in sentence {s}")?;
                }
                if let Some((a, b)) = span {
                    write!(f, " for span ({a},{b})")?;
                }
                write!(f, ": {source}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DecodeError {}

impl From<TemplateError> for DecodeError {
    fn from(e: TemplateError) -> Self {
        DecodeError::Template(e)
    }
}

/// A span with the score of every label statement and the winner.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoredCandidate {
    pub start: usize,
    pub end: usize,
    pub label: SpanLabel,
    pub score: f64,
    /// Label word of `label` (empty for NONE); used for tie-breaks.
    pub label_word: String,
    pub per_label_scores: BTreeMap<SpanLabel, f64>,
}

impl ScoredCandidate {
    pub fn entity(&self) -> Option<EntitySpan> {
        self.label.as_entity().map(|l| EntitySpan::new(self.start, self.end, l))
    }

    fn overlaps(&self, other: &Self) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Candidate order: higher score, earlier start, shorter span, smaller label
/// word.
pub fn candidate_order(a: &ScoredCandidate, b: &ScoredCandidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.start.cmp(&b.start))
        .then((a.end - a.start).cmp(&(b.end - b.start)))
        .then(a.label_word.cmp(&b.label_word))
}

fn value(config: &DecodeConfig, scores: &crate::scorer::TokenScores) -> f64 {
    if config.length_normalize {
        scores.mean()
    } else {
        scores.total
    }
}

fn pick(config: &DecodeConfig, start: usize, end: usize, scored: Vec<(SpanLabel, f64)>) -> ScoredCandidate {
    // NONE wins exact ties; among entity labels the smaller label word wins.
    let mut best: Option<(SpanLabel, f64, String)> = None;
    for (label, score) in &scored {
        let word = config.label_word(label).unwrap_or_default();
        let better = match &best {
            None => true,
            Some((best_label, best_score, best_word)) => match score.total_cmp(best_score) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => {
                    label.is_none() || (!best_label.is_none() && word < *best_word)
                }
            },
        };
        if better {
            best = Some((label.clone(), *score, word));
        }
    }
    let (label, score, label_word) = best.expect("at least the NONE label is scored");
    ScoredCandidate { start, end, label, score, label_word, per_label_scores: scored.into_iter().collect() }
}

fn filled_targets(
    config: &DecodeConfig,
    tokens: &[String],
    spans: &[(usize, usize)],
    labels: &[SpanLabel],
) -> Result<Vec<Vec<String>>, DecodeError> {
    let mut targets = Vec::with_capacity(spans.len() * labels.len());
    for &(start, end) in spans {
        if start >= end || end > tokens.len() {
            return Err(DecodeError::SpanOutOfRange { start, end, length: tokens.len() });
        }
        for label in labels {
            let filled = fill(&config.template, &tokens[start..end], label, &config.words)?;
            targets.push(if config.append_eos { with_eos(&filled.tokens) } else { filled.tokens });
        }
    }
    Ok(targets)
}

/// Scores every label statement for one span and assigns the best label.
pub fn classify_span<S: GenerativeScorer + ?Sized>(
    scorer: &S,
    tokens: &[String],
    span: (usize, usize),
    config: &DecodeConfig,
) -> Result<ScoredCandidate, DecodeError> {
    let mut out = classify_spans(scorer, tokens, &[span], config)?;
    Ok(out.remove(0))
}

/// [`classify_span`] for many spans of one sentence, scored in one batch.
pub fn classify_spans<S: GenerativeScorer + ?Sized>(
    scorer: &S,
    tokens: &[String],
    spans: &[(usize, usize)],
    config: &DecodeConfig,
) -> Result<Vec<ScoredCandidate>, DecodeError> {
    let labels = config.candidate_labels();
    let targets = filled_targets(config, tokens, spans, &labels)?;
    let scores = scorer
        .score_targets(tokens, &targets)
        .map_err(|source| DecodeError::Scorer { sentence: None, span: spans.first().copied().filter(|_| spans.len() == 1), source })?;
    Ok(spans
        .iter()
        .zip(scores.chunks(labels.len()))
        .map(|(&(start, end), chunk)| {
            let scored = labels.iter().cloned().zip(chunk.iter().map(|s| value(config, s))).collect();
            pick(config, start, end, scored)
        })
        .collect())
}

/// Greedy overlap resolution: drop NONE, visit candidates in
/// [`candidate_order`], keep each one that overlaps nothing kept so far.
/// The result is disjoint and sorted by start.
pub fn resolve_overlaps(candidates: Vec<ScoredCandidate>) -> Vec<ScoredCandidate> {
    let mut entities: Vec<ScoredCandidate> = candidates.into_iter().filter(|c| !c.label.is_none()).collect();
    entities.sort_by(candidate_order);
    let mut kept: Vec<ScoredCandidate> = Vec::new();
    for candidate in entities {
        if !kept.iter().any(|k| k.overlaps(&candidate)) {
            kept.push(candidate);
        }
    }
    kept.sort_by_key(|c| (c.start, c.end));
    kept
}

/// Decodes one sentence into disjoint entity candidates sorted by start.
pub fn decode_sentence<S: GenerativeScorer + ?Sized>(
    scorer: &S,
    tokens: &[String],
    config: &DecodeConfig,
) -> Result<Vec<ScoredCandidate>, DecodeError> {
    if config.max_span_len == 0 {
        return Err(DecodeError::InvalidConfig("max_span_len must be >= 1"));
    }
    let spans = enumerate_spans(tokens.len(), config.max_span_len);
    if spans.is_empty() {
        return Ok(Vec::new());
    }
    Ok(resolve_overlaps(classify_spans(scorer, tokens, &spans, config)?))
}

/// Decodes sentences one after another.
pub fn decode_sentences<S: GenerativeScorer + ?Sized>(
    scorer: &S,
    sentences: &[LabeledSentence],
    config: &DecodeConfig,
) -> Result<Vec<Vec<ScoredCandidate>>, DecodeError> {
    sentences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            decode_sentence(scorer, s.tokens(), config).map_err(|e| match e {
                DecodeError::Scorer { span, source, .. } => DecodeError::Scorer { sentence: Some(i), span, source },
                other => other,
            })
        })
        .collect()
}

pub fn entities(candidates: &[ScoredCandidate]) -> Vec<EntitySpan> {
    candidates.iter().filter_map(ScoredCandidate::entity).collect()
}

/// Entity-level majority voting for one sentence.
///
/// Each model contributes its predicted `(span, score)` list. An exact
/// `(start, end, label)` survives when more than half of the models predict
/// it. Overlapping survivors are resolved greedily by vote count, then summed
/// score, then earlier start, shorter span and smaller label.
pub fn ensemble_decode(model_outputs: &[Vec<(EntitySpan, f64)>]) -> Vec<EntitySpan> {
    let models = model_outputs.len();
    let mut tally: BTreeMap<EntitySpan, (usize, f64)> = BTreeMap::new();
    for output in model_outputs {
        let mut seen = alloc::collections::BTreeSet::new();
        for (span, score) in output {
            if !seen.insert(span) {
                continue;
            }
            let entry = tally.entry(span.clone()).or_insert((0, 0.0));
            entry.0 += 1;
            entry.1 += score;
        }
    }
    let mut survivors: Vec<(EntitySpan, usize, f64)> = tally
        .into_iter()
        .filter(|(_, (votes, _))| 2 * votes > models)
        .map(|(span, (votes, score))| (span, votes, score))
        .collect();
    survivors.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then(b.2.total_cmp(&a.2))
            .then(a.0.start.cmp(&b.0.start))
            .then(a.0.len().cmp(&b.0.len()))
            .then(a.0.label.cmp(&b.0.label))
    });
    let mut kept: Vec<EntitySpan> = Vec::new();
    for (span, _, _) in survivors {
        if !kept.iter().any(|k| k.overlaps(&span)) {
            kept.push(span);
        }
    }
    kept.sort();
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::TokenScores;
    use crate::templates::{builtin_templates, default_label_words};
    use alloc::string::ToString;
    use alloc::vec;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(ToString::to_string).collect()
    }

    fn conll_config() -> DecodeConfig {
        let labels: Vec<String> = ["LOC", "MISC", "ORG", "PER"].iter().map(|s| s.to_string()).collect();
        DecodeConfig::new(builtin_templates()[0].clone(), default_label_words(&labels).unwrap())
    }

    /// Scores a target by lookup on its (EOS-stripped) text; unknown targets
    /// get `default`.
    struct TableScorer {
        table: BTreeMap<String, f64>,
        default: f64,
    }

    impl GenerativeScorer for TableScorer {
        fn score_target(&self, _source: &[String], target: &[String]) -> Result<TokenScores, ScoreError> {
            let text = target.iter().filter(|t| *t != "</s>").cloned().collect::<Vec<_>>().join(" ");
            let total = self.table.get(&text).copied().unwrap_or(self.default);
            Ok(TokenScores::from_per_token(vec![total]))
        }
    }

    fn table(entries: &[(&str, f64)], default: f64) -> TableScorer {
        TableScorer { table: entries.iter().map(|(k, v)| (k.to_string(), *v)).collect(), default }
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(enumerate_spans(3, 8).len(), 6);
        assert_eq!(enumerate_spans(8, 8).len(), 36);
        assert_eq!(enumerate_spans(10, 8).len(), 52);
        assert_eq!(enumerate_spans(3, 8), vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert!(enumerate_spans(0, 8).is_empty());
    }

    #[test]
    fn bangkok_is_a_location() {
        let scorer = table(
            &[
                ("Bangkok is a location entity", -1.0),
                ("Bangkok is a organization entity", -3.0),
                ("Bangkok is a person entity", -4.0),
                ("Bangkok is a miscellaneous entity", -5.0),
                ("Bangkok is not a named entity", -2.0),
            ],
            -10.0,
        );
        let sentence = toks("ACL will be held in Bangkok");
        let c = classify_span(&scorer, &sentence, (5, 6), &conll_config()).unwrap();
        assert_eq!(c.label, SpanLabel::entity("LOC"));
        assert_eq!(c.score, -1.0);
        assert_eq!(c.per_label_scores.len(), 5);
        assert_eq!(c.per_label_scores[&c.label], c.score);
    }

    #[test]
    fn strict_none_max_gives_none() {
        let scorer = table(&[("ACL is not a named entity", -0.5)], -3.0);
        let c = classify_span(&scorer, &toks("ACL will"), (0, 1), &conll_config()).unwrap();
        assert_eq!(c.label, SpanLabel::None);
    }

    #[test]
    fn ties_prefer_smaller_label_word_then_none() {
        let sentence = toks("x");
        let scorer = table(&[("x is a person entity", -1.0), ("x is a location entity", -1.0)], -5.0);
        let c = classify_span(&scorer, &sentence, (0, 1), &conll_config()).unwrap();
        assert_eq!(c.label, SpanLabel::entity("LOC"));
        let scorer = table(&[("x is a person entity", -1.0), ("x is not a named entity", -1.0)], -5.0);
        let c = classify_span(&scorer, &sentence, (0, 1), &conll_config()).unwrap();
        assert_eq!(c.label, SpanLabel::None);
    }

    #[test]
    fn in_bangkok_loses_to_bangkok() {
        let scorer = table(
            &[("in Bangkok is a organization entity", -2.0), ("Bangkok is a location entity", -1.0)],
            -10.0,
        );
        let out = decode_sentence(&scorer, &toks("ACL will be held in Bangkok"), &conll_config()).unwrap();
        assert_eq!(entities(&out), vec![EntitySpan::new(5, 6, "LOC")]);
    }

    #[test]
    fn nothing_beats_none() {
        let scorer = table(&[], -1.0);
        let mut config = conll_config();
        // With a flat table every label ties and NONE wins.
        config.append_eos = false;
        assert!(decode_sentence(&scorer, &toks("a b c"), &config).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_span_is_rejected() {
        let scorer = table(&[], -1.0);
        assert!(matches!(
            classify_span(&scorer, &toks("a"), (0, 2), &conll_config()),
            Err(DecodeError::SpanOutOfRange { .. })
        ));
    }

    #[test]
    fn scorer_errors_carry_context() {
        struct Broken;
        impl GenerativeScorer for Broken {
            fn score_target(&self, _: &[String], _: &[String]) -> Result<TokenScores, ScoreError> {
                Err(ScoreError::NotReady("down".into()))
            }
        }
        let sentence = LabeledSentence::unlabeled(toks("a b")).unwrap();
        let err = decode_sentences(&Broken, &[sentence], &conll_config()).unwrap_err();
        assert!(matches!(err, DecodeError::Scorer { sentence: Some(0), .. }));
    }

    fn span(s: usize, e: usize, l: &str) -> EntitySpan {
        EntitySpan::new(s, e, l)
    }

    #[test]
    fn ensemble_majority() {
        let a = vec![(span(0, 1, "PER"), -1.0), (span(3, 4, "LOC"), -1.0)];
        let b = vec![(span(0, 1, "PER"), -1.0)];
        let c = vec![(span(3, 4, "ORG"), -1.0)];
        assert_eq!(ensemble_decode(&[a.clone(), b, c]), vec![span(0, 1, "PER")]);
        assert_eq!(ensemble_decode(&[a.clone()]), vec![span(0, 1, "PER"), span(3, 4, "LOC")]);
        assert!(ensemble_decode(&[]).is_empty());
    }

    #[test]
    fn ensemble_overlap_tie_uses_summed_score() {
        // Two overlapping majorities need a model that emits both (pigeonhole),
        // so the middle model carries raw, unresolved candidates.
        let m1 = vec![(span(0, 2, "PER"), -1.0), (span(5, 6, "LOC"), -1.0)];
        let m2 = vec![(span(0, 2, "PER"), -1.5), (span(1, 3, "ORG"), -0.5)];
        let m3 = vec![(span(1, 3, "ORG"), -0.5), (span(5, 6, "LOC"), -1.0)];
        let out = ensemble_decode(&[m1.clone(), m2.clone(), m3.clone()]);
        assert_eq!(out, vec![span(1, 3, "ORG"), span(5, 6, "LOC")]);
        // Flip the sums: PER now wins the tie on votes.
        let m2 = vec![(span(0, 2, "PER"), -0.1), (span(1, 3, "ORG"), -5.0)];
        let out = ensemble_decode(&[m1, m2, m3]);
        assert_eq!(out, vec![span(0, 2, "PER"), span(5, 6, "LOC")]);
    }
}
