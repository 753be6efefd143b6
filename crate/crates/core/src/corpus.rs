//! Labeled sentences, the strict BIO codec, corpus statistics and the
//! few-shot sampling protocols.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;

use crate::rng;

/// One BIO tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Tag {
    Outside,
    Begin(String),
    Inside(String),
}

impl Tag {
    pub fn parse(raw: &str) -> Result<Self, CorpusError> {
        if raw == "O" {
            return Ok(Tag::Outside);
        }
        let invalid = || CorpusError::InvalidTag(raw.to_string());
        let (prefix, label) = raw.split_once('-').ok_or_else(invalid)?;
        if label.is_empty() || label.chars().any(char::is_whitespace) {
            return Err(invalid());
        }
        match prefix {
            "B" => Ok(Tag::Begin(label.to_string())),
            "I" => Ok(Tag::Inside(label.to_string())),
            _ => Err(invalid()),
        }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Tag::Outside => None,
            Tag::Begin(l) | Tag::Inside(l) => Some(l),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Outside => f.write_str("O"),
            Tag::Begin(l) => write!(f, "B-{l}"),
            Tag::Inside(l) => write!(f, "I-{l}"),
        }
    }
}

/// A labeled entity mention: tokens `start..end` (end exclusive).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        Self { start, end, label: label.into() }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for EntitySpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.start, self.end, self.label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorpusError {
    InvalidTag(String),
    /// An `I-` tag not preceded by `B-`/`I-` of the same label.
    InvalidTransition { position: usize, tag: String },
    LengthMismatch { tokens: usize, tags: usize },
    EmptySentence,
    OverlappingSpans { first: EntitySpan, second: EntitySpan },
    SpanOutOfRange { span: EntitySpan, length: usize },
    UnknownLabel(String),
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::InvalidTag(t) => write!(f, "invalid BIO tag `{t}`"),
            CorpusError::InvalidTransition { position, tag } => {
                write!(f, "tag `{tag}` at position {position} does not continue an entity of the same label")
            }
            CorpusError::LengthMismatch { tokens, tags } => {
                write!(f, "{tokens} tokens but {tags} tags")
            }
            CorpusError::EmptySentence => f.write_str("sentence has no tokens"),
            CorpusError::OverlappingSpans { first, second } => {
                write!(f, "spans {first} and {second} overlap")
            }
            CorpusError::SpanOutOfRange { span, length } => {
                write!(f, "span {span} outside sentence of length {length}")
            }
            CorpusError::UnknownLabel(l) => write!(f, "unknown label `{l}`"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CorpusError {}

/// Converts a strict-BIO tag sequence into entity spans sorted by start.
pub fn spans_from_bio(tags: &[Tag]) -> Result<Vec<EntitySpan>, CorpusError> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            Tag::Outside => {
                if let Some((start, label)) = open.take() {
                    spans.push(EntitySpan::new(start, i, label));
                }
            }
            Tag::Begin(label) => {
                if let Some((start, prev)) = open.take() {
                    spans.push(EntitySpan::new(start, i, prev));
                }
                open = Some((i, label));
            }
            Tag::Inside(label) => match open {
                Some((_, prev)) if prev == label => {}
                _ => {
                    return Err(CorpusError::InvalidTransition {
                        position: i,
                        tag: tag.to_string(),
                    })
                }
            },
        }
    }
    if let Some((start, label)) = open {
        spans.push(EntitySpan::new(start, tags.len(), label));
    }
    Ok(spans)
}

/// Inverse of [`spans_from_bio`]. Spans may come in any order but must be
/// disjoint and inside `0..length`.
pub fn bio_from_spans(spans: &[EntitySpan], length: usize) -> Result<Vec<Tag>, CorpusError> {
    let mut sorted: Vec<&EntitySpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    for span in &sorted {
        if span.is_empty() || span.end > length {
            return Err(CorpusError::SpanOutOfRange { span: (*span).clone(), length });
        }
    }
    for pair in sorted.windows(2) {
        if pair[0].overlaps(pair[1]) {
            return Err(CorpusError::OverlappingSpans {
                first: pair[0].clone(),
                second: pair[1].clone(),
            });
        }
    }
    let mut tags = alloc::vec![Tag::Outside; length];
    for span in sorted {
        tags[span.start] = Tag::Begin(span.label.clone());
        for tag in &mut tags[span.start + 1..span.end] {
            *tag = Tag::Inside(span.label.clone());
        }
    }
    Ok(tags)
}

/// A pre-tokenized sentence with validated BIO tags.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LabeledSentence {
    tokens: Vec<String>,
    tags: Vec<Tag>,
    spans: Vec<EntitySpan>,
}

impl LabeledSentence {
    pub fn new(tokens: Vec<String>, tags: Vec<Tag>) -> Result<Self, CorpusError> {
        if tokens.is_empty() {
            return Err(CorpusError::EmptySentence);
        }
        if tokens.len() != tags.len() {
            return Err(CorpusError::LengthMismatch { tokens: tokens.len(), tags: tags.len() });
        }
        let spans = spans_from_bio(&tags)?;
        Ok(Self { tokens, tags, spans })
    }

    pub fn from_spans(tokens: Vec<String>, spans: &[EntitySpan]) -> Result<Self, CorpusError> {
        let tags = bio_from_spans(spans, tokens.len())?;
        Self::new(tokens, tags)
    }

    /// Unlabeled sentence (all `O`).
    pub fn unlabeled(tokens: Vec<String>) -> Result<Self, CorpusError> {
        let tags = alloc::vec![Tag::Outside; tokens.len()];
        Self::new(tokens, tags)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    /// Gold entity spans, sorted by start.
    pub fn spans(&self) -> &[EntitySpan] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn mention_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for span in &self.spans {
            *counts.entry(span.label.as_str()).or_insert(0) += 1;
        }
        counts
    }
}

/// An immutable collection of labeled sentences plus its label set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    sentences: Vec<LabeledSentence>,
    label_set: BTreeSet<String>,
}

impl Corpus {
    /// Builds a corpus whose label set is exactly the labels used in its tags.
    pub fn new(sentences: Vec<LabeledSentence>) -> Self {
        let label_set = sentences
            .iter()
            .flat_map(|s| s.spans.iter().map(|e| e.label.clone()))
            .collect();
        Self { sentences, label_set }
    }

    /// Builds a corpus with a declared label set, which must cover every
    /// label used in the tags.
    pub fn with_labels<I, S>(sentences: Vec<LabeledSentence>, labels: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let label_set: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        for sentence in &sentences {
            for span in &sentence.spans {
                if !label_set.contains(&span.label) {
                    return Err(CorpusError::UnknownLabel(span.label.clone()));
                }
            }
        }
        Ok(Self { sentences, label_set })
    }

    pub fn sentences(&self) -> &[LabeledSentence] {
        &self.sentences
    }

    pub fn label_set(&self) -> &BTreeSet<String> {
        &self.label_set
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn mention_count(&self) -> usize {
        self.sentences.iter().map(|s| s.spans.len()).sum()
    }

    /// Gold spans per sentence, in corpus order.
    pub fn gold_spans(&self) -> Vec<Vec<EntitySpan>> {
        self.sentences.iter().map(|s| s.spans.to_vec()).collect()
    }

    fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            sentences: indices.iter().map(|&i| self.sentences[i].clone()).collect(),
            label_set: self.label_set.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorpusStats {
    pub sentence_count: usize,
    /// Every label of the corpus label set, including zero counts.
    pub mention_count_per_label: BTreeMap<String, usize>,
    /// Labels with at least one mention.
    pub entity_type_count: usize,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut per_label: BTreeMap<String, usize> =
        corpus.label_set.iter().map(|l| (l.clone(), 0)).collect();
    for sentence in &corpus.sentences {
        for span in &sentence.spans {
            *per_label.entry(span.label.clone()).or_insert(0) += 1;
        }
    }
    let entity_type_count = per_label.values().filter(|&&c| c > 0).count();
    CorpusStats {
        sentence_count: corpus.sentences.len(),
        mention_count_per_label: per_label,
        entity_type_count,
    }
}

fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    order
}

/// K-shot sub-corpus: roughly `k` mentions per entity type.
///
/// Labels are visited in label-set order. For each label, sentences are
/// scanned in seed-shuffled order and any sentence mentioning the label is
/// added while the label has fewer than `k` mentions. Mentions of other labels
/// carried by an added sentence count toward their totals. Labels with fewer
/// than `k` mentions overall end up with all of them. Output keeps corpus
/// order.
pub fn sample_few_shot(corpus: &Corpus, k: usize, seed: u64) -> Corpus {
    if k == 0 {
        return corpus.subset(&[]);
    }
    let order = shuffled_indices(corpus.sentences.len(), seed);
    let mut chosen = alloc::vec![false; corpus.sentences.len()];
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for label in &corpus.label_set {
        for &idx in &order {
            if counts.get(label.as_str()).copied().unwrap_or(0) >= k {
                break;
            }
            let sentence = &corpus.sentences[idx];
            if chosen[idx] || !sentence.spans.iter().any(|s| &s.label == label) {
                continue;
            }
            chosen[idx] = true;
            for (l, c) in sentence.mention_counts() {
                *counts.entry(l).or_insert(0) += c;
            }
        }
    }
    let indices: Vec<usize> = (0..chosen.len()).filter(|&i| chosen[i]).collect();
    corpus.subset(&indices)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DownsampleOptions {
    /// Keep sentences without any entity mention.
    pub keep_entity_free: bool,
}

impl Default for DownsampleOptions {
    fn default() -> Self {
        Self { keep_entity_free: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Downsample {
    /// Kept sentences in seed-shuffled order.
    pub corpus: Corpus,
    /// Mentions per label in the output.
    pub achieved: BTreeMap<String, usize>,
    /// Labels whose achieved count exceeds their quota, with the excess.
    /// Only co-occurrence inside a kept sentence produces overshoot.
    pub overshoot: BTreeMap<String, usize>,
}

/// Caps mention counts per label, keeping whole sentences.
///
/// Labels absent from `quotas` are unlimited. The first pass keeps every
/// sentence (in seed-shuffled order) that fits within all quotas. A second
/// pass tops up labels still below quota with sentences whose only excess
/// falls on other, co-occurring labels; that excess is reported.
pub fn downsample_in_domain(
    corpus: &Corpus,
    quotas: &BTreeMap<String, usize>,
    seed: u64,
    options: DownsampleOptions,
) -> Result<Downsample, CorpusError> {
    if let Some(unknown) = quotas.keys().find(|l| !corpus.label_set.contains(*l)) {
        return Err(CorpusError::UnknownLabel(unknown.clone()));
    }
    let order = shuffled_indices(corpus.sentences.len(), seed);
    let quota = |label: &str| quotas.get(label).copied().unwrap_or(usize::MAX);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut kept = alloc::vec![false; corpus.sentences.len()];

    for &idx in &order {
        let mentions = corpus.sentences[idx].mention_counts();
        if mentions.is_empty() {
            kept[idx] = options.keep_entity_free;
            continue;
        }
        let fits = mentions
            .iter()
            .all(|(l, c)| counts.get(*l).copied().unwrap_or(0) + c <= quota(l));
        if fits {
            kept[idx] = true;
            for (l, c) in mentions {
                *counts.entry(l.to_string()).or_insert(0) += c;
            }
        }
    }

    for &idx in &order {
        if kept[idx] {
            continue;
        }
        let mentions = corpus.sentences[idx].mention_counts();
        let helps = mentions.iter().any(|(l, c)| {
            let have = counts.get(*l).copied().unwrap_or(0);
            have < quota(l) && have + c <= quota(l)
        });
        if helps {
            kept[idx] = true;
            for (l, c) in mentions {
                *counts.entry(l.to_string()).or_insert(0) += c;
            }
        }
    }

    let indices: Vec<usize> = order.iter().copied().filter(|&i| kept[i]).collect();
    let mut achieved: BTreeMap<String, usize> =
        corpus.label_set.iter().map(|l| (l.clone(), 0)).collect();
    achieved.extend(counts);
    let overshoot = achieved
        .iter()
        .filter_map(|(l, &c)| {
            let q = quota(l);
            (c > q).then(|| (l.clone(), c - q))
        })
        .collect();
    Ok(Downsample { corpus: corpus.subset(&indices), achieved, overshoot })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tags(raw: &[&str]) -> Vec<Tag> {
        raw.iter().map(|t| Tag::parse(t).unwrap()).collect()
    }

    fn sentence(tokens: &[&str], raw_tags: &[&str]) -> LabeledSentence {
        LabeledSentence::new(tokens.iter().map(|t| t.to_string()).collect(), tags(raw_tags)).unwrap()
    }

    #[test]
    fn bangkok_span() {
        let spans = spans_from_bio(&tags(&["O", "O", "O", "O", "O", "B-LOC"])).unwrap();
        assert_eq!(spans, vec![EntitySpan::new(5, 6, "LOC")]);
        assert_eq!(
            bio_from_spans(&spans, 6).unwrap(),
            tags(&["O", "O", "O", "O", "O", "B-LOC"])
        );
    }

    #[test]
    fn no_entities() {
        assert!(spans_from_bio(&tags(&["O", "O", "O"])).unwrap().is_empty());
        assert_eq!(bio_from_spans(&[], 3).unwrap(), tags(&["O", "O", "O"]));
    }

    #[test]
    fn adjacent_entities_split_by_begin() {
        let t = tags(&["B-PER", "I-PER", "B-PER"]);
        let spans = spans_from_bio(&t).unwrap();
        assert_eq!(spans, vec![EntitySpan::new(0, 2, "PER"), EntitySpan::new(2, 3, "PER")]);
        assert_eq!(bio_from_spans(&spans, 3).unwrap(), t);
    }

    #[test]
    fn inside_without_begin_is_rejected() {
        let err = spans_from_bio(&tags(&["O", "I-PER"])).unwrap_err();
        assert_eq!(err, CorpusError::InvalidTransition { position: 1, tag: "I-PER".into() });
        assert!(spans_from_bio(&tags(&["B-LOC", "I-PER"])).is_err());
        assert!(spans_from_bio(&tags(&["I-LOC"])).is_err());
    }

    #[test]
    fn tag_parsing() {
        assert_eq!(Tag::parse("O").unwrap(), Tag::Outside);
        assert_eq!(Tag::parse("B-MISC").unwrap(), Tag::Begin("MISC".into()));
        assert_eq!(Tag::parse("I-B-X").unwrap(), Tag::Inside("B-X".into()));
        for bad in ["", "B", "B-", "X-LOC", "o", "E-LOC"] {
            assert!(Tag::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn bio_from_spans_errors() {
        let overlapping = [EntitySpan::new(0, 2, "A"), EntitySpan::new(1, 3, "B")];
        assert!(matches!(
            bio_from_spans(&overlapping, 3),
            Err(CorpusError::OverlappingSpans { .. })
        ));
        assert!(matches!(
            bio_from_spans(&[EntitySpan::new(2, 4, "A")], 3),
            Err(CorpusError::SpanOutOfRange { .. })
        ));
        assert!(bio_from_spans(&[EntitySpan::new(1, 1, "A")], 3).is_err());
    }

    #[test]
    fn sentence_invariants() {
        assert_eq!(LabeledSentence::new(vec![], vec![]), Err(CorpusError::EmptySentence));
        assert!(matches!(
            LabeledSentence::new(vec!["a".into()], vec![]),
            Err(CorpusError::LengthMismatch { .. })
        ));
    }

    fn stats_fixture() -> Corpus {
        Corpus::new(vec![
            sentence(&["Alice", "met", "Bob"], &["B-PER", "O", "B-PER"]),
            sentence(&["in", "Paris"], &["O", "B-LOC"]),
            sentence(&["nothing", "here"], &["O", "O"]),
        ])
    }

    #[test]
    fn stats_counted_by_hand() {
        let stats = corpus_stats(&stats_fixture());
        assert_eq!(stats.sentence_count, 3);
        assert_eq!(stats.mention_count_per_label.get("PER"), Some(&2));
        assert_eq!(stats.mention_count_per_label.get("LOC"), Some(&1));
        assert_eq!(stats.entity_type_count, 2);
    }

    #[test]
    fn stats_of_empty_corpus() {
        assert_eq!(corpus_stats(&Corpus::default()), CorpusStats::default());
    }

    #[test]
    fn declared_label_superset() {
        let s = vec![sentence(&["in", "Paris"], &["O", "B-LOC"])];
        let c = Corpus::with_labels(s.clone(), ["LOC", "PER"]).unwrap();
        assert_eq!(c.label_set().len(), 2);
        let stats = corpus_stats(&c);
        assert_eq!(stats.entity_type_count, 1);
        assert_eq!(stats.mention_count_per_label.len(), 2);
        assert!(Corpus::with_labels(s, ["PER"]).is_err());
    }

    fn sampling_fixture() -> Corpus {
        let mut sentences = Vec::new();
        for i in 0..3 {
            let name = alloc::format!("p{i}");
            sentences.push(sentence(&["mr", &name, "sat"], &["O", "B-PER", "O"]));
        }
        for i in 0..12 {
            let name = alloc::format!("c{i}");
            sentences.push(sentence(&["in", &name], &["O", "B-LOC"]));
        }
        sentences.push(sentence(&["mr", "x", "in", "y"], &["O", "B-PER", "O", "B-LOC"]));
        sentences.push(sentence(&["plain", "words"], &["O", "O"]));
        Corpus::new(sentences)
    }

    #[test]
    fn few_shot_takes_all_of_rare_types() {
        let out = sample_few_shot(&sampling_fixture(), 5, 7);
        let stats = corpus_stats(&out);
        assert_eq!(stats.mention_count_per_label["PER"], 4);
        assert!(stats.mention_count_per_label["LOC"] >= 5);
    }

    #[test]
    fn few_shot_zero_and_determinism() {
        let corpus = sampling_fixture();
        assert!(sample_few_shot(&corpus, 0, 1).is_empty());
        assert_eq!(sample_few_shot(&corpus, 2, 99), sample_few_shot(&corpus, 2, 99));
    }

    #[test]
    fn downsample_bounds() {
        let corpus = sampling_fixture();
        let zero: BTreeMap<String, usize> =
            [("PER".to_string(), 0), ("LOC".to_string(), 0)].into_iter().collect();
        let out = downsample_in_domain(&corpus, &zero, 3, DownsampleOptions::default()).unwrap();
        assert_eq!(out.corpus.mention_count(), 0);
        assert_eq!(out.corpus.len(), 1);
        let strict = DownsampleOptions { keep_entity_free: false };
        assert!(downsample_in_domain(&corpus, &zero, 3, strict).unwrap().corpus.is_empty());

        let full: BTreeMap<String, usize> =
            [("PER".to_string(), 100), ("LOC".to_string(), 100)].into_iter().collect();
        let out = downsample_in_domain(&corpus, &full, 3, DownsampleOptions::default()).unwrap();
        assert_eq!(out.corpus.len(), corpus.len());
        assert!(out.overshoot.is_empty());

        let bad: BTreeMap<String, usize> = [("ORG".to_string(), 1)].into_iter().collect();
        assert_eq!(
            downsample_in_domain(&corpus, &bad, 3, DownsampleOptions::default()),
            Err(CorpusError::UnknownLabel("ORG".into()))
        );
    }

    #[test]
    fn downsample_reports_co_occurrence_overshoot() {
        // The only PER sentence left after LOC is filled also carries a LOC.
        let corpus = Corpus::new(vec![
            sentence(&["in", "a"], &["O", "B-LOC"]),
            sentence(&["mr", "x", "in", "y"], &["O", "B-PER", "O", "B-LOC"]),
        ]);
        let quotas: BTreeMap<String, usize> =
            [("PER".to_string(), 1), ("LOC".to_string(), 1)].into_iter().collect();
        for seed in 0..8 {
            let out = downsample_in_domain(&corpus, &quotas, seed, DownsampleOptions::default()).unwrap();
            assert_eq!(out.achieved["PER"], 1);
            let loc = out.achieved["LOC"];
            assert_eq!(out.overshoot.get("LOC").copied().unwrap_or(0), loc - 1);
        }
    }
}
