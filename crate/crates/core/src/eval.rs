//! Entity-level precision, recall and F1.
//!
//! A predicted entity is a true positive iff a gold entity with the same
//! start, end and label exists in the same sentence. Headline numbers are
//! micro-averaged over the whole corpus.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{Corpus, EntitySpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub r#fn: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.r#fn)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.r#fn += other.r#fn;
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision/recall/F1 for one slice of the data.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub r#fn: usize,
}

impl From<Counts> for Scores {
    fn from(c: Counts) -> Self {
        Self { precision: c.precision(), recall: c.recall(), f1: c.f1(), tp: c.tp, fp: c.fp, r#fn: c.r#fn }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Bucket {
    High,
    Mid,
    Low,
}

impl Bucket {
    pub const ALL: [Bucket; 3] = [Bucket::High, Bucket::Mid, Bucket::Low];

    pub fn as_str(self) -> &'static str {
        match self {
            Bucket::High => "high",
            Bucket::Mid => "mid",
            Bucket::Low => "low",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub overall: Scores,
    pub per_type: BTreeMap<String, Scores>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none", default))]
    pub buckets: Option<BTreeMap<Bucket, BucketReport>>,
}

impl EvalReport {
    pub fn precision(&self) -> f64 {
        self.overall.precision
    }

    pub fn recall(&self) -> f64 {
        self.overall.recall
    }

    pub fn f1(&self) -> f64 {
        self.overall.f1
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BucketReport {
    pub labels: Vec<String>,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    SentenceCountMismatch { predicted: usize, gold: usize },
    EmptyTrainCorpus,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::SentenceCountMismatch { predicted, gold } => {
                write!(f, "{predicted} predicted sentences but {gold} gold sentences")
            }
            EvalError::EmptyTrainCorpus => f.write_str("training corpus is empty"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EvalError {}

fn check(predicted: &[Vec<EntitySpan>], gold: &[Vec<EntitySpan>]) -> Result<(), EvalError> {
    if predicted.len() != gold.len() {
        return Err(EvalError::SentenceCountMismatch { predicted: predicted.len(), gold: gold.len() });
    }
    Ok(())
}

fn per_label_counts(predicted: &[Vec<EntitySpan>], gold: &[Vec<EntitySpan>]) -> BTreeMap<String, Counts> {
    let mut counts: BTreeMap<String, Counts> = BTreeMap::new();
    for (pred, gold) in predicted.iter().zip(gold) {
        let pred: BTreeSet<&EntitySpan> = pred.iter().collect();
        let gold: BTreeSet<&EntitySpan> = gold.iter().collect();
        for span in &pred {
            let c = counts.entry(span.label.clone()).or_default();
            if gold.contains(span) {
                c.tp += 1;
            } else {
                c.fp += 1;
            }
        }
        for span in gold.difference(&pred) {
            counts.entry(span.label.clone()).or_default().r#fn += 1;
        }
    }
    counts
}

fn pooled<'a>(counts: impl Iterator<Item = &'a Counts>) -> Counts {
    let mut total = Counts::default();
    counts.for_each(|c| total.add(*c));
    total
}

/// Micro-averaged scores plus the per-type breakdown.
pub fn evaluate(predicted: &[Vec<EntitySpan>], gold: &[Vec<EntitySpan>]) -> Result<EvalReport, EvalError> {
    check(predicted, gold)?;
    let counts = per_label_counts(predicted, gold);
    Ok(EvalReport {
        overall: pooled(counts.values()).into(),
        per_type: counts.into_iter().map(|(l, c)| (l, c.into())).collect(),
        buckets: None,
    })
}

/// Per-label scores; their counts partition the overall counts.
pub fn per_type_report(
    predicted: &[Vec<EntitySpan>],
    gold: &[Vec<EntitySpan>],
) -> Result<BTreeMap<String, Scores>, EvalError> {
    Ok(evaluate(predicted, gold)?.per_type)
}

/// How entity types are split into frequency tertiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BucketMode {
    /// Top `ceil(k/3)` types are high, bottom `floor(k/3)` low, the rest mid.
    #[default]
    TypeCount,
    /// A type is high while the training mentions of more frequent types are
    /// below a third of all mentions, low once they reach two thirds.
    MentionMass,
}

/// Splits the entity types of `test` into high/mid/low by their training
/// mention frequency. Ties are broken by label name.
pub fn frequency_buckets(
    train: &Corpus,
    test: &Corpus,
    mode: BucketMode,
) -> Result<BTreeMap<Bucket, Vec<String>>, EvalError> {
    if train.is_empty() {
        return Err(EvalError::EmptyTrainCorpus);
    }
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for sentence in train.sentences() {
        for span in sentence.spans() {
            *freq.entry(span.label.as_str()).or_insert(0) += 1;
        }
    }
    let mut types: Vec<(&str, usize)> = test
        .sentences()
        .iter()
        .flat_map(|s| s.spans().iter().map(|e| e.label.as_str()))
        .chain(test.label_set().iter().map(String::as_str))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|l| (l, freq.get(l).copied().unwrap_or(0)))
        .collect();
    types.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));

    let mut buckets: BTreeMap<Bucket, Vec<String>> = Bucket::ALL.iter().map(|b| (*b, Vec::new())).collect();
    let k = types.len();
    match mode {
        BucketMode::TypeCount => {
            let high = k.div_ceil(3);
            let low = k / 3;
            for (i, (label, _)) in types.iter().enumerate() {
                let bucket = if i < high {
                    Bucket::High
                } else if i >= k - low {
                    Bucket::Low
                } else {
                    Bucket::Mid
                };
                buckets.get_mut(&bucket).unwrap().push(String::from(*label));
            }
        }
        BucketMode::MentionMass => {
            let total: usize = types.iter().map(|t| t.1).sum();
            let mut before = 0usize;
            for (label, count) in &types {
                // compare 3 * before against total to stay in integers
                let bucket = if 3 * before < total {
                    Bucket::High
                } else if 3 * before >= 2 * total {
                    Bucket::Low
                } else {
                    Bucket::Mid
                };
                buckets.get_mut(&bucket).unwrap().push(String::from(*label));
                before += count;
            }
        }
    }
    Ok(buckets)
}

/// Scores restricted to the entities (gold and predicted) of each bucket's
/// types.
pub fn bucket_report(
    predicted: &[Vec<EntitySpan>],
    gold: &[Vec<EntitySpan>],
    buckets: &BTreeMap<Bucket, Vec<String>>,
) -> Result<BTreeMap<Bucket, BucketReport>, EvalError> {
    check(predicted, gold)?;
    let counts = per_label_counts(predicted, gold);
    Ok(buckets
        .iter()
        .map(|(bucket, labels)| {
            let c = pooled(labels.iter().filter_map(|l| counts.get(l)));
            (*bucket, BucketReport { labels: labels.clone(), scores: c.into() })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabeledSentence, Tag};
    use alloc::string::ToString;
    use alloc::vec;

    fn span(s: usize, e: usize, l: &str) -> EntitySpan {
        EntitySpan::new(s, e, l)
    }

    #[test]
    fn identity_is_perfect() {
        let gold = vec![vec![span(0, 1, "PER")], vec![span(2, 4, "LOC")]];
        let r = evaluate(&gold, &gold).unwrap();
        assert_eq!((r.precision(), r.recall(), r.f1()), (1.0, 1.0, 1.0));
    }

    #[test]
    fn two_thirds() {
        let gold = vec![vec![span(0, 1, "PER"), span(2, 3, "LOC"), span(4, 5, "ORG")]];
        let pred = vec![vec![span(0, 1, "PER"), span(2, 3, "LOC"), span(4, 5, "PER")]];
        let r = evaluate(&pred, &gold).unwrap();
        assert_eq!((r.overall.tp, r.overall.fp, r.overall.r#fn), (2, 1, 1));
        assert!((r.precision() - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.recall() - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.f1() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_prediction() {
        let gold = vec![vec![span(0, 1, "PER")]];
        let r = evaluate(&[vec![]], &gold).unwrap();
        assert_eq!((r.precision(), r.recall(), r.f1()), (0.0, 0.0, 0.0));
        assert_eq!(
            evaluate(&[], &gold),
            Err(EvalError::SentenceCountMismatch { predicted: 0, gold: 1 })
        );
    }

    #[test]
    fn boundary_errors_count_twice() {
        let gold = vec![vec![span(4, 6, "LOC")]];
        let pred = vec![vec![span(5, 6, "LOC")]];
        let r = evaluate(&pred, &gold).unwrap();
        assert_eq!((r.overall.tp, r.overall.fp, r.overall.r#fn), (0, 1, 1));
    }

    #[test]
    fn single_label_per_type_equals_overall() {
        let gold = vec![vec![span(0, 1, "PER")], vec![span(1, 2, "PER")]];
        let pred = vec![vec![span(0, 1, "PER")], vec![span(0, 2, "PER")]];
        let r = evaluate(&pred, &gold).unwrap();
        assert_eq!(r.per_type["PER"], r.overall);
    }

    /// Five sentences; expected counts tallied by hand:
    /// PER tp=2 fp=1 fn=1, LOC tp=1 fp=0 fn=2, ORG tp=0 fp=2 fn=0.
    #[test]
    fn hand_counted_fixture() {
        let gold = vec![
            vec![span(0, 1, "PER"), span(3, 4, "LOC")],
            vec![span(0, 2, "PER")],
            vec![span(1, 2, "LOC")],
            vec![span(2, 3, "PER")],
            vec![span(0, 1, "LOC")],
        ];
        let pred = vec![
            vec![span(0, 1, "PER"), span(3, 4, "LOC")],
            vec![span(0, 2, "PER")],
            vec![span(1, 2, "ORG")],
            vec![span(2, 3, "ORG"), span(4, 5, "PER")],
            vec![],
        ];
        let per = per_type_report(&pred, &gold).unwrap();
        assert_eq!((per["PER"].tp, per["PER"].fp, per["PER"].r#fn), (2, 1, 1));
        assert_eq!((per["LOC"].tp, per["LOC"].fp, per["LOC"].r#fn), (1, 0, 2));
        assert_eq!((per["ORG"].tp, per["ORG"].fp, per["ORG"].r#fn), (0, 2, 0));
        let all = evaluate(&pred, &gold).unwrap().overall;
        assert_eq!((all.tp, all.fp, all.r#fn), (3, 3, 3));
    }

    fn corpus_with(counts: &[(&str, usize)]) -> Corpus {
        let mut sentences = Vec::new();
        for (label, n) in counts {
            for _ in 0..*n {
                sentences.push(
                    LabeledSentence::new(vec!["x".to_string()], vec![Tag::Begin(label.to_string())]).unwrap(),
                );
            }
        }
        Corpus::new(sentences)
    }

    #[test]
    fn one_type_per_bucket() {
        let train = corpus_with(&[("A", 100), ("B", 10), ("C", 1)]);
        let test = corpus_with(&[("A", 1), ("B", 1), ("C", 1)]);
        let b = frequency_buckets(&train, &test, BucketMode::TypeCount).unwrap();
        assert_eq!(b[&Bucket::High], vec!["A"]);
        assert_eq!(b[&Bucket::Mid], vec!["B"]);
        assert_eq!(b[&Bucket::Low], vec!["C"]);
    }

    #[test]
    fn four_types_round_up_high() {
        let train = corpus_with(&[("A", 40), ("B", 30), ("C", 20), ("D", 10)]);
        let test = corpus_with(&[("A", 1), ("B", 1), ("C", 1), ("D", 1)]);
        let b = frequency_buckets(&train, &test, BucketMode::TypeCount).unwrap();
        assert_eq!(b[&Bucket::High], vec!["A", "B"]);
        assert_eq!(b[&Bucket::Mid], vec!["C"]);
        assert_eq!(b[&Bucket::Low], vec!["D"]);
    }

    #[test]
    fn equal_frequencies_follow_label_order() {
        let train = corpus_with(&[("C", 5), ("A", 5), ("B", 5)]);
        let test = corpus_with(&[("A", 1), ("B", 1), ("C", 1)]);
        let b = frequency_buckets(&train, &test, BucketMode::TypeCount).unwrap();
        assert_eq!(b[&Bucket::High], vec!["A"]);
        assert_eq!(b[&Bucket::Low], vec!["C"]);
        assert_eq!(
            frequency_buckets(&Corpus::default(), &test, BucketMode::TypeCount),
            Err(EvalError::EmptyTrainCorpus)
        );
    }

    #[test]
    fn mention_mass_tertiles() {
        let train = corpus_with(&[("A", 60), ("B", 20), ("C", 15), ("D", 5)]);
        let test = corpus_with(&[("A", 1), ("B", 1), ("C", 1), ("D", 1)]);
        let b = frequency_buckets(&train, &test, BucketMode::MentionMass).unwrap();
        assert_eq!(b[&Bucket::High], vec!["A"]);
        // 60 of 100 mentions precede B, 80 precede C
        assert_eq!(b[&Bucket::Mid], vec!["B"]);
        assert_eq!(b[&Bucket::Low], vec!["C", "D"]);
    }

    #[test]
    fn bucket_scores_restrict_to_types() {
        let gold = vec![vec![span(0, 1, "A"), span(1, 2, "B")]];
        let pred = vec![vec![span(0, 1, "A")]];
        let buckets: BTreeMap<Bucket, Vec<String>> =
            [(Bucket::High, vec!["A".to_string()]), (Bucket::Low, vec!["B".to_string()])].into_iter().collect();
        let r = bucket_report(&pred, &gold, &buckets).unwrap();
        assert_eq!(r[&Bucket::High].scores.f1, 1.0);
        assert_eq!(r[&Bucket::Low].scores.f1, 0.0);
    }
}
