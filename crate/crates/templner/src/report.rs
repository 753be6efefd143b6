//! Prediction files, candidate records and human-readable tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use templner_core::corpus::{bio_from_spans, CorpusStats};
use templner_core::{CorpusError, EntitySpan, EvalReport, LabeledSentence, ScoredCandidate};
use thiserror::Error;

/// One kept entity of a decoded sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum CandidateFileError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: sentence {sentence} is out of range (corpus has {sentences})")]
    SentenceOutOfRange { line: usize, sentence: usize, sentences: usize },
}

/// JSON-lines rendering of the kept entities, sentence by sentence.
pub fn candidates_jsonl(decoded: &[Vec<ScoredCandidate>]) -> String {
    let mut out = String::new();
    for (sentence, candidates) in decoded.iter().enumerate() {
        for c in candidates {
            let Some(label) = c.label.as_entity() else { continue };
            let record = CandidateRecord { sentence, start: c.start, end: c.end, label: label.to_string(), score: c.score };
            let _ = writeln!(out, "{}", serde_json::to_string(&record).expect("records serialize"));
        }
    }
    out
}

/// Groups a candidate file by sentence for a corpus of `sentences` sentences.
pub fn parse_candidates(text: &str, sentences: usize) -> Result<Vec<Vec<(EntitySpan, f64)>>, CandidateFileError> {
    let mut grouped = vec![Vec::new(); sentences];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let r: CandidateRecord =
            serde_json::from_str(raw).map_err(|e| CandidateFileError::Parse { line, message: e.to_string() })?;
        if r.start >= r.end {
            return Err(CandidateFileError::Parse { line, message: format!("empty span ({},{})", r.start, r.end) });
        }
        let slot = grouped
            .get_mut(r.sentence)
            .ok_or(CandidateFileError::SentenceOutOfRange { line, sentence: r.sentence, sentences })?;
        slot.push((EntitySpan::new(r.start, r.end, r.label), r.score));
    }
    Ok(grouped)
}

/// CoNLL rendering of the input tokens with predicted tags.
pub fn write_predictions(sentences: &[LabeledSentence], predicted: &[Vec<EntitySpan>]) -> Result<String, CorpusError> {
    let mut out = String::new();
    for (i, (s, spans)) in sentences.iter().zip(predicted).enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let tags = bio_from_spans(spans, s.len())?;
        for (token, tag) in s.tokens().iter().zip(&tags) {
            let _ = writeln!(out, "{token} {tag}");
        }
    }
    Ok(out)
}

pub fn format_stats(stats: &CorpusStats) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sentences      {}", stats.sentence_count);
    let _ = writeln!(out, "entity types   {}", stats.entity_type_count);
    let width = stats.mention_count_per_label.keys().map(String::len).max().unwrap_or(0).max(5);
    let _ = writeln!(out, "{:<width$}  mentions", "label");
    for (label, n) in &stats.mention_count_per_label {
        let _ = writeln!(out, "{label:<width$}  {n}");
    }
    out
}

pub fn format_eval(report: &EvalReport) -> String {
    let mut rows: Vec<(String, &templner_core::eval::Scores)> =
        report.per_type.iter().map(|(l, s)| (l.clone(), s)).collect();
    if let Some(buckets) = &report.buckets {
        rows.extend(buckets.iter().map(|(b, r)| (format!("[{}] {}", b.as_str(), r.labels.join(",")), &r.scores)));
    }
    rows.push(("overall".to_string(), &report.overall));
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(5);
    let mut out = format!("{:<width$}  {:>9}  {:>9}  {:>9}  {:>6}  {:>6}  {:>6}\n", "label", "precision", "recall", "f1", "tp", "fp", "fn");
    for (label, s) in rows {
        let _ = writeln!(
            out,
            "{label:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>6}  {:>6}  {:>6}",
            s.precision, s.recall, s.f1, s.tp, s.fp, s.r#fn
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use templner_core::eval::evaluate;

    #[test]
    fn candidate_round_trip() {
        let text = "{\"sentence\":1,\"start\":0,\"end\":2,\"label\":\"PER\",\"score\":-1.5}\n";
        let grouped = parse_candidates(text, 2).unwrap();
        assert_eq!(grouped, vec![vec![], vec![(EntitySpan::new(0, 2, "PER"), -1.5)]]);
        assert!(matches!(parse_candidates(text, 1), Err(CandidateFileError::SentenceOutOfRange { line: 1, .. })));
        assert!(matches!(parse_candidates("{}", 1), Err(CandidateFileError::Parse { line: 1, .. })));
    }

    #[test]
    fn predictions_use_input_tokens() {
        let s = LabeledSentence::unlabeled(vec!["in".into(), "Bangkok".into()]).unwrap();
        let text = write_predictions(&[s], &[vec![EntitySpan::new(1, 2, "LOC")]]).unwrap();
        assert_eq!(text, "in O\nBangkok B-LOC\n");
    }

    #[test]
    fn eval_table_has_overall_row() {
        let gold = vec![vec![EntitySpan::new(0, 1, "PER")]];
        let table = format_eval(&evaluate(&gold, &gold).unwrap());
        assert!(table.lines().last().unwrap().starts_with("overall"));
        assert!(table.contains("1.0000"));
    }
}
