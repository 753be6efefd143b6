//! Training pair files: one pair per line,
//! `source tokens<TAB>target tokens<TAB>polarity`, tokens space-separated.

use std::fmt::Write as _;

use templner_core::{Polarity, TrainingPair};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PairsFileError {
    #[error("line {line}: expected 3 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: unknown polarity `{value}` (expected positive or negative)")]
    Polarity { line: usize, value: String },
    #[error("line {line}: empty {field}")]
    Empty { line: usize, field: &'static str },
}

pub fn write_pairs(pairs: &[TrainingPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        let _ = writeln!(out, "{}\t{}\t{}", p.source.join(" "), p.target.join(" "), p.polarity.as_str());
    }
    out
}

/// Parses a pairs file. Blank lines are ignored.
pub fn parse_pairs(text: &str) -> Result<Vec<TrainingPair>, PairsFileError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 3 {
            return Err(PairsFileError::FieldCount { line, found: fields.len() });
        }
        let tokens = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        let source = tokens(fields[0]);
        let target = tokens(fields[1]);
        if source.is_empty() {
            return Err(PairsFileError::Empty { line, field: "source" });
        }
        if target.is_empty() {
            return Err(PairsFileError::Empty { line, field: "target" });
        }
        let polarity: Polarity = fields[2]
            .trim()
            .parse()
            .map_err(|value| PairsFileError::Polarity { line, value })?;
        pairs.push(TrainingPair::new(source, target, polarity));
    }
    Ok(pairs)
}
