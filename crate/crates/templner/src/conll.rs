//! CoNLL-style column files: one token per line, whitespace-separated
//! columns with the token first and the BIO tag last, blank lines between
//! sentences. `-DOCSTART-` lines are document markers and are skipped.

use std::fmt::Write as _;
use std::path::Path;

use templner_core::{Corpus, CorpusError, LabeledSentence, Tag};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConllError {
    #[error("line {line}: expected `<token> ... <tag>`, found `{content}`")]
    MissingTag { line: usize, content: String },
    #[error("line {line}: {source}")]
    Tag { line: usize, source: CorpusError },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl ConllError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ConllError::MissingTag { line, .. } | ConllError::Tag { line, .. } => Some(*line),
            ConllError::Io { .. } => None,
        }
    }
}

struct Pending {
    tokens: Vec<String>,
    tags: Vec<Tag>,
    lines: Vec<usize>,
}

impl Pending {
    fn new() -> Self {
        Self { tokens: Vec::new(), tags: Vec::new(), lines: Vec::new() }
    }

    fn flush(&mut self, out: &mut Vec<LabeledSentence>) -> Result<(), ConllError> {
        if self.tokens.is_empty() {
            return Ok(());
        }
        let tokens = std::mem::take(&mut self.tokens);
        let tags = std::mem::take(&mut self.tags);
        let lines = std::mem::take(&mut self.lines);
        match LabeledSentence::new(tokens, tags) {
            Ok(s) => {
                out.push(s);
                Ok(())
            }
            Err(source) => {
                let line = match &source {
                    CorpusError::InvalidTransition { position, .. } => lines[*position],
                    _ => lines[0],
                };
                Err(ConllError::Tag { line, source })
            }
        }
    }
}

/// Parses a whole CoNLL document. Line numbers in errors are 1-based.
pub fn parse_conll(text: &str) -> Result<Corpus, ConllError> {
    let mut sentences = Vec::new();
    let mut pending = Pending::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            pending.flush(&mut sentences)?;
            continue;
        }
        if trimmed.starts_with("-DOCSTART-") {
            pending.flush(&mut sentences)?;
            continue;
        }
        let columns: Vec<&str> = trimmed.split_whitespace().collect();
        if columns.len() < 2 {
            return Err(ConllError::MissingTag { line, content: trimmed.to_string() });
        }
        let tag = Tag::parse(columns[columns.len() - 1]).map_err(|source| ConllError::Tag { line, source })?;
        pending.tokens.push(columns[0].to_string());
        pending.tags.push(tag);
        pending.lines.push(line);
    }
    pending.flush(&mut sentences)?;
    Ok(Corpus::new(sentences))
}

pub fn read_conll(path: &Path) -> Result<Corpus, ConllError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConllError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_conll(&text)
}

/// Two-column `token tag` rendering; parses back to an equal corpus.
pub fn write_conll(corpus: &Corpus) -> String {
    let mut out = String::new();
    for (i, sentence) in corpus.sentences().iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (token, tag) in sentence.tokens().iter().zip(sentence.tags()) {
            let _ = writeln!(out, "{token} {tag}");
        }
    }
    out
}
