//! Train, decode and evaluate in one call, and the template sweep built on it.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{Corpus, EntitySpan};
use crate::decoder::{decode_sentences, entities, DecodeConfig, DecodeError};
use crate::eval::{evaluate, EvalError, EvalReport};
use crate::pairs::{build_training_pairs, PairConfig, PairError, PairSet};
use crate::scorer::{fine_tune, fit, GenerativeScorer, ModelConfig, ScoreError, TinySeq2Seq, TrainConfig, TrainError, TrainStats, Vocab};
use crate::templates::{LabelWordMap, TemplateSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub pairs: PairConfig,
    pub max_span_len: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            pairs: PairConfig::default(),
            max_span_len: 8,
        }
    }
}

impl PipelineConfig {
    /// Small model and schedule that train on the synthetic corpora in about
    /// a minute on one CPU core.
    pub fn desk() -> Self {
        Self {
            model: ModelConfig { embed_dim: 32, hidden_dim: 64, ..ModelConfig::default() },
            train: TrainConfig { learning_rate: 3e-3, batch_size: 8, epochs: 30, ..TrainConfig::default() },
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.model.seed = seed;
        self.train.seed = seed;
        self.pairs.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PipelineError {
    Pairs(PairError),
    Model(ScoreError),
    Train(TrainError),
    Decode(DecodeError),
    Eval(EvalError),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Pairs(e) => write!(f, "pair construction: {e}"),
            PipelineError::Model(e) => write!(f, "model: {e}"),
            PipelineError::Train(e) => write!(f, "training: {e}"),
            PipelineError::Decode(e) => write!(f, "decoding: {e}"),
            PipelineError::Eval(e) => write!(f, "evaluation: {e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PipelineError {}

macro_rules! from_err {
    ($($src:ty => $variant:ident),*) => {$(
        impl From<$src> for PipelineError {
            fn from(e: $src) -> Self {
                PipelineError::$variant(e)
            }
        }
    )*};
}

from_err!(PairError => Pairs, ScoreError => Model, TrainError => Train, DecodeError => Decode, EvalError => Eval);

/// Vocabulary covering a corpus, the template words and the label words.
pub fn build_vocab(corpus: &Corpus, template: &TemplateSpec, words: &LabelWordMap) -> Vocab {
    let sentence_tokens = corpus.sentences().iter().flat_map(|s| s.tokens().iter().map(String::as_str));
    let label_tokens = words.iter().flat_map(|(_, w)| w.iter().map(String::as_str));
    Vocab::build(sentence_tokens.chain(template.words()).chain(label_tokens))
}

#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub model: TinySeq2Seq,
    pub pairs: PairSet,
    pub stats: TrainStats,
}

/// Builds pairs from `train` and fits a fresh model on them.
pub fn train_model(
    train: &Corpus,
    template: &TemplateSpec,
    words: &LabelWordMap,
    config: &PipelineConfig,
) -> Result<TrainedRun, PipelineError> {
    let pairs = build_training_pairs(train, template, words, &config.pairs)?;
    let mut model = TinySeq2Seq::new(build_vocab(train, template, words), config.model)?;
    let stats = fit(&mut model, &pairs.pairs, &config.train)?;
    Ok(TrainedRun { model, pairs, stats })
}

/// Builds pairs from `train` and continues training `model` on them.
pub fn fine_tune_model(
    mut model: TinySeq2Seq,
    train: &Corpus,
    template: &TemplateSpec,
    words: &LabelWordMap,
    config: &PipelineConfig,
) -> Result<TrainedRun, PipelineError> {
    let pairs = build_training_pairs(train, template, words, &config.pairs)?;
    let stats = fine_tune(&mut model, &pairs.pairs, &config.train)?.train;
    Ok(TrainedRun { model, pairs, stats })
}

/// Decodes every sentence of `test` and scores the result against its gold spans.
pub fn decode_and_evaluate<S: GenerativeScorer + ?Sized>(
    scorer: &S,
    test: &Corpus,
    template: &TemplateSpec,
    words: &LabelWordMap,
    max_span_len: usize,
) -> Result<(Vec<Vec<EntitySpan>>, EvalReport), PipelineError> {
    let mut config = DecodeConfig::new(template.clone(), words.clone());
    config.max_span_len = max_span_len;
    let decoded = decode_sentences(scorer, test.sentences(), &config)?;
    let predicted: Vec<Vec<EntitySpan>> = decoded.iter().map(|c| entities(c)).collect();
    let report = evaluate(&predicted, &test.gold_spans())?;
    Ok((predicted, report))
}

/// Result of training with one template and evaluating on held-out data.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub name: String,
    pub entity_pattern: String,
    pub none_pattern: String,
    /// Reference F1 carried by the template, if any.
    pub reference_f1: Option<f64>,
    pub report: EvalReport,
    pub final_loss: Option<f64>,
}

/// Trains one fresh model per template and evaluates each on `test`.
pub fn template_sweep(
    train: &Corpus,
    test: &Corpus,
    templates: &[TemplateSpec],
    words: &LabelWordMap,
    config: &PipelineConfig,
) -> Result<Vec<SweepRow>, PipelineError> {
    templates
        .iter()
        .map(|template| {
            let run = train_model(train, template, words, config)?;
            let (_, report) = decode_and_evaluate(&run.model, test, template, words, config.max_span_len)?;
            Ok(SweepRow {
                name: template.name.clone(),
                entity_pattern: format!("{}", template.entity_pattern()),
                none_pattern: format!("{}", template.none_pattern()),
                reference_f1: template.dev_f1,
                report,
                final_loss: run.stats.final_loss,
            })
        })
        .collect()
}

/// Plain-text table: entity pattern, non-entity pattern, reference F1, F1.
pub fn format_sweep(rows: &[SweepRow]) -> String {
    let width = |f: fn(&SweepRow) -> &str, title: &str| rows.iter().map(|r| f(r).len()).chain([title.len()]).max().unwrap_or(0);
    let ew = width(|r| &r.entity_pattern, "Entity template");
    let nw = width(|r| &r.none_pattern, "Non-entity template");
    let mut out = format!("{:<ew$} | {:<nw$} | {:>9} | {:>6}\n", "Entity template", "Non-entity template", "Reference", "F1");
    out.push_str(&format!("{}-+-{}-+-{}-+-{}\n", "-".repeat(ew), "-".repeat(nw), "-".repeat(9), "-".repeat(6)));
    for r in rows {
        let reference = r.reference_f1.map(|v| format!("{v:.2}")).unwrap_or_else(|| String::from("-"));
        out.push_str(&format!(
            "{:<ew$} | {:<nw$} | {:>9} | {:>6.2}\n",
            r.entity_pattern,
            r.none_pattern,
            reference,
            100.0 * r.report.f1()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::LossNormalization;
    use crate::synthetic::{train_test, Domain};
    use crate::templates::builtin_templates;

    #[test]
    fn vocab_covers_template_and_label_words() {
        let (train, _) = train_test(Domain::A, 5, 1, 1);
        let template = &builtin_templates()[0];
        let words = Domain::A.label_words();
        let vocab = build_vocab(&train, template, &words);
        for w in ["is", "a", "entity", "not", "named", "person", "location"] {
            assert!(vocab.contains(w), "{w}");
        }
    }

    #[test]
    fn tiny_run_is_deterministic() {
        let (train, test) = train_test(Domain::A, 8, 3, 5);
        let template = &builtin_templates()[0];
        let words = Domain::A.label_words();
        let config = PipelineConfig {
            model: ModelConfig { embed_dim: 8, hidden_dim: 8, ..ModelConfig::default() },
            train: TrainConfig { epochs: 1, warmup_steps: 0, normalization: LossNormalization::TokenMean, ..TrainConfig::default() },
            ..PipelineConfig::default()
        };
        let a = template_sweep(&train, &test, core::slice::from_ref(template), &words, &config).unwrap();
        let b = template_sweep(&train, &test, core::slice::from_ref(template), &words, &config).unwrap();
        assert_eq!(a[0].report, b[0].report);
        assert_eq!(a[0].final_loss, b[0].final_loss);
        let table = format_sweep(&a);
        assert!(table.contains("{span} is a {type} entity"));
        assert!(table.contains("95.27"));
    }
}
