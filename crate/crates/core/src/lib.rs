//! Template-ranking named entity recognition.
//!
//! Named entity recognition is treated as ranking statements such as
//! `"Bangkok is a location entity"` against `"Bangkok is not a named entity"`
//! with a generative sequence-to-sequence scorer. Every candidate span of a
//! sentence is filled into one statement per entity type plus the non-entity
//! statement, the scorer assigns each statement the sum of its conditional
//! token log-probabilities, and the best-scoring statement labels the span.
//!
//! The crate is `no_std` (with `alloc`) and contains no IO. File formats,
//! external scorers and the command line live in the `templner` crate.
//!
//! - [`corpus`]: labeled sentences, BIO codec, statistics, few-shot sampling.
//! - [`templates`]: statement templates and the label-word map.
//! - [`pairs`]: training pair construction with sampled negatives.
//! - [`scorer`]: the scoring contract and the built-in trainable seq2seq model.
//! - [`decoder`]: span enumeration, classification, overlap resolution, voting.
//! - [`eval`]: entity-level precision/recall/F1 and frequency buckets.
//! - [`synthetic`]: deterministic synthetic corpora for desk-scale experiments.
//! - [`pipeline`]: end-to-end train/decode/evaluate helpers.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod corpus;
pub mod decoder;
pub mod eval;
pub mod pairs;
pub mod pipeline;
pub mod scorer;
pub mod synthetic;
pub mod templates;

mod rng;

pub use corpus::{Corpus, CorpusError, CorpusStats, EntitySpan, LabeledSentence, Tag};
pub use decoder::{DecodeConfig, ScoredCandidate};
pub use eval::EvalReport;
pub use pairs::{Polarity, TrainingPair};
pub use scorer::{GenerativeScorer, ScoreError, TinySeq2Seq, TokenScores};
pub use templates::{LabelWordMap, SpanLabel, TemplateSpec};
