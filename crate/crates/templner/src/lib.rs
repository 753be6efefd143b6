//! File formats, external scorers and the command line for template-ranking
//! NER built on `templner-core`.
//!
//! - [`conll`]: CoNLL column files.
//! - [`pairs_io`]: line-oriented training pair files.
//! - [`checkpoint`]: binary model checkpoints.
//! - [`template_config`]: TOML template and label-word files.
//! - [`protocol`], [`external`], [`serve`]: the JSON-lines scorer protocol,
//!   its client and a loopback server.
//! - [`parallel`]: multi-threaded batch decoding.
//! - [`report`], [`manifest`]: output documents.
//! - [`cli`]: argument parsing and subcommands.

pub mod checkpoint;
pub mod cli;
pub mod conll;
pub mod external;
pub mod manifest;
pub mod pairs_io;
pub mod parallel;
pub mod protocol;
pub mod report;
pub mod serve;
pub mod template_config;

pub use templner_core as core;
