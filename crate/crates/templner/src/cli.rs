//! Command-line interface.
//!
//! Settings are resolved as command-line flag, then `--config` file, then
//! preset or built-in default. The config file is flat `key = value` lines
//! (`#` starts a comment) whose keys are the long flag names, with `-` or
//! `_` accepted interchangeably.
//!
//! Failures print one line `error[<class>]: <message>` on stderr and exit
//! with a nonzero status.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt;
use std::io::{self, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use templner_core::corpus::{corpus_stats, downsample_in_domain, sample_few_shot, DownsampleOptions};
use templner_core::decoder::{ensemble_decode, entities, DecodeError};
use templner_core::eval::{bucket_report, evaluate, frequency_buckets, BucketMode};
use templner_core::pairs::{build_training_pairs, PairConfig, PairError, PairStatus};
use templner_core::pipeline::{format_sweep, template_sweep, PipelineConfig, PipelineError};
use templner_core::scorer::{fine_tune, fit, TrainError, TrainStats, Vocab};
use templner_core::synthetic::{generate, train_test, Domain, SyntheticConfig};
use templner_core::templates::{builtin_templates, default_label_words, TemplateError};
use templner_core::{Corpus, DecodeConfig, GenerativeScorer, LabelWordMap, ScoreError, TemplateSpec, TinySeq2Seq};

use crate::checkpoint::{self, CheckpointError};
use crate::conll::{read_conll, write_conll, ConllError};
use crate::external::{Endpoint, ExternalScorer, ENDPOINT_ENV};
use crate::manifest::Manifest;
use crate::pairs_io::{parse_pairs, write_pairs};
use crate::parallel::decode_parallel;
use crate::report::{candidates_jsonl, format_eval, format_stats, parse_candidates, write_predictions};
use crate::template_config::{parse_template_file, resolve_template, TemplateFile};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TEMPLATE: &str = "is-a-entity";

/// A failure with a short machine-readable class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub class: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(class: &'static str, message: impl Into<String>) -> Self {
        Self { class, message: message.into() }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        if self.class == "usage" {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_line = self.message.replace('\n', " ");
        write!(f, "error[{}]: {}", self.class, one_line.trim())
    }
}

impl std::error::Error for CliError {}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::new("io", format!("{}: {e}", path.display()))
}

impl From<ConllError> for CliError {
    fn from(e: ConllError) -> Self {
        let class = if matches!(e, ConllError::Io { .. }) { "io" } else { "parse" };
        CliError::new(class, e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        let class = if matches!(e, CheckpointError::Io { .. }) { "io" } else { "model" };
        CliError::new(class, e.to_string())
    }
}

impl From<TemplateError> for CliError {
    fn from(e: TemplateError) -> Self {
        CliError::new("config", e.to_string())
    }
}

impl From<ScoreError> for CliError {
    fn from(e: ScoreError) -> Self {
        let class = if matches!(e, ScoreError::InvalidModel(_)) { "model" } else { "scorer" };
        CliError::new(class, e.to_string())
    }
}

impl From<DecodeError> for CliError {
    fn from(e: DecodeError) -> Self {
        let class = if matches!(e, DecodeError::Scorer { .. }) { "scorer" } else { "decode" };
        CliError::new(class, e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        CliError::new("train", e.to_string())
    }
}

impl From<PairError> for CliError {
    fn from(e: PairError) -> Self {
        CliError::new("pairs", e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Pairs(e) => e.into(),
            PipelineError::Model(e) => e.into(),
            PipelineError::Train(e) => e.into(),
            PipelineError::Decode(e) => e.into(),
            PipelineError::Eval(e) => CliError::new("eval", e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "templner", version, about = "Template-ranking named entity recognition")]
pub struct Cli {
    /// Flat `key = value` settings file; flags take precedence over it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sentence and mention counts of CoNLL files.
    Stats(StatsArgs),
    /// K-shot sampling or per-label quota downsampling of a corpus.
    Sample(SampleArgs),
    /// Build training pairs (positives and sampled negatives) from a corpus.
    Pairs(PairsArgs),
    /// Train a fresh model on a pairs file.
    Train(TrainCmdArgs),
    /// Continue training an existing checkpoint on a pairs file.
    Finetune(FinetuneArgs),
    /// Label a corpus with a trained model or an external scorer.
    Decode(DecodeArgs),
    /// Entity-level precision, recall and F1 of predictions against gold.
    Eval(EvalArgs),
    /// Entity-level majority voting over several candidate files.
    Ensemble(EnsembleArgs),
    /// Serve a checkpoint over the JSON-lines scorer protocol.
    Serve(ServeArgs),
    /// Write a synthetic corpus.
    Synth(SynthArgs),
    /// Train and evaluate one model per template and print a comparison table.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// CoNLL file(s); each is reported separately.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Mentions per entity type (K-shot sampling).
    #[arg(long, conflicts_with = "quota")]
    pub k: Option<usize>,
    /// Per-label mention cap `LABEL=N` (in-domain downsampling); repeatable.
    #[arg(long, value_name = "LABEL=N")]
    pub quota: Vec<String>,
    /// Keep sentences without entities when downsampling.
    #[arg(long)]
    pub keep_entity_free: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct TemplateArgs {
    /// Template name or 1-based index among the built-ins.
    #[arg(long)]
    pub template: Option<String>,
    /// TOML file with extra templates and label-word overrides.
    #[arg(long, value_name = "FILE")]
    pub templates: Option<PathBuf>,
    /// Label-word override `LABEL=WORD`; repeatable.
    #[arg(long, value_name = "LABEL=WORD")]
    pub label_word: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PairsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub template: TemplateArgs,
    /// Negatives per positive.
    #[arg(long)]
    pub neg_ratio: Option<f64>,
    #[arg(long)]
    pub max_span_len: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct TrainingArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub warmup_steps: Option<usize>,
    /// Global gradient-norm clip; 0 disables clipping.
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Base settings: `default` or `desk` (small, fast).
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Even; split between the two encoder directions.
    #[arg(long)]
    pub hidden_dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainCmdArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// Checkpoint to start from.
    #[arg(long)]
    pub init: PathBuf,
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args, Default)]
pub struct ScorerArgs {
    /// Built-in model checkpoint.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// External scorer, `cmd:<command>` or `tcp:<host>:<port>`.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Seconds to wait for an external scorer response.
    #[arg(long)]
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Predicted CoNLL file.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON-lines record of every kept entity and its score.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[command(flatten)]
    pub template: TemplateArgs,
    /// Comma-separated entity labels; defaults to the labels of the input.
    #[arg(long)]
    pub labels: Option<String>,
    #[arg(long)]
    pub max_span_len: Option<usize>,
    /// Decoding threads; output does not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Rank by mean per-token log-probability instead of the sum.
    #[arg(long)]
    pub length_normalize: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BucketModeArg {
    TypeCount,
    MentionMass,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    /// Training corpus; enables the frequency-bucket breakdown.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub bucket_mode: Option<BucketModeArg>,
    #[arg(long)]
    pub json: bool,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Corpus the candidate files were decoded from.
    #[arg(long)]
    pub input: PathBuf,
    /// One candidate file per model.
    #[arg(long, required = true, num_args = 1..)]
    pub candidates: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Listen on a TCP address instead of stdin/stdout.
    #[arg(long)]
    pub listen: Option<String>,
    /// Exit after this many TCP connections.
    #[arg(long)]
    pub max_connections: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    A,
    B,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub domain: DomainArg,
    #[arg(long)]
    pub sentences: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a held-out split of `--test-sentences` sentences here.
    #[arg(long, requires = "test_sentences")]
    pub test_out: Option<PathBuf>,
    #[arg(long)]
    pub test_sentences: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Templates to compare; the built-ins when omitted.
    #[arg(long, value_name = "FILE")]
    pub templates: Option<PathBuf>,
    #[arg(long, value_name = "LABEL=WORD")]
    pub label_word: Vec<String>,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Write the rows as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const CONFIG_KEYS: &[&str] = &[
    "seed",
    "epochs",
    "lr",
    "batch_size",
    "warmup_steps",
    "clip_norm",
    "preset",
    "embed_dim",
    "hidden_dim",
    "template",
    "templates",
    "neg_ratio",
    "max_span_len",
    "k",
    "keep_entity_free",
    "labels",
    "workers",
    "length_normalize",
    "model",
    "endpoint",
    "timeout_secs",
    "bucket_mode",
    "sentences",
    "test_sentences",
];

/// Values from a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |why: &str| CliError::new("config", format!("config line {}: {why}", i + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected `key = value`"))?;
            let key = key.trim().replace('-', "_");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(bad(&format!("unknown key `{key}`")));
            }
            let value = value.trim();
            let value = value.strip_prefix('"').and_then(|v| v.strip_suffix('"')).unwrap_or(value);
            if values.insert(key.clone(), value.to_string()).is_some() {
                return Err(bad(&format!("duplicate key `{key}`")));
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => Self::parse(&std::fs::read_to_string(p).map_err(io_err(p))?),
            None => Ok(Self::default()),
        }
    }

    /// Flag value, else config value, else nothing.
    pub fn opt<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::new("config", format!("config key `{key}` = `{raw}`: {e}"))),
            None => Ok(None),
        }
    }

    pub fn get<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        Ok(self.opt(key, flag)?.unwrap_or(default))
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn finish_manifest(manifest: &mut Manifest, inputs: &[&Path], outputs: &[&Path]) -> Result<(), CliError> {
    for p in inputs {
        manifest.input(p).map_err(io_err(p))?;
    }
    for p in outputs {
        manifest.output(p).map_err(io_err(p))?;
    }
    let primary = outputs.first().expect("at least one output");
    manifest.write_beside(primary).map_err(io_err(primary))?;
    Ok(())
}

fn seeds(seed: u64) -> BTreeMap<String, u64> {
    BTreeMap::from([("seed".to_string(), seed)])
}

fn parse_assignment(raw: &str, what: &str) -> Result<(String, String), CliError> {
    match raw.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(CliError::new("usage", format!("{what} `{raw}` must look like KEY=VALUE"))),
    }
}

/// Defaults for `labels`, then template-file words, then `LABEL=WORD` flags.
fn resolve_label_words<'a>(
    labels: impl IntoIterator<Item = &'a String>,
    file: Option<&TemplateFile>,
    overrides: &[String],
) -> Result<LabelWordMap, CliError> {
    let labels: Vec<&String> = labels.into_iter().collect();
    let defaults = default_label_words(labels.iter().copied())?;
    let mut words: BTreeMap<String, String> = defaults.iter().map(|(l, w)| (l.to_string(), w.join(" "))).collect();
    if let Some(f) = file {
        for (l, w) in &f.label_words {
            if words.contains_key(l) {
                words.insert(l.clone(), w.clone());
            }
        }
    }
    for raw in overrides {
        let (l, w) = parse_assignment(raw, "label word")?;
        words.insert(l, w);
    }
    Ok(LabelWordMap::new(words)?)
}

fn load_template_file(path: Option<&Path>) -> Result<Option<TemplateFile>, CliError> {
    path.map(|p| parse_template_file(&read_text(p)?).map_err(|e| CliError::new("config", format!("{}: {e}", p.display()))))
        .transpose()
}

fn resolve_template_args(
    settings: &Settings,
    args: &TemplateArgs,
) -> Result<(TemplateSpec, Option<TemplateFile>, Option<PathBuf>), CliError> {
    let file_path: Option<PathBuf> = settings.opt("templates", args.templates.clone())?;
    let file = load_template_file(file_path.as_deref())?;
    let name = settings.get("template", args.template.clone(), DEFAULT_TEMPLATE.to_string())?;
    let template = resolve_template(&name, file.as_ref()).map_err(|e| CliError::new("config", e.to_string()))?;
    Ok((template, file, file_path))
}

fn template_json(t: &TemplateSpec) -> serde_json::Value {
    json!({"name": t.name, "entity": t.entity_pattern().to_string(), "none": t.none_pattern().to_string()})
}

fn words_json(words: &LabelWordMap) -> serde_json::Value {
    words.iter().map(|(l, w)| (l.to_string(), json!(w.join(" ")))).collect::<serde_json::Map<_, _>>().into()
}

fn resolve_training(
    settings: &Settings,
    args: &TrainingArgs,
    model: Option<&ModelArgs>,
) -> Result<(PipelineConfig, u64), CliError> {
    let preset = settings.get("preset", args.preset.clone(), "default".to_string())?;
    let base = match preset.as_str() {
        "default" => PipelineConfig::default(),
        "desk" => PipelineConfig::desk(),
        other => return Err(CliError::new("config", format!("unknown preset `{other}` (expected default or desk)"))),
    };
    let seed = settings.get("seed", args.seed, DEFAULT_SEED)?;
    let mut cfg = base.with_seed(seed);
    cfg.train.epochs = settings.get("epochs", args.epochs, cfg.train.epochs)?;
    cfg.train.learning_rate = settings.get("lr", args.lr, cfg.train.learning_rate)?;
    cfg.train.batch_size = settings.get("batch_size", args.batch_size, cfg.train.batch_size)?;
    cfg.train.warmup_steps = settings.get("warmup_steps", args.warmup_steps, cfg.train.warmup_steps)?;
    let clip = settings.get("clip_norm", args.clip_norm, cfg.train.clip_norm.unwrap_or(0.0))?;
    cfg.train.clip_norm = (clip > 0.0).then_some(clip);
    if let Some(m) = model {
        cfg.model.embed_dim = settings.get("embed_dim", m.embed_dim, cfg.model.embed_dim)?;
        cfg.model.hidden_dim = settings.get("hidden_dim", m.hidden_dim, cfg.model.hidden_dim)?;
    }
    Ok((cfg, seed))
}

fn training_json(cfg: &PipelineConfig, preset_model: bool) -> serde_json::Value {
    let mut v = json!({ "train": cfg.train });
    if preset_model {
        v["model"] = json!(cfg.model);
    }
    v
}

fn report_training(stats: &TrainStats, err: &mut dyn Write) {
    if let Some(loss) = stats.final_loss {
        let _ = writeln!(err, "trained {} epochs ({} steps), final loss {loss:.6}", stats.epoch_losses.len(), stats.steps);
    }
}

fn corpus_from(path: &Path) -> Result<Corpus, CliError> {
    Ok(read_conll(path)?)
}

fn cmd_stats(args: &StatsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut reports = serde_json::Map::new();
    for path in &args.input {
        let stats = corpus_stats(&corpus_from(path)?);
        if !args.json {
            let _ = writeln!(out, "== {}", path.display());
            let _ = write!(out, "{}", format_stats(&stats));
        }
        reports.insert(path.display().to_string(), json!(stats));
    }
    let doc = serde_json::Value::Object(reports);
    let text = serde_json::to_string_pretty(&doc).expect("stats serialize") + "\n";
    if args.json {
        let _ = write!(out, "{text}");
    }
    if let Some(path) = &args.out {
        write_text(path, &text)?;
        let mut m = Manifest::new("stats", json!({}), BTreeMap::new());
        let inputs: Vec<&Path> = args.input.iter().map(PathBuf::as_path).collect();
        finish_manifest(&mut m, &inputs, &[path])?;
    }
    Ok(())
}

fn cmd_sample(settings: &Settings, args: &SampleArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let corpus = corpus_from(&args.input)?;
    let seed = settings.get("seed", args.seed, DEFAULT_SEED)?;
    let k: Option<usize> = if args.quota.is_empty() { settings.opt("k", args.k)? } else { args.k };
    let (sampled, config) = match (k, args.quota.is_empty()) {
        (Some(k), true) => {
            let s = sample_few_shot(&corpus, k, seed);
            (s, json!({"mode": "few-shot", "k": k, "seed": seed}))
        }
        (None, false) => {
            let mut quotas = BTreeMap::new();
            for raw in &args.quota {
                let (l, n) = parse_assignment(raw, "quota")?;
                let n: usize = n.parse().map_err(|e| CliError::new("usage", format!("quota `{raw}`: {e}")))?;
                quotas.insert(l, n);
            }
            let keep = settings.get("keep_entity_free", args.keep_entity_free, true)?;
            let d = downsample_in_domain(&corpus, &quotas, seed, DownsampleOptions { keep_entity_free: keep })
                .map_err(|e| CliError::new("config", e.to_string()))?;
            let _ = writeln!(out, "{}", json!({"achieved": d.achieved, "overshoot": d.overshoot}));
            (d.corpus, json!({"mode": "downsample", "quotas": quotas, "keep_entity_free": keep, "seed": seed}))
        }
        _ => return Err(CliError::new("usage", "pass exactly one of --k or --quota")),
    };
    write_text(&args.out, &write_conll(&sampled))?;
    let mut m = Manifest::new("sample", config, seeds(seed));
    finish_manifest(&mut m, &[&args.input], &[&args.out])
}

fn cmd_pairs(settings: &Settings, args: &PairsArgs, err: &mut dyn Write) -> Result<(), CliError> {
    let corpus = corpus_from(&args.input)?;
    let (template, file, file_path) = resolve_template_args(settings, &args.template)?;
    let words = resolve_label_words(corpus.label_set(), file.as_ref(), &args.template.label_word)?;
    let seed = settings.get("seed", args.seed, DEFAULT_SEED)?;
    let defaults = PairConfig::default();
    let config = PairConfig {
        neg_ratio: settings.get("neg_ratio", args.neg_ratio, defaults.neg_ratio)?,
        max_span_len: settings.get("max_span_len", args.max_span_len, defaults.max_span_len)?,
        seed,
    };
    let set = build_training_pairs(&corpus, &template, &words, &config)?;
    match set.status {
        PairStatus::Complete => {}
        PairStatus::NegativeShortfall { requested, available } => {
            let _ = writeln!(err, "warning: {requested} negatives requested, only {available} eligible spans");
        }
        PairStatus::NoGoldMentions => {
            let _ = writeln!(err, "warning: corpus has no gold mentions; no pairs written");
        }
    }
    let _ = writeln!(err, "{} positives, {} negatives", set.positives, set.negatives);
    write_text(&args.out, &write_pairs(&set.pairs))?;
    let cfg = json!({
        "template": template_json(&template),
        "label_words": words_json(&words),
        "neg_ratio": config.neg_ratio,
        "max_span_len": config.max_span_len,
        "seed": seed,
    });
    let mut m = Manifest::new("pairs", cfg, seeds(seed));
    let mut inputs: Vec<&Path> = vec![&args.input];
    inputs.extend(file_path.as_deref());
    finish_manifest(&mut m, &inputs, &[&args.out])
}

fn cmd_train(settings: &Settings, args: &TrainCmdArgs, err: &mut dyn Write) -> Result<(), CliError> {
    let pairs = parse_pairs(&read_text(&args.pairs)?)
        .map_err(|e| CliError::new("parse", format!("{}: {e}", args.pairs.display())))?;
    let (cfg, seed) = resolve_training(settings, &args.training, Some(&args.model))?;
    let vocab = Vocab::build(pairs.iter().flat_map(|p| p.source.iter().chain(&p.target)));
    let mut model = TinySeq2Seq::new(vocab, cfg.model)?;
    let stats = fit(&mut model, &pairs, &cfg.train)?;
    report_training(&stats, err);
    checkpoint::save(&model, &args.out)?;
    let mut m = Manifest::new("train", training_json(&cfg, true), seeds(seed));
    finish_manifest(&mut m, &[&args.pairs], &[&args.out])
}

fn cmd_finetune(settings: &Settings, args: &FinetuneArgs, err: &mut dyn Write) -> Result<(), CliError> {
    let pairs = parse_pairs(&read_text(&args.pairs)?)
        .map_err(|e| CliError::new("parse", format!("{}: {e}", args.pairs.display())))?;
    let mut model = checkpoint::load(&args.init)?;
    let (cfg, seed) = resolve_training(settings, &args.training, None)?;
    let stats = fine_tune(&mut model, &pairs, &cfg.train)?;
    if stats.added_tokens > 0 {
        let _ = writeln!(err, "added {} tokens to the vocabulary", stats.added_tokens);
    }
    report_training(&stats.train, err);
    checkpoint::save(&model, &args.out)?;
    let mut m = Manifest::new("finetune", training_json(&cfg, false), seeds(seed));
    finish_manifest(&mut m, &[&args.init, &args.pairs], &[&args.out])
}

enum ScorerSource {
    Model(PathBuf),
    External(Endpoint),
}

/// Flags win, then the endpoint environment variable, then the config file.
/// Within one level, setting both a model and an endpoint is an error.
fn resolve_scorer(settings: &Settings, args: &ScorerArgs) -> Result<ScorerSource, CliError> {
    let env_endpoint = std::env::var(ENDPOINT_ENV).ok().filter(|v| !v.trim().is_empty());
    let (model, endpoint, level) = if args.model.is_some() || args.endpoint.is_some() {
        (args.model.clone(), args.endpoint.clone(), "command line")
    } else if env_endpoint.is_some() {
        (None, env_endpoint, ENDPOINT_ENV)
    } else {
        (settings.opt("model", None)?, settings.opt("endpoint", None)?, "config file")
    };
    match (model, endpoint) {
        (Some(m), None) => Ok(ScorerSource::Model(m)),
        (None, Some(e)) => Ok(ScorerSource::External(e.parse().map_err(|m: String| CliError::new("config", m))?)),
        (Some(_), Some(e)) => Err(CliError::new(
            "config",
            format!("the {level} sets both a model checkpoint and the endpoint `{e}`; choose one"),
        )),
        (None, None) => Err(CliError::new(
            "config",
            format!("no scorer: pass --model, --endpoint or set {ENDPOINT_ENV}"),
        )),
    }
}

fn cmd_decode(settings: &Settings, args: &DecodeArgs, err: &mut dyn Write) -> Result<(), CliError> {
    let corpus = corpus_from(&args.input)?;
    let (template, file, file_path) = resolve_template_args(settings, &args.template)?;
    let labels: BTreeSet<String> = match settings.opt::<String>("labels", args.labels.clone())? {
        Some(list) => list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect(),
        None => corpus.label_set().clone(),
    };
    if labels.is_empty() {
        return Err(CliError::new("config", "no entity labels: the input has none, pass --labels"));
    }
    let words = resolve_label_words(&labels, file.as_ref(), &args.template.label_word)?;
    let mut config = DecodeConfig::new(template.clone(), words.clone());
    config.max_span_len = settings.get("max_span_len", args.max_span_len, config.max_span_len)?;
    config.length_normalize = settings.get("length_normalize", args.length_normalize, false)?;
    let workers = settings.get("workers", args.workers, 1usize)?;

    let source = resolve_scorer(settings, &args.scorer)?;
    let scorer: Box<dyn GenerativeScorer + Sync> = match &source {
        ScorerSource::Model(path) => Box::new(checkpoint::load(path)?),
        ScorerSource::External(endpoint) => {
            let secs = settings.get("timeout_secs", args.scorer.timeout_secs, crate::external::DEFAULT_TIMEOUT.as_secs())?;
            Box::new(ExternalScorer::connect(endpoint, Duration::from_secs(secs))?)
        }
    };
    let decoded = decode_parallel(scorer.as_ref(), corpus.sentences(), &config, workers)?;
    let predicted: Vec<_> = decoded.iter().map(|c| entities(c)).collect();
    let text = write_predictions(corpus.sentences(), &predicted).map_err(|e| CliError::new("decode", e.to_string()))?;
    write_text(&args.out, &text)?;
    if let Some(path) = &args.candidates {
        write_text(path, &candidates_jsonl(&decoded))?;
    }
    let _ = writeln!(
        err,
        "decoded {} sentences, {} entities",
        corpus.len(),
        predicted.iter().map(Vec::len).sum::<usize>()
    );

    let scorer_json = match &source {
        ScorerSource::Model(p) => json!({"model": p.display().to_string()}),
        ScorerSource::External(e) => json!({"endpoint": e.to_string()}),
    };
    let cfg = json!({
        "template": template_json(&template),
        "label_words": words_json(&words),
        "max_span_len": config.max_span_len,
        "length_normalize": config.length_normalize,
        "scorer": scorer_json,
    });
    let mut m = Manifest::new("decode", cfg, BTreeMap::new());
    let mut inputs: Vec<&Path> = vec![&args.input];
    if let ScorerSource::Model(p) = &source {
        inputs.push(p);
    }
    inputs.extend(file_path.as_deref());
    let mut outputs: Vec<&Path> = vec![&args.out];
    outputs.extend(args.candidates.as_deref());
    finish_manifest(&mut m, &inputs, &outputs)
}

fn cmd_eval(settings: &Settings, args: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let pred = corpus_from(&args.pred)?;
    let gold = corpus_from(&args.gold)?;
    for (i, (p, g)) in pred.sentences().iter().zip(gold.sentences()).enumerate() {
        if p.tokens() != g.tokens() {
            return Err(CliError::new("eval", format!("sentence {i}: predicted and gold tokens differ")));
        }
    }
    let predicted = pred.gold_spans();
    let gold_spans = gold.gold_spans();
    let mut report = evaluate(&predicted, &gold_spans).map_err(|e| CliError::new("eval", e.to_string()))?;
    let mode_arg: Option<String> = settings.opt("bucket_mode", None)?;
    let mode = match (args.bucket_mode, mode_arg.as_deref()) {
        (Some(BucketModeArg::MentionMass), _) | (None, Some("mention-mass")) => BucketMode::MentionMass,
        (Some(BucketModeArg::TypeCount), _) | (None, None | Some("type-count")) => BucketMode::TypeCount,
        (None, Some(other)) => return Err(CliError::new("config", format!("unknown bucket_mode `{other}`"))),
    };
    if let Some(train_path) = &args.train {
        let train = corpus_from(train_path)?;
        let buckets = frequency_buckets(&train, &gold, mode).map_err(|e| CliError::new("eval", e.to_string()))?;
        report.buckets =
            Some(bucket_report(&predicted, &gold_spans, &buckets).map_err(|e| CliError::new("eval", e.to_string()))?);
    }
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    if args.json {
        let _ = write!(out, "{text}");
    } else {
        let _ = write!(out, "{}", format_eval(&report));
    }
    if let Some(path) = &args.out {
        write_text(path, &text)?;
        let mode_name = match mode {
            BucketMode::TypeCount => "type-count",
            BucketMode::MentionMass => "mention-mass",
        };
        let mut m = Manifest::new("eval", json!({"bucket_mode": mode_name}), BTreeMap::new());
        let mut inputs: Vec<&Path> = vec![&args.pred, &args.gold];
        inputs.extend(args.train.as_deref());
        finish_manifest(&mut m, &inputs, &[path])?;
    }
    Ok(())
}

fn cmd_ensemble(args: &EnsembleArgs) -> Result<(), CliError> {
    let corpus = corpus_from(&args.input)?;
    let mut per_model = Vec::with_capacity(args.candidates.len());
    for path in &args.candidates {
        let grouped = parse_candidates(&read_text(path)?, corpus.len())
            .map_err(|e| CliError::new("parse", format!("{}: {e}", path.display())))?;
        per_model.push(grouped);
    }
    let predicted: Vec<_> = (0..corpus.len())
        .map(|i| {
            let outputs: Vec<_> = per_model.iter().map(|m| m[i].clone()).collect();
            ensemble_decode(&outputs)
        })
        .collect();
    let text = write_predictions(corpus.sentences(), &predicted).map_err(|e| CliError::new("decode", e.to_string()))?;
    write_text(&args.out, &text)?;
    let mut m = Manifest::new("ensemble", json!({"models": args.candidates.len(), "rule": "strict-majority"}), BTreeMap::new());
    let mut inputs: Vec<&Path> = vec![&args.input];
    inputs.extend(args.candidates.iter().map(PathBuf::as_path));
    finish_manifest(&mut m, &inputs, &[&args.out])
}

fn cmd_serve(args: &ServeArgs, err: &mut dyn Write) -> Result<(), CliError> {
    let model = checkpoint::load(&args.model)?;
    match &args.listen {
        Some(addr) => {
            let listener = TcpListener::bind(addr).map_err(|e| CliError::new("io", format!("bind {addr}: {e}")))?;
            let local = listener.local_addr().map_err(|e| CliError::new("io", e.to_string()))?;
            let _ = writeln!(err, "listening on {local}");
            let _ = err.flush();
            crate::serve::serve_tcp(&model, &listener, args.max_connections)
                .map_err(|e| CliError::new("io", e.to_string()))?;
        }
        None => {
            let stdin = io::stdin();
            let stdout = io::stdout();
            crate::serve::serve(&model, BufReader::new(stdin.lock()), stdout.lock())
                .map_err(|e| CliError::new("io", e.to_string()))?;
        }
    }
    Ok(())
}

fn cmd_synth(settings: &Settings, args: &SynthArgs) -> Result<(), CliError> {
    let domain = match args.domain {
        DomainArg::A => Domain::A,
        DomainArg::B => Domain::B,
    };
    let seed = settings.get("seed", args.seed, DEFAULT_SEED)?;
    let sentences = settings.get("sentences", args.sentences, SyntheticConfig::default().sentences)?;
    let test_sentences: Option<usize> = settings.opt("test_sentences", args.test_sentences)?;
    let mut outputs: Vec<&Path> = vec![&args.out];
    let config = match (&args.test_out, test_sentences) {
        (Some(test_out), Some(n)) => {
            let (train, test) = train_test(domain, sentences, n, seed);
            write_text(&args.out, &write_conll(&train))?;
            write_text(test_out, &write_conll(&test))?;
            outputs.push(test_out);
            json!({"domain": format!("{domain:?}"), "sentences": sentences, "test_sentences": n, "split": true})
        }
        _ => {
            let corpus = generate(domain, &SyntheticConfig { sentences, seed, ..SyntheticConfig::default() });
            write_text(&args.out, &write_conll(&corpus))?;
            json!({"domain": format!("{domain:?}"), "sentences": sentences, "split": false})
        }
    };
    let mut m = Manifest::new("synth", config, seeds(seed));
    finish_manifest(&mut m, &[], &outputs)
}

fn cmd_sweep(settings: &Settings, args: &SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let train = corpus_from(&args.train)?;
    let test = corpus_from(&args.test)?;
    let file_path: Option<PathBuf> = settings.opt("templates", args.templates.clone())?;
    let file = load_template_file(file_path.as_deref())?;
    let templates = match &file {
        Some(f) if !f.templates.is_empty() => f.templates.clone(),
        _ => builtin_templates(),
    };
    let labels: BTreeSet<String> = train.label_set().union(test.label_set()).cloned().collect();
    let words = resolve_label_words(&labels, file.as_ref(), &args.label_word)?;
    let (cfg, seed) = resolve_training(settings, &args.training, Some(&args.model))?;
    let rows = template_sweep(&train, &test, &templates, &words, &cfg)?;
    let _ = write!(out, "{}", format_sweep(&rows));
    if let Some(path) = &args.out {
        let doc: Vec<_> = rows
            .iter()
            .map(|r| {
                json!({
                    "name": r.name,
                    "entity": r.entity_pattern,
                    "none": r.none_pattern,
                    "reference_f1": r.reference_f1,
                    "final_loss": r.final_loss,
                    "report": r.report,
                })
            })
            .collect();
        write_text(path, &(serde_json::to_string_pretty(&doc).expect("rows serialize") + "\n"))?;
        let mut m = Manifest::new(
            "sweep",
            json!({"training": training_json(&cfg, true), "label_words": words_json(&words)}),
            seeds(seed),
        );
        let mut inputs: Vec<&Path> = vec![&args.train, &args.test];
        inputs.extend(file_path.as_deref());
        finish_manifest(&mut m, &inputs, &[path])?;
    }
    Ok(())
}

/// Runs a parsed command line, writing reports to `out` and progress to `err`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let settings = Settings::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Stats(a) => cmd_stats(a, out),
        Command::Sample(a) => cmd_sample(&settings, a, out),
        Command::Pairs(a) => cmd_pairs(&settings, a, err),
        Command::Train(a) => cmd_train(&settings, a, err),
        Command::Finetune(a) => cmd_finetune(&settings, a, err),
        Command::Decode(a) => cmd_decode(&settings, a, err),
        Command::Eval(a) => cmd_eval(&settings, a, out),
        Command::Ensemble(a) => cmd_ensemble(a),
        Command::Serve(a) => cmd_serve(a, err),
        Command::Synth(a) => cmd_synth(&settings, a),
        Command::Sweep(a) => cmd_sweep(&settings, a, out),
    }
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            let message = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("{}", CliError::new("usage", message));
            return 2;
        }
    };
    let stdout = io::stdout();
    let stderr = io::stderr();
    match run(&cli, &mut stdout.lock(), &mut stderr.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
