//! Deterministic toy corpora with two entity types.
//!
//! Every mention is introduced by a context word that belongs to exactly one
//! type, so the labeling is unambiguous from local context. Each type draws
//! its names from its own pool. Names are single tokens unless
//! `max_name_len` says otherwise. Domain B reuses the name pools and filler
//! words but has its own labels, label words and context words.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{Corpus, EntitySpan, LabeledSentence};
use crate::rng;
use crate::templates::LabelWordMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    A,
    B,
}

/// One entity type of a synthetic domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticType {
    pub label: &'static str,
    pub label_word: &'static str,
    pub triggers: &'static [&'static str],
}

const DOMAIN_A: [SyntheticType; 2] = [
    SyntheticType { label: "PER", label_word: "person", triggers: &["mr", "dr", "mrs", "prof"] },
    SyntheticType { label: "LOC", label_word: "location", triggers: &["in", "at", "near", "from"] },
];

const DOMAIN_B: [SyntheticType; 2] = [
    SyntheticType { label: "ACTOR", label_word: "actor", triggers: &["starring", "cast", "featuring", "played"] },
    SyntheticType { label: "VENUE", label_word: "venue", triggers: &["inside", "toward", "via", "beside"] },
];

const ONSETS: [&str; 10] = ["b", "d", "f", "g", "k", "l", "m", "p", "s", "t"];
const VOWELS: [&str; 4] = ["a", "e", "o", "u"];
const NAME_SUFFIX: [&str; 3] = ["ra", "lin", "vo"];
const FILLER_CODA: [&str; 3] = ["n", "x", "z"];

impl Domain {
    pub fn types(self) -> &'static [SyntheticType] {
        match self {
            Domain::A => &DOMAIN_A,
            Domain::B => &DOMAIN_B,
        }
    }

    pub fn labels(self) -> Vec<&'static str> {
        self.types().iter().map(|t| t.label).collect()
    }

    pub fn label_words(self) -> LabelWordMap {
        LabelWordMap::new(self.types().iter().map(|t| (t.label, t.label_word)))
            .expect("synthetic label words are distinct")
    }
}

/// Name tokens shared by all domains (capitalised CV + suffix).
pub fn name_pool() -> Vec<String> {
    let mut names = Vec::new();
    for onset in ONSETS.iter().take(8) {
        for vowel in VOWELS.iter().take(2) {
            for suffix in NAME_SUFFIX {
                let mut first = String::from(*onset);
                first.make_ascii_uppercase();
                names.push(format!("{first}{vowel}{suffix}"));
            }
        }
    }
    names
}

/// Names of the `index`-th of `types` entity types: every `types`-th entry
/// of [`name_pool`].
pub fn type_names(index: usize, types: usize) -> Vec<String> {
    name_pool().into_iter().skip(index).step_by(types.max(1)).collect()
}

/// Filler tokens shared by all domains (lowercase CVC).
pub fn filler_pool() -> Vec<String> {
    let mut fillers = Vec::new();
    for onset in ONSETS {
        for vowel in VOWELS {
            for coda in FILLER_CODA {
                fillers.push(format!("{onset}{vowel}{coda}"));
            }
        }
    }
    fillers
}

/// Every token a synthetic corpus can contain, across both domains.
pub fn vocabulary() -> Vec<String> {
    let mut tokens = filler_pool();
    tokens.extend(name_pool());
    for domain in [Domain::A, Domain::B] {
        for t in domain.types() {
            tokens.extend(t.triggers.iter().map(|s| String::from(*s)));
        }
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub sentences: usize,
    pub seed: u64,
    /// Upper bound on mentions per sentence.
    pub max_mentions: usize,
    /// Upper bound on filler tokens between mentions.
    pub max_gap: usize,
    /// Upper bound on tokens per name.
    pub max_name_len: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { sentences: 500, seed: 42, max_mentions: 3, max_gap: 3, max_name_len: 1 }
    }
}

/// Generates `config.sentences` labeled sentences for `domain`.
pub fn generate(domain: Domain, config: &SyntheticConfig) -> Corpus {
    let fillers = filler_pool();
    let types = domain.types();
    let pools: Vec<Vec<String>> = (0..types.len()).map(|i| type_names(i, types.len())).collect();
    let mut rng = rng::seeded(config.seed);
    let mut sentences = Vec::with_capacity(config.sentences);
    let max_gap = config.max_gap.max(1);
    for _ in 0..config.sentences {
        let mentions = rng.gen_range(0..=config.max_mentions);
        let mut tokens: Vec<String> = Vec::new();
        let mut spans = Vec::new();
        for _ in 0..mentions {
            push_fillers(&mut tokens, &fillers, rng.gen_range(1..=max_gap), &mut rng);
            let ti = rng.gen_range(0..types.len());
            let ty = &types[ti];
            let pool = &pools[ti];
            tokens.push(String::from(*ty.triggers.choose(&mut rng).expect("triggers")));
            let start = tokens.len();
            let len = rng.gen_range(1..=config.max_name_len.max(1));
            for _ in 0..len {
                tokens.push(pool.choose(&mut rng).expect("names").clone());
            }
            spans.push(EntitySpan::new(start, tokens.len(), ty.label));
        }
        let tail = if mentions == 0 { rng.gen_range(3..=6) } else { rng.gen_range(1..=max_gap) };
        push_fillers(&mut tokens, &fillers, tail, &mut rng);
        sentences.push(LabeledSentence::from_spans(tokens, &spans).expect("generated spans are valid"));
    }
    Corpus::with_labels(sentences, domain.labels()).expect("generated labels are declared")
}

fn push_fillers<R: Rng>(tokens: &mut Vec<String>, fillers: &[String], n: usize, rng: &mut R) {
    for _ in 0..n {
        tokens.push(fillers.choose(rng).expect("fillers").clone());
    }
}

/// Train and test splits drawn from independent seed streams.
pub fn train_test(domain: Domain, train: usize, test: usize, seed: u64) -> (Corpus, Corpus) {
    let base = SyntheticConfig::default();
    let train_cfg = SyntheticConfig { sentences: train, seed: rng::derive(seed, 1), ..base };
    let test_cfg = SyntheticConfig { sentences: test, seed: rng::derive(seed, 2), ..base };
    (generate(domain, &train_cfg), generate(domain, &test_cfg))
}
