//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and fails
//! if any criterion fails. Every expected value is recomputed here from
//! first principles rather than taken from the library.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use templner::checkpoint;
use templner::conll::read_conll;
use templner::core::corpus::{bio_from_spans, corpus_stats, spans_from_bio};
use templner::core::decoder::{enumerate_spans, ensemble_decode, resolve_overlaps, ScoredCandidate};
use templner::core::pairs::{build_training_pairs, PairConfig};
use templner::core::pipeline::{decode_and_evaluate, fine_tune_model, format_sweep, template_sweep, train_model, PipelineConfig};
use templner::core::scorer::{gradient, loss, LossNormalization, Matrix, ModelConfig, Vocab, TENSOR_NAMES};
use templner::core::synthetic::{train_test, Domain};
use templner::core::templates::builtin_templates;
use templner::core::{Corpus, EntitySpan, LabelWordMap, LabeledSentence, Polarity, SpanLabel, Tag, TinySeq2Seq, TrainingPair};

const CONLL03_ENV: &str = "TEMPLNER_CONLL03_DIR";

enum Outcome {
    Pass(String),
    Skip(String),
}

type Check = fn() -> Outcome;

/// Writes to the stdout handle directly so the lines survive the test harness's capture.
fn report(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn within(name: &str, elapsed: Duration, budget: Duration) {
    assert!(elapsed < budget, "{name} took {elapsed:.2?}, budget {budget:?}");
}

// ---------------------------------------------------------------- BIO

fn random_bio(rng: &mut ChaCha8Rng, labels: &[&str]) -> Vec<Tag> {
    let len = rng.gen_range(1..=40);
    let mut tags: Vec<Tag> = Vec::with_capacity(len);
    for _ in 0..len {
        let open = tags.last().and_then(|t| t.label()).map(str::to_string);
        let tag = match (rng.gen_range(0..3), open) {
            (1, _) => Tag::Begin(labels[rng.gen_range(0..labels.len())].to_string()),
            (2, Some(l)) => Tag::Inside(l),
            _ => Tag::Outside,
        };
        tags.push(tag);
    }
    tags
}

/// Reference decoder: a span opens at every `B-` and extends over `I-` of the same label.
fn oracle_spans(tags: &[Tag]) -> Vec<EntitySpan> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tags.len() {
        if let Tag::Begin(label) = &tags[i] {
            let mut j = i + 1;
            while j < tags.len() && tags[j] == Tag::Inside(label.clone()) {
                j += 1;
            }
            out.push(EntitySpan::new(i, j, label.clone()));
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

fn bio_round_trip() -> Outcome {
    let labels = ["PER", "LOC", "ORG", "MISC", "DATE", "NUM"];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let sequences: Vec<Vec<Tag>> = (0..10_000).map(|_| random_bio(&mut rng, &labels)).collect();
    let start = Instant::now();
    for tags in &sequences {
        let spans = spans_from_bio(tags).unwrap();
        assert_eq!(spans, oracle_spans(tags));
        let back = bio_from_spans(&spans, tags.len()).unwrap();
        assert_eq!(&back, tags);
        assert_eq!(spans_from_bio(&back).unwrap(), spans);
    }
    let elapsed = start.elapsed();
    within("BIO round trip", elapsed, Duration::from_secs(5));
    Outcome::Pass(format!("10000 sequences in {elapsed:.2?}"))
}

// ---------------------------------------------------------------- enumeration

fn enumeration_counts() -> Outcome {
    let start = Instant::now();
    for n in 1..=64usize {
        let spans = enumerate_spans(n, 8);
        let expected: usize = (1..=n.min(8)).map(|l| n - l + 1).sum();
        assert_eq!(spans.len(), expected, "n={n}");
        let distinct: BTreeSet<_> = spans.iter().collect();
        assert_eq!(distinct.len(), spans.len());
        assert!(spans.iter().all(|&(i, j)| i < j && j <= n && j - i <= 8));
    }
    assert_eq!(enumerate_spans(10, 8).len(), 52);
    let elapsed = start.elapsed();
    within("enumeration", elapsed, Duration::from_secs(1));
    Outcome::Pass(format!("n = 1..64 in {elapsed:.2?}"))
}

// ---------------------------------------------------------------- negatives

fn negative_ratio() -> Outcome {
    let template = &builtin_templates()[0];
    let words = LabelWordMap::new([("PER", "person")]).unwrap();
    for p in 1..=200usize {
        let sentences: Vec<LabeledSentence> = (0..p)
            .map(|i| {
                let tokens = (0..12).map(|j| format!("t{i}_{j}")).collect();
                LabeledSentence::from_spans(tokens, &[EntitySpan::new(3, 4, "PER")]).unwrap()
            })
            .collect();
        let set = build_training_pairs(&Corpus::new(sentences), template, &words, &PairConfig::default()).unwrap();
        // round half up of 1.5 P
        let expected = (3 * p).div_ceil(2);
        assert_eq!(set.positives, p);
        assert_eq!(set.negatives, expected, "P={p}");
        let negatives = set.pairs.iter().filter(|x| x.polarity == Polarity::Negative).count();
        assert_eq!(negatives, expected, "P={p}");
    }
    Outcome::Pass("P = 1..200".into())
}

// ---------------------------------------------------------------- gradient check

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let vocab = Vocab::build(["Bangkok", "is", "a", "location", "entity", "not", "named", "in", "rain"]);
    let init = TinySeq2Seq::new(vocab, ModelConfig { embed_dim: 4, hidden_dim: 6, seed: 11, zero_output_layer: false }).unwrap();
    let mut tensors: Vec<(String, Matrix)> = init.tensors().into_iter().map(|(n, m)| (n.to_string(), m.clone())).collect();
    // sharpen attention so every group has a gradient above finite-difference noise
    tensors[0].1.data.iter_mut().for_each(|v| *v *= 10.0);
    let model = TinySeq2Seq::from_tensors(init.vocab().clone(), *init.config(), tensors.clone()).unwrap();
    let toks = |s: &str| s.split(' ').map(str::to_string).collect::<Vec<_>>();
    let batch = [
        TrainingPair::new(toks("Bangkok is in rain"), toks("Bangkok is a location entity"), Polarity::Positive),
        TrainingPair::new(toks("rain in Bangkok"), toks("rain is not a named entity"), Polarity::Negative),
    ];
    let (_, grads) = gradient(&model, &batch, LossNormalization::Sum);
    let eps = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut groups = BTreeSet::new();
    for (ti, (name, g)) in grads.tensors().into_iter().enumerate() {
        let mut order: Vec<usize> = (0..g.data.len()).collect();
        order.sort_by(|&a, &b| g.data[b].abs().total_cmp(&g.data[a].abs()));
        for &idx in order.iter().take(4) {
            let at = |delta: f64| {
                let mut t = tensors.clone();
                t[ti].1.data[idx] += delta;
                let m = TinySeq2Seq::from_tensors(model.vocab().clone(), *model.config(), t).unwrap();
                loss(&m, &batch, LossNormalization::Sum)
            };
            let numeric = (at(eps) - at(-eps)) / (2.0 * eps);
            let analytic = g.data[idx];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
            assert!(rel < 1e-4, "{name}[{idx}]: analytic {analytic} numeric {numeric}");
            worst = worst.max(rel);
            checked += 1;
            groups.insert(name);
        }
    }
    assert_eq!(groups.len(), TENSOR_NAMES.len());
    assert!(checked >= 50);
    let elapsed = start.elapsed();
    within("gradient check", elapsed, Duration::from_secs(30));
    Outcome::Pass(format!("{checked} coordinates over {} tensors, max rel err {worst:.1e}, {elapsed:.2?}", groups.len()))
}

// ---------------------------------------------------------------- overlaps

fn candidate(start: usize, end: usize, label: SpanLabel, score: f64) -> ScoredCandidate {
    let label_word = label.as_entity().unwrap_or("none").to_lowercase();
    ScoredCandidate { start, end, label, score, label_word, per_label_scores: BTreeMap::new() }
}

fn overlapping(a: &ScoredCandidate, b: &ScoredCandidate) -> bool {
    a.start < b.end && b.start < a.end
}

fn overlap_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let labels = [SpanLabel::None, SpanLabel::entity("PER"), SpanLabel::entity("LOC"), SpanLabel::entity("ORG")];
    for _ in 0..1000 {
        let n = rng.gen_range(0..30);
        let set: Vec<ScoredCandidate> = (0..n)
            .map(|_| {
                let s = rng.gen_range(0..20);
                let len = rng.gen_range(1..=8);
                let score = -(rng.gen_range(0..200) as f64) / 8.0;
                candidate(s, s + len, labels.choose(&mut rng).unwrap().clone(), score)
            })
            .collect();
        let kept = resolve_overlaps(set.clone());
        for (i, a) in kept.iter().enumerate() {
            assert!(!a.label.is_none());
            assert!(kept[i + 1..].iter().all(|b| !overlapping(a, b)));
        }
        for c in set.iter().filter(|c| !c.label.is_none() && !kept.contains(c)) {
            assert!(kept.iter().any(|k| overlapping(k, c) && k.score >= c.score), "{c:?} discarded without cause");
        }
    }
    // every pair of overlapping entity candidates with distinct scores
    let mut pairs = 0;
    for (s1, e1) in enumerate_spans(6, 4) {
        for (s2, e2) in enumerate_spans(6, 4) {
            if !(s1 < e2 && s2 < e1) {
                continue;
            }
            for (x, y) in [(-1.0, -2.0), (-2.0, -1.0)] {
                let a = candidate(s1, e1, SpanLabel::entity("PER"), x);
                let b = candidate(s2, e2, SpanLabel::entity("LOC"), y);
                let winner = if x > y { a.clone() } else { b.clone() };
                assert_eq!(resolve_overlaps(vec![a, b]), vec![winner]);
                pairs += 1;
            }
        }
    }
    Outcome::Pass(format!("1000 random sets, {pairs} two-candidate cases"))
}

// ---------------------------------------------------------------- end to end

struct EndToEnd {
    model: TinySeq2Seq,
    f1: f64,
    elapsed: Duration,
}

/// Domain A model shared by the end-to-end and transfer criteria.
fn end_to_end_run() -> &'static EndToEnd {
    static RUN: OnceLock<EndToEnd> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let (train, test) = train_test(Domain::A, 500, 100, 42);
        let template = &builtin_templates()[0];
        let words = Domain::A.label_words();
        let config = PipelineConfig::desk().with_seed(42);
        let run = train_model(&train, template, &words, &config).unwrap();
        let (_, report) = decode_and_evaluate(&run.model, &test, template, &words, config.max_span_len).unwrap();
        EndToEnd { model: run.model, f1: report.f1(), elapsed: start.elapsed() }
    })
}

fn end_to_end() -> Outcome {
    let first = end_to_end_run();
    within("end to end", first.elapsed, Duration::from_secs(300));
    assert!(first.f1 >= 0.90, "micro F1 {:.4}", first.f1);
    let (train, _) = train_test(Domain::A, 500, 100, 42);
    let again = train_model(&train, &builtin_templates()[0], &Domain::A.label_words(), &PipelineConfig::desk().with_seed(42))
        .unwrap();
    assert_eq!(checkpoint::to_bytes(&again.model), checkpoint::to_bytes(&first.model), "retraining changed the model");
    Outcome::Pass(format!("micro F1 {:.4}, {:.1?} per run, retrain bit-identical", first.f1, first.elapsed))
}

fn transfer() -> Outcome {
    let source = &end_to_end_run().model;
    let start = Instant::now();
    let template = &builtin_templates()[0];
    let words = Domain::B.label_words();
    let mut scratch = Vec::new();
    let mut tuned = Vec::new();
    for seed in 1..=3u64 {
        let (train, test) = train_test(Domain::B, 20, 100, seed);
        let config = PipelineConfig::desk().with_seed(seed);
        let fresh = train_model(&train, template, &words, &config).unwrap();
        let from_a = fine_tune_model(source.clone(), &train, template, &words, &config).unwrap();
        scratch.push(decode_and_evaluate(&fresh.model, &test, template, &words, 8).unwrap().1.f1());
        tuned.push(decode_and_evaluate(&from_a.model, &test, template, &words, 8).unwrap().1.f1());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (s, t) = (mean(&scratch), mean(&tuned));
    let elapsed = start.elapsed() + end_to_end_run().elapsed;
    within("transfer", elapsed, Duration::from_secs(600));
    assert!(t >= s, "fine-tuned {t:.4} < scratch {s:.4}");
    Outcome::Pass(format!("fine-tuned mean F1 {t:.4} vs scratch {s:.4} (seeds 1-3: {tuned:.3?} vs {scratch:.3?})"))
}

fn template_sweep_report() -> Outcome {
    let (train, test) = train_test(Domain::A, 500, 100, 42);
    let templates = builtin_templates();
    let rows = template_sweep(&train, &test, &templates, &Domain::A.label_words(), &PipelineConfig::desk().with_seed(42))
        .unwrap();
    assert_eq!(rows.len(), 4);
    let table = format_sweep(&rows);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 2 + 4);
    assert!(lines[0].contains("Entity template") && lines[0].contains("Non-entity template"));
    for (row, t) in rows.iter().zip(&templates) {
        assert!((0.0..=1.0).contains(&row.report.f1()));
        assert_eq!(row.reference_f1, t.dev_f1);
    }
    for ((row, line), reference) in rows.iter().zip(&lines[2..]).zip(["95.27", "95.15", "88.42", "76.80"]) {
        assert!(line.starts_with(&row.entity_pattern) && line.contains(reference), "{line}");
    }
    report(table.trim_end());
    let f1s: Vec<String> = rows.iter().map(|r| format!("{:.4}", r.report.f1())).collect();
    Outcome::Pass(format!("F1 per template [{}]", f1s.join(", ")))
}

// ---------------------------------------------------------------- ensemble

fn majority_oracle(outputs: &[Vec<EntitySpan>]) -> Vec<EntitySpan> {
    let mut votes: BTreeMap<&EntitySpan, usize> = BTreeMap::new();
    for out in outputs {
        for s in out.iter().collect::<BTreeSet<_>>() {
            *votes.entry(s).or_default() += 1;
        }
    }
    votes.into_iter().filter(|&(_, v)| 2 * v > outputs.len()).map(|(s, _)| s.clone()).collect()
}

fn with_scores(spans: &[EntitySpan]) -> Vec<(EntitySpan, f64)> {
    spans.iter().map(|s| (s.clone(), -1.0)).collect()
}

fn ensemble_voting() -> Outcome {
    let e = |s, t, l: &str| EntitySpan::new(s, t, l);
    let fixture = [
        vec![e(0, 1, "PER"), e(3, 5, "LOC"), e(7, 8, "ORG")],
        vec![e(0, 1, "PER"), e(3, 5, "ORG"), e(9, 10, "MISC")],
        vec![e(0, 1, "PER"), e(3, 5, "LOC"), e(9, 10, "MISC"), e(12, 13, "PER")],
    ];
    let outputs: Vec<_> = fixture.iter().map(|f| with_scores(f)).collect();
    assert_eq!(ensemble_decode(&outputs), vec![e(0, 1, "PER"), e(3, 5, "LOC"), e(9, 10, "MISC")]);

    // random votes over a pool of disjoint spans, so majority alone decides
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let pool: Vec<EntitySpan> =
        (0..10).flat_map(|i| ["PER", "LOC"].map(|l| e(2 * i, 2 * i + 1 + (i % 2), l))).collect();
    let mut cases = 0;
    for _ in 0..500 {
        let models: Vec<Vec<EntitySpan>> = (0..3)
            .map(|_| {
                let mut used = BTreeSet::new();
                let mut out: Vec<EntitySpan> = pool
                    .iter()
                    .filter(|s| rng.gen_bool(0.4) && used.insert(s.start))
                    .cloned()
                    .collect();
                out.shuffle(&mut rng);
                out
            })
            .collect();
        let outputs: Vec<_> = models.iter().map(|m| with_scores(m)).collect();
        let got = ensemble_decode(&outputs);
        let expected = majority_oracle(&models);
        // same-position majorities of different labels cannot both reach two of three votes
        assert_eq!(got, expected);
        let mut single = models[0].clone();
        single.sort();
        assert_eq!(ensemble_decode(&outputs[..1]), single);
        cases += 1;
    }
    Outcome::Pass(format!("fixture plus {cases} random 3-model votes, single model is identity"))
}

// ---------------------------------------------------------------- CoNLL03

fn conll03_file(dir: &Path, names: &[&str]) -> Option<PathBuf> {
    names.iter().map(|n| dir.join(n)).find(|p| p.is_file())
}

/// `n` in the thousands, one decimal, as in "12.7k".
fn in_k(n: usize) -> f64 {
    (n as f64 / 100.0).round() / 10.0
}

fn conll03_stats() -> Outcome {
    let Some(dir) = std::env::var_os(CONLL03_ENV).map(PathBuf::from) else {
        return Outcome::Skip(format!("{CONLL03_ENV} not set"));
    };
    let (Some(train), Some(test)) = (
        conll03_file(&dir, &["eng.train", "train.txt", "train"]),
        conll03_file(&dir, &["eng.testb", "test.txt", "test"]),
    ) else {
        return Outcome::Skip(format!("no train/test files under {}", dir.display()));
    };
    let train = corpus_stats(&read_conll(&train).unwrap());
    let test = corpus_stats(&read_conll(&test).unwrap());
    assert_eq!(train.entity_type_count, 4);
    assert_eq!(test.entity_type_count, 4);
    assert_eq!(in_k(train.sentence_count), 12.7, "train {} sentences", train.sentence_count);
    assert_eq!(in_k(test.sentence_count), 3.2, "test {} sentences", test.sentence_count);
    Outcome::Pass(format!("train {} / test {} sentences, 4 types", train.sentence_count, test.sentence_count))
}

#[test]
fn acceptance() {
    let checks: [(&str, Check); 10] = [
        ("bio_round_trip", bio_round_trip),
        ("enumeration_counts", enumeration_counts),
        ("negative_ratio", negative_ratio),
        ("gradient_check", gradient_check),
        ("overlap_resolution", overlap_oracle),
        ("end_to_end_synthetic", end_to_end),
        ("transfer_beats_scratch", transfer),
        ("template_sweep", template_sweep_report),
        ("ensemble_majority", ensemble_voting),
        ("conll03_stats", conll03_stats),
    ];
    let mut failed = Vec::new();
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        match outcome {
            Ok(Outcome::Pass(detail)) => report(&format!("PASS {name} [{elapsed:.2?}] {detail}")),
            Ok(Outcome::Skip(why)) => report(&format!("SKIP {name} [{elapsed:.2?}] {why}")),
            Err(panic) => {
                let why = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                report(&format!("FAIL {name} [{elapsed:.2?}] {why}"));
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
