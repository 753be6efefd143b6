//! Batch decoding over a fixed number of worker threads.
//!
//! Sentence `i` goes to worker `i % workers`; results are reassembled in
//! sentence order, so the output is the same for every worker count.

use templner_core::decoder::{decode_sentence, DecodeError};
use templner_core::{DecodeConfig, GenerativeScorer, LabeledSentence, ScoredCandidate};

pub fn decode_parallel<S>(
    scorer: &S,
    sentences: &[LabeledSentence],
    config: &DecodeConfig,
    workers: usize,
) -> Result<Vec<Vec<ScoredCandidate>>, DecodeError>
where
    S: GenerativeScorer + Sync + ?Sized,
{
    let workers = workers.clamp(1, sentences.len().max(1));
    let decode_one = |i: usize| {
        decode_sentence(scorer, sentences[i].tokens(), config).map_err(|e| match e {
            DecodeError::Scorer { span, source, .. } => DecodeError::Scorer { sentence: Some(i), span, source },
            other => other,
        })
    };
    let mut slots: Vec<Option<Result<Vec<ScoredCandidate>, DecodeError>>> = vec![None; sentences.len()];
    if workers == 1 {
        for (i, slot) in slots.iter_mut().enumerate() {
            *slot = Some(decode_one(i));
        }
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let decode_one = &decode_one;
                    scope.spawn(move || {
                        (w..sentences.len()).step_by(workers).map(|i| (i, decode_one(i))).collect::<Vec<_>>()
                    })
                })
                .collect();
            for handle in handles {
                for (i, result) in handle.join().expect("decode worker panicked") {
                    slots[i] = Some(result);
                }
            }
        });
    }
    // the first failing sentence wins, independent of scheduling
    slots.into_iter().map(|s| s.expect("every sentence decoded")).collect()
}
