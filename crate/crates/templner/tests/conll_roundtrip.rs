use proptest::prelude::*;
use templner::conll::{parse_conll, write_conll};

/// One sentence of `token POS tag` lines; `I-` only continues an open entity.
fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(("[A-Za-z0-9.,]{1,6}", 0u8..3, 0usize..3), 1..12).prop_map(|rows| {
        let mut open: Option<&str> = None;
        let mut lines = Vec::new();
        for (tok, kind, l) in rows {
            let label = ["PER", "LOC", "ORG"][l];
            let tag = match (kind, open) {
                (1, _) => {
                    open = Some(label);
                    format!("B-{label}")
                }
                (2, Some(o)) => format!("I-{o}"),
                _ => {
                    open = None;
                    "O".to_string()
                }
            };
            lines.push(format!("{tok}\tPOS\t{tag}"));
        }
        lines.join("\n")
    })
}

proptest! {
    #[test]
    fn parse_write_parse_is_a_fixed_point(
        sentences in prop::collection::vec(sentence(), 0..8),
    ) {
        let text: String = sentences.iter().map(|s| format!("{s}\n\n")).collect();
        let corpus = parse_conll(&text).unwrap();
        let written = write_conll(&corpus);
        let again = parse_conll(&written).unwrap();
        prop_assert_eq!(&again, &corpus);
        prop_assert_eq!(write_conll(&again), written);
    }
}
