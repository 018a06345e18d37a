use std::collections::BTreeMap;
use std::path::PathBuf;

use proptest::prelude::*;
use serde::Deserialize;
use stance_scope::corpus::synthesize_corpus;
use stance_scope::text::{
    build_vocab, decode, encode, load_embeddings, parse_embeddings, tokenize, OOV, OOV_ID, PAD_ID,
};

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

#[derive(Deserialize)]
struct GoldenTokens {
    text: String,
    tokens: Vec<String>,
}

#[test]
fn tokenizer_matches_golden_file() {
    let text = std::fs::read_to_string(fixture("golden/tokens.jsonl")).unwrap();
    let cases: Vec<GoldenTokens> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(cases.len(), 20);
    for g in cases {
        assert_eq!(tokenize(&g.text), g.tokens, "{:?}", g.text);
    }
}

proptest! {
    #[test]
    fn tokenize_is_idempotent(text in "\\PC{0,80}") {
        let once = tokenize(&text);
        let twice = tokenize(&once.join(" "));
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn tokens_are_lowercase_and_non_blank(text in "\\PC{0,80}") {
        for t in tokenize(&text) {
            prop_assert!(!t.trim().is_empty());
            prop_assert_eq!(t.to_lowercase(), t);
        }
    }

    #[test]
    fn encode_then_decode_recovers_in_vocabulary_tokens(
        corpus in prop::collection::vec("[a-e]{1,3}", 1..40),
        probe in prop::collection::vec("[a-g]{1,3}", 0..20),
    ) {
        let vocab = build_vocab([corpus.clone()], 1).unwrap();
        let ids = encode(&probe, &vocab);
        let back = decode(&ids, &vocab);
        for ((orig, id), dec) in probe.iter().zip(&ids).zip(&back) {
            if corpus.contains(orig) {
                prop_assert_eq!(dec, orig);
            } else {
                prop_assert_eq!(*id, OOV_ID);
                prop_assert_eq!(dec.as_str(), OOV);
            }
        }
    }

    #[test]
    fn vocab_ids_follow_frequency_then_lexicographic_order(corpus in prop::collection::vec("[a-f]{1,2}", 1..60)) {
        let vocab = build_vocab([corpus.clone()], 1).unwrap();
        let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
        for t in &corpus {
            *freq.entry(t).or_default() += 1;
        }
        let mut expected: Vec<(&str, u64)> = freq.into_iter().collect();
        expected.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let got: Vec<(&str, u64)> = vocab.entries().collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn embedding_matrix_ignores_line_order(seed in any::<u64>()) {
        let vocab = build_vocab([vec!["alpha".to_string(), "beta".into(), "gamma".into()]], 1).unwrap();
        let mut lines = vec![
            "alpha 0.1 0.2".to_string(),
            "beta -1 2.5".into(),
            "delta 9 9".into(),
            "gamma 3e-2 4".into(),
        ];
        let a = parse_embeddings(&lines.join("\n"), &vocab, 2).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(lines.as_mut_slice(), &mut rng);
        let b = parse_embeddings(&lines.join("\n"), &vocab, 2).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn fixture_embeddings_cover_the_synthetic_vocabulary() {
    let data = synthesize_corpus(300, 4).unwrap();
    let vocab = build_vocab(
        data.iter().map(|e| tokenize(&format!("{} {}", e.topic, e.context.text()))),
        1,
    )
    .unwrap();
    let m = load_embeddings(&fixture("embeddings/glove.100d.sample.txt"), &vocab, 100).unwrap();
    assert_eq!((m.rows(), m.dim()), (vocab.len(), 100));
    assert!(m.row(PAD_ID).iter().all(|v| *v == 0.0));
    for (token, _) in vocab.entries() {
        let row = m.row(vocab.id(token).unwrap());
        assert!(row.iter().any(|v| *v != 0.0), "no vector for `{token}`");
    }
}

#[test]
fn embedding_file_errors_carry_line_numbers() {
    let vocab = build_vocab([vec!["a".to_string()]], 1).unwrap();
    let err = parse_embeddings("a 1 2\nb 1", &vocab, 2).unwrap_err().to_string();
    assert!(err.contains('2'), "{err}");
    let err = parse_embeddings("a 1 x", &vocab, 2).unwrap_err().to_string();
    assert!(err.contains('1'), "{err}");
    assert!(parse_embeddings("a 1 2\na 3 4", &vocab, 2).is_err());
    assert!(load_embeddings(&fixture("embeddings/missing.txt"), &vocab, 2).is_err());
}
