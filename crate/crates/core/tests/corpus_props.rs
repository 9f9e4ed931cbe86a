use std::collections::BTreeSet;

use proptest::prelude::*;
use ruletag::corpus::{
    doc_ids, generate_synthetic, iob_to_to, parse_corpus, split_corpus, subsample_indices, write_corpus, Sentence,
    SyntheticConfig, TagSet, Token, TRAIN_PERCENTS,
};
use ruletag::embeddings::{coverage, load_vectors};

fn corpus() -> impl Strategy<Value = (Vec<Sentence>, TagSet)> {
    let tag_names = prop::collection::btree_set("[A-Z]{1,6}", 1..5);
    (tag_names, prop::collection::vec((0u64..6, prop::collection::vec(("[a-z0-9]{1,7}", 0usize..8), 1..9)), 1..10))
        .prop_map(|(names, raw)| {
            let mut tags = TagSet::new();
            let ids: Vec<usize> = names.iter().map(|n| tags.intern(n)).collect();
            let mut sentences: Vec<Sentence> = raw
                .into_iter()
                .map(|(doc, toks)| Sentence {
                    doc_id: doc,
                    tokens: toks
                        .into_iter()
                        .map(|(surface, t)| Token {
                            surface,
                            tag: if t == 0 { 0 } else { ids[t % ids.len()] },
                        })
                        .collect(),
                })
                .collect();
            sentences.sort_by_key(|s| s.doc_id);
            (sentences, tags)
        })
}

fn iob_sequence() -> impl Strategy<Value = Vec<String>> {
    let tag = prop_oneof![
        Just("O".to_string()),
        "[A-NP-Z][A-Z]{0,4}".prop_map(|t| format!("B-{t}")),
        "[A-NP-Z][A-Z]{0,4}".prop_map(|t| format!("I-{t}")),
    ];
    prop::collection::vec(tag, 0..30)
}

proptest! {
    #[test]
    fn write_then_parse_round_trips((sentences, tags) in corpus()) {
        let mut buf = Vec::new();
        write_corpus(&sentences, &tags, &mut buf).unwrap();
        let (parsed, parsed_tags) = parse_corpus(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(parsed.len(), sentences.len());
        for (a, b) in parsed.iter().zip(&sentences) {
            prop_assert_eq!(a.doc_id, b.doc_id);
            prop_assert_eq!(a.words(), b.words());
            let names_a: Vec<&str> = a.tokens.iter().map(|t| parsed_tags.name(t.tag)).collect();
            let names_b: Vec<&str> = b.tokens.iter().map(|t| tags.name(t.tag)).collect();
            prop_assert_eq!(names_a, names_b);
        }
    }

    #[test]
    fn to_conversion_keeps_length_and_drops_prefixes(seq in iob_sequence()) {
        let out = iob_to_to(&seq).unwrap();
        prop_assert_eq!(out.len(), seq.len());
        for (t, src) in out.iter().zip(&seq) {
            prop_assert!(!t.starts_with("B-") && !t.starts_with("I-"));
            if src == "O" {
                prop_assert_eq!(t, "O");
            }
        }
    }

    #[test]
    fn unprefixed_labels_are_rejected(mut seq in iob_sequence(), bare in "[A-Z]{2,5}", at in any::<prop::sample::Index>()) {
        seq.push(bare);
        let n = seq.len();
        seq.swap(at.index(n), n - 1);
        prop_assert!(iob_to_to(&seq).is_err());
    }

    #[test]
    fn subsamples_are_nested(n in 0usize..400, seed in any::<u64>()) {
        let mut previous: Option<BTreeSet<usize>> = None;
        for p in TRAIN_PERCENTS {
            let kept: BTreeSet<usize> = subsample_indices(n, p, seed).unwrap().into_iter().collect();
            prop_assert_eq!(kept.len(), (p as usize * n).div_ceil(100));
            if let Some(prev) = &previous {
                prop_assert!(prev.is_subset(&kept));
            }
            previous = Some(kept);
        }
        prop_assert_eq!(previous.unwrap().len(), n);
    }

    #[test]
    fn splits_partition_documents(docs in 3u64..40, seed in any::<u64>()) {
        let sentences: Vec<Sentence> = (0..docs)
            .flat_map(|d| (0..2).map(move |_| Sentence { doc_id: d, tokens: vec![Token { surface: "w".into(), tag: 0 }] }))
            .collect();
        let split = split_corpus(&sentences, (0.7, 0.1, 0.2), seed).unwrap();
        let (tr, va, te) = (split.train_docs(), split.val_docs(), split.test_docs());
        let all: BTreeSet<u64> = tr.iter().chain(&va).chain(&te).copied().collect();
        prop_assert_eq!(all.len(), tr.len() + va.len() + te.len());
        prop_assert_eq!(all.into_iter().collect::<Vec<_>>(), doc_ids(&sentences));
        prop_assert_eq!(split.train.len() + split.val.len() + split.test.len(), sentences.len());
    }

    #[test]
    fn coverage_is_a_fraction(known in prop::collection::btree_set("[a-z]{1,4}", 1..20), queried in prop::collection::btree_set("[a-z]{1,4}", 1..20)) {
        let mut text = format!("{} 2\n", known.len());
        for w in &known {
            text.push_str(&format!("{w} 0.5 -0.5\n"));
        }
        let store = load_vectors(&text).unwrap();
        let c = coverage(&store, &queried.iter().cloned().collect()).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
        let hits = queried.iter().filter(|w| known.contains(*w)).count();
        prop_assert!((c - hits as f64 / queried.len() as f64).abs() < 1e-12);
    }
}

#[test]
fn synthetic_corpus_round_trips_through_the_text_format() {
    let syn = generate_synthetic(&SyntheticConfig::default(), 5).unwrap();
    let mut buf = Vec::new();
    write_corpus(&syn.sentences, &syn.tags, &mut buf).unwrap();
    let (parsed, tags) = parse_corpus(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(parsed.len(), 200);
    assert_eq!(tags.len(), syn.tags.len());
    for (a, b) in parsed.iter().zip(&syn.sentences) {
        assert_eq!(a.words(), b.words());
    }
}
