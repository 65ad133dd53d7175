mod common;

use std::collections::{HashMap, HashSet};

use plausible::embeddings::{vectorize, vocabulary, EmbeddingTable, OovPolicy};
use plausible::sampling::{Label, LabeledExample};
use plausible::Triple;
use proptest::prelude::*;

use common::fixture;

/// Independent reading of the fixture: header skipped, the 3-component row
/// rejected, the second `dog` ignored.
fn oracle() -> HashMap<&'static str, Vec<f64>> {
    HashMap::from([
        ("dog", vec![0.5, -1.25, 3.0, 0.0]),
        ("cat", vec![0.01, 2.5, -0.75, 4.0]),
        ("bird", vec![-3.0, 0.0, 0.125, 1.0]),
        ("chase", vec![0.25; 4]),
        ("eat", vec![1.0, 2.0, 3.0, 4.0]),
        ("seed", vec![-1.0, -2.0, -3.0, -4.0]),
        ("bone", vec![9.5, -9.5, 0.0, 10.0]),
        ("grass", vec![2.0; 4]),
    ])
}

fn load(filter: Option<&HashSet<String>>) -> EmbeddingTable {
    EmbeddingTable::load(fixture("vectors_10.txt"), filter, OovPolicy::Drop, false)
        .unwrap()
        .0
}

#[test]
fn fixture_matches_hand_parse() {
    let (table, stats) =
        EmbeddingTable::load(fixture("vectors_10.txt"), None, OovPolicy::Drop, false).unwrap();
    assert!(stats.header_skipped);
    assert_eq!(stats.rows, 10);
    assert_eq!(stats.bad_rows, 1);
    assert_eq!(stats.duplicates, 1);
    assert_eq!(stats.retained, 8);
    assert_eq!(table.dim(), 4);
    let expected = oracle();
    assert_eq!(table.len(), expected.len());
    for (w, v) in &expected {
        assert_eq!(table.get(w).unwrap(), v.as_slice(), "{w}");
    }
    assert!(table.get("fish").is_none());
}

#[test]
fn strict_load_rejects_the_short_row() {
    let err = EmbeddingTable::load(fixture("vectors_10.txt"), None, OovPolicy::Drop, true).unwrap_err();
    assert!(matches!(err, plausible::Error::InconsistentDim { line: 9, expected: 4, found: 3 }));
}

#[test]
fn embedding_concatenates_slots_in_order() {
    let table = load(None);
    let t = Triple::new("dog", "eat", "bone").unwrap();
    let x = table.embed_triple(&t).unwrap();
    let expected = oracle();
    let mut want = expected["dog"].clone();
    want.extend(&expected["eat"]);
    want.extend(&expected["bone"]);
    assert_eq!(x, want);
}

#[test]
fn mean_policy_substitutes_the_mean_vector() {
    let table = load(None).with_oov_policy(OovPolicy::MeanVector);
    let expected = oracle();
    let mut mean = vec![0.0; 4];
    for v in expected.values() {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / expected.len() as f64;
        }
    }
    let x = table.embed_triple(&Triple::new("zebra", "eat", "fish").unwrap()).unwrap();
    for (a, b) in x[..4].iter().zip(&mean) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(&x[4..8], expected["eat"].as_slice());
    for (a, b) in x[8..].iter().zip(&mean) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn dropped_count_equals_oov_triples() {
    let table = load(None);
    let rows = [
        ("dog", "chase", "cat", true),
        ("dog", "chase", "fish", false),
        ("zebra", "eat", "grass", false),
        ("bird", "eat", "seed", true),
        ("cat", "fly", "bone", false),
    ];
    let examples: Vec<LabeledExample> = rows
        .iter()
        .map(|(s, v, o, _)| LabeledExample::gold(Triple::new(s, v, o).unwrap(), Label::Plausible))
        .collect();
    let data = vectorize(&table, &examples);
    assert_eq!(data.dropped, rows.iter().filter(|r| !r.3).count());
    let kept: Vec<usize> = rows.iter().enumerate().filter(|(_, r)| r.3).map(|(i, _)| i).collect();
    assert_eq!(data.kept, kept);
    assert_eq!(data.samples.len(), kept.len());
    assert_eq!(data.samples.width(), 12);
}

#[test]
fn vocabulary_covers_every_slot() {
    let examples = vec![
        LabeledExample::gold(Triple::new("dog", "chase", "cat").unwrap(), Label::Plausible),
        LabeledExample::gold(Triple::new("cat", "eat", "fish").unwrap(), Label::Implausible),
    ];
    let vocab = vocabulary(&examples);
    let want: HashSet<String> = ["dog", "chase", "cat", "eat", "fish"].iter().map(|s| s.to_string()).collect();
    assert_eq!(vocab, want);
}

const WORDS: &[&str] = &["dog", "cat", "bird", "chase", "eat", "seed", "bone", "fish", "grass", "zebra"];

proptest! {
    #[test]
    fn filter_then_load_equals_load_then_filter(mask in prop::collection::vec(any::<bool>(), WORDS.len())) {
        let vocab: HashSet<String> = WORDS.iter().zip(&mask).filter(|(_, m)| **m).map(|(w, _)| w.to_string()).collect();
        let full = load(None);
        let kept: HashMap<String, Vec<f64>> = vocab
            .iter()
            .filter_map(|w| full.get(w).map(|v| (w.clone(), v.to_vec())))
            .collect();
        let filtered = EmbeddingTable::load(fixture("vectors_10.txt"), Some(&vocab), OovPolicy::Drop, false);
        if kept.is_empty() {
            prop_assert!(filtered.is_err());
        } else {
            let expected = EmbeddingTable::from_vectors(kept, OovPolicy::Drop).unwrap();
            prop_assert_eq!(filtered.unwrap().0, expected);
        }
    }
}
