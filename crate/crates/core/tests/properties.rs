mod common;

use std::collections::HashMap;

use common::Mini;
use proptest::prelude::*;
use wicdis_core::dataset::{parse_dataset, parse_predictions, write_dataset, write_predictions, OffsetUnit};
use wicdis_core::report::{compute_metrics, cross_tabulate};
use wicdis_core::tuner::{run_grid, select_best, GridSpec};
use wicdis_core::wic::{classify_all, pool, Span};
use wicdis_core::{
    classify_pair, cosine, tokenize, EmbeddingTable, NormalizationConfig, Params, Pooling, Prediction, StopList, Tag,
    VectorSource, WicInstance,
};

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, dim)
}

fn pooling() -> impl Strategy<Value = Pooling> {
    prop::sample::select(Pooling::ALL.to_vec())
}

fn tag() -> impl Strategy<Value = Tag> {
    any::<bool>().prop_map(Tag::from_bool)
}

fn arabic_word() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "شمس", "قمر", "بحر", "جبل", "نهر", "سماء", "ارض", "نور", "عين", "في", "من",
    ])
    .prop_map(str::to_owned)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn cosine_is_symmetric_and_scale_invariant(
        (a, b) in (1usize..16).prop_flat_map(|d| (vector(d), vector(d))),
        k in 0.01f64..100.0,
    ) {
        let ab = cosine(&a, &b).unwrap();
        let ba = cosine(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        let scaled: Vec<f64> = a.iter().map(|x| x * k).collect();
        match (ab, cosine(&scaled, &b).unwrap()) {
            (Some(x), Some(y)) => {
                prop_assert!((x - y).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(&x));
            }
            (None, None) => {}
            other => prop_assert!(false, "{:?}", other),
        }
        if a.iter().any(|&x| x != 0.0) {
            prop_assert!((cosine(&a, &a).unwrap().unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_text_round_trip(
        rows in prop::collection::vec(prop::collection::vec(-1e6f32..1e6, 3), 1..20),
    ) {
        let mut table = EmbeddingTable::new("t", 3);
        for (i, v) in rows.iter().enumerate() {
            table.insert(&format!("كلمة{i}"), v).unwrap();
        }
        let mut buf = Vec::new();
        table.write_text(&mut buf).unwrap();
        let (back, report) = EmbeddingTable::read_text(&buf[..], "t").unwrap();
        prop_assert_eq!(report.duplicates, 0);
        prop_assert_eq!(back.len(), table.len());
        for ((t1, v1), (t2, v2)) in table.iter().zip(back.iter()) {
            prop_assert_eq!(t1, t2);
            prop_assert_eq!(v1, v2);
        }
    }

    #[test]
    fn tokens_reconstruct_the_sentence(s in "[ \t\nابت a-z٠]{0,40}") {
        let chars: Vec<char> = s.chars().collect();
        let tokens = tokenize(&s);
        let mut last = 0;
        for t in &tokens {
            prop_assert!(t.start >= last && t.end > t.start);
            let slice: String = chars[t.start..t.end].iter().collect();
            prop_assert_eq!(&slice, &t.text);
            prop_assert!(chars[last..t.start].iter().all(|c| c.is_whitespace()));
            last = t.end;
        }
        prop_assert!(chars[last..].iter().all(|c| c.is_whitespace()));
    }

    #[test]
    fn pooling_orders_statistics(
        rows in (1usize..6).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-10f32..10.0, d), 1..8)),
    ) {
        let refs: Vec<&[f32]> = rows.iter().map(Vec::as_slice).collect();
        let min = pool(&refs, Pooling::Min).unwrap();
        let max = pool(&refs, Pooling::Max).unwrap();
        let mean = pool(&refs, Pooling::Mean).unwrap();
        let std = pool(&refs, Pooling::Std).unwrap();
        for j in 0..min.len() {
            prop_assert!(min[j] <= mean[j] + 1e-9 && mean[j] <= max[j] + 1e-9);
            prop_assert!(std[j] >= 0.0);
        }
        prop_assert!(pool(&[], Pooling::Mean).is_none());
    }

    #[test]
    fn swapping_sentences_keeps_the_prediction(
        words1 in prop::collection::vec(arabic_word(), 1..8),
        words2 in prop::collection::vec(arabic_word(), 1..8),
        n in 1usize..5,
        p in pooling(),
        stop in any::<bool>(),
    ) {
        let mini = Mini::load();
        let cfg = NormalizationConfig::default();
        let (s1, sp1) = sentence_with_target(&words1);
        let (s2, sp2) = sentence_with_target(&words2);
        let forward = WicInstance { id: "a".into(), sentence1: s1.clone(), sentence2: s2.clone(), span1: sp1, span2: sp2, gold: None };
        let backward = WicInstance { id: "a".into(), sentence1: s2, sentence2: s1, span1: sp2, span2: sp1, gold: None };
        let params = Params::new(n, p, 0.6, stop).unwrap();
        let source = VectorSource::Word(&mini.words);
        let f = classify_pair(&forward, &params, &source, &mini.stoplist, &cfg).unwrap();
        let b = classify_pair(&backward, &params, &source, &mini.stoplist, &cfg).unwrap();
        prop_assert_eq!(f.label, b.label);
        prop_assert_eq!(f.degenerate, b.degenerate);
        match (f.similarity, b.similarity) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
            (x, y) => prop_assert_eq!(x, y),
        }

        // stop-word removal with an empty list changes nothing
        let with_empty = classify_pair(&forward, &Params { stop_words: true, ..params }, &source, &StopList::new(), &cfg).unwrap();
        let without = classify_pair(&forward, &Params { stop_words: false, ..params }, &source, &mini.stoplist, &cfg).unwrap();
        prop_assert_eq!(with_empty, without);
    }

    #[test]
    fn metrics_ignore_prediction_order(
        labels in prop::collection::vec((tag(), tag()), 1..40),
        seed in any::<u64>(),
    ) {
        let (preds, gold) = fixture(&labels);
        let mut shuffled = preds.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            let j = (seed.wrapping_mul(i as u64 + 1) >> 7) as usize % (i + 1);
            shuffled.swap(i, j);
        }
        let a = compute_metrics(&preds, &gold).unwrap();
        let b = compute_metrics(&shuffled, &gold).unwrap();
        prop_assert_eq!(a.counts, b.counts);
        prop_assert_eq!(a.counts.total(), n);
        prop_assert!((0.0..=1.0).contains(&a.accuracy));
    }

    #[test]
    fn crosstab_marginals_match_accuracies(
        rows in prop::collection::vec((tag(), tag(), tag()), 1..60),
    ) {
        let a_pairs: Vec<(Tag, Tag)> = rows.iter().map(|&(g, a, _)| (g, a)).collect();
        let b_pairs: Vec<(Tag, Tag)> = rows.iter().map(|&(g, _, b)| (g, b)).collect();
        let (a, gold) = fixture(&a_pairs);
        let (b, _) = fixture(&b_pairs);
        let tab = cross_tabulate(&a, &b, &gold, "A", "B").unwrap();
        let acc_a = compute_metrics(&a, &gold).unwrap().accuracy;
        let acc_b = compute_metrics(&b, &gold).unwrap().accuracy;
        prop_assert!((tab.accuracy_a() - acc_a).abs() < 1e-12);
        prop_assert!((tab.accuracy_b() - acc_b).abs() < 1e-12);
        prop_assert_eq!(tab.n(), rows.len());
        let back = cross_tabulate(&b, &a, &gold, "B", "A").unwrap();
        prop_assert_eq!(back, tab.swapped());
    }

    #[test]
    fn best_row_ignores_row_order(seed in any::<u64>()) {
        let mini = Mini::load();
        let spec = GridSpec { context_sizes: vec![1, 2, 3], ..GridSpec::default() };
        let rows = run_grid(&mini.instances, &spec, &VectorSource::Word(&mini.words), &mini.stoplist, &NormalizationConfig::default()).unwrap();
        let best = select_best(&rows).unwrap().params;
        let mut shuffled = rows.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            let j = (seed.wrapping_mul(0x9E37_79B9).wrapping_add(i as u64) >> 3) as usize % (i + 1);
            shuffled.swap(i, j);
        }
        prop_assert_eq!(select_best(&shuffled).unwrap().params, best);
    }

    #[test]
    fn dataset_round_trip(
        items in prop::collection::vec((prop::collection::vec(arabic_word(), 1..6), prop::option::of(tag())), 1..10),
    ) {
        let instances: Vec<WicInstance> = items
            .iter()
            .enumerate()
            .map(|(i, (words, gold))| {
                let (s, span) = sentence_with_target(words);
                WicInstance { id: format!("x.{i}"), sentence1: s.clone(), sentence2: s, span1: span, span2: span, gold: *gold }
            })
            .collect();
        let text = write_dataset(&instances);
        let back = parse_dataset(text.as_bytes(), OffsetUnit::Chars).unwrap();
        prop_assert_eq!(back, instances);
    }

    #[test]
    fn predictions_round_trip(labels in prop::collection::vec((tag(), prop::option::of(-1.0f64..1.0)), 0..20)) {
        let preds: Vec<Prediction> = labels
            .iter()
            .enumerate()
            .map(|(i, &(_, s))| Prediction::from_similarity(format!("p{i}"), s, 0.5))
            .collect();
        let back = parse_predictions(write_predictions(&preds).as_bytes()).unwrap();
        prop_assert_eq!(back, preds);
    }
}

/// Joins `words` and marks the last one as the target.
fn sentence_with_target(words: &[String]) -> (String, Span) {
    let s = words.join(" ");
    let end = s.chars().count();
    let start = end - words.last().unwrap().chars().count();
    (s, Span::new(start, end))
}

fn fixture(pairs: &[(Tag, Tag)]) -> (Vec<Prediction>, HashMap<String, Tag>) {
    let preds = pairs
        .iter()
        .enumerate()
        .map(|(i, &(_, label))| Prediction {
            id: format!("i{i}"),
            similarity: None,
            label,
            degenerate: false,
        })
        .collect();
    let gold = pairs
        .iter()
        .enumerate()
        .map(|(i, &(g, _))| (format!("i{i}"), g))
        .collect();
    (preds, gold)
}

#[test]
fn single_token_context_mean_is_that_vector() {
    let mini = Mini::load();
    let (word, v) = mini.words.iter().next().unwrap();
    let refs = [v];
    let mean = pool(&refs, Pooling::Mean).unwrap();
    assert_eq!(mean, v.iter().map(|&x| f64::from(x)).collect::<Vec<_>>(), "{word}");
    assert_eq!(pool(&refs, Pooling::Std).unwrap(), vec![0.0; v.len()]);
}

#[test]
fn grid_is_deterministic_and_step_shaped() {
    let mini = Mini::load();
    let cfg = NormalizationConfig::default();
    let spec = GridSpec::default();
    let source = VectorSource::Lemma {
        map: &mini.lemmas,
        table: &mini.lemma_table,
    };
    let a = run_grid(&mini.instances, &spec, &source, &mini.stoplist, &cfg).unwrap();
    let b = run_grid(&mini.instances, &spec, &source, &mini.stoplist, &cfg).unwrap();
    assert_eq!(a, b);
    // within a group, predicted-TRUE count never rises as the threshold rises
    for group in a.chunks(spec.thresholds.len()) {
        let trues: Vec<usize> = group.iter().map(|r| r.counts.tp + r.counts.fp).collect();
        assert!(trues.windows(2).all(|w| w[1] <= w[0]), "{:?}", group[0].params);
    }
}

#[test]
fn classify_all_preserves_input_order() {
    let mini = Mini::load();
    let params = Params::new(2, Pooling::Max, 0.7, false).unwrap();
    let preds = classify_all(
        &mini.instances,
        &params,
        &VectorSource::Word(&mini.words),
        &mini.stoplist,
        &NormalizationConfig::default(),
    )
    .unwrap();
    let ids: Vec<&str> = preds.iter().map(|p| p.id.as_str()).collect();
    let want: Vec<&str> = mini.instances.iter().map(|i| i.id.as_str()).collect();
    assert_eq!(ids, want);
}
