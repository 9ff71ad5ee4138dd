use proptest::prelude::*;

use super::*;
use crate::corpus::{Prediction, Sentence, Source, Token};
use crate::decode::DecodeMode;
use crate::models::Framework;
use crate::rng::RngStream;
use crate::testutil::{corpus, tiny_spec};

fn gold(tags: &[&str], heads: &[usize], labels: &[&str]) -> Sentence {
    let tokens = tags
        .iter()
        .zip(heads)
        .zip(labels)
        .enumerate()
        .map(|(i, ((t, h), l))| {
            let mut tok = Token::new(format!("w{}", i));
            tok.tag = Some(t.to_string());
            tok.head = Some(*h);
            tok.label = Some(l.to_string());
            tok
        })
        .collect();
    Sentence {
        tokens,
        source: Source::Treebank,
    }
}

fn perfect(s: &Sentence) -> Prediction {
    Prediction {
        tags: Some(s.tokens.iter().map(|t| t.tag.clone().unwrap()).collect()),
        hetero_tags: None,
        heads: Some(s.tokens.iter().map(|t| t.head.unwrap()).collect()),
        labels: Some(s.tokens.iter().map(|t| t.label.clone().unwrap()).collect()),
    }
}

fn wrong(s: &Sentence) -> Prediction {
    let n = s.len();
    Prediction {
        tags: Some(vec!["XX".into(); n]),
        hetero_tags: None,
        // Every word attaches to a head different from its gold head.
        heads: Some(
            s.tokens
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let g = t.head.unwrap();
                    (0..=n).find(|&h| h != g && h != i + 1).unwrap()
                })
                .collect(),
        ),
        labels: Some(vec!["xx".into(); n]),
    }
}

fn chain(n: usize) -> Sentence {
    let tags: Vec<&str> = (0..n).map(|i| if i % 2 == 0 { "NN" } else { "VB" }).collect();
    let heads: Vec<usize> = (0..n).collect();
    let labels = vec!["dep"; n];
    gold(&tags, &heads, &labels)
}

#[test]
fn early_stopping_counts_epochs_since_best() {
    let mut s = EarlyStopping::new(2);
    assert_eq!(s.update(1, (50.0, 0.0)), (true, false));
    assert_eq!(s.update(2, (40.0, 0.0)), (false, false));
    assert_eq!(s.update(3, (50.0, 0.0)), (false, true));
    assert_eq!(s.best_epoch(), Some(1));

    let mut s = EarlyStopping::new(2);
    s.update(1, (50.0, 0.0));
    s.update(2, (40.0, 0.0));
    assert_eq!(s.update(3, (50.0, 1.0)), (true, false));
    assert_eq!(s.best_epoch(), Some(3));

    let mut s = EarlyStopping::new(0);
    assert_eq!(s.update(1, (0.0, 0.0)), (true, true));
}

#[test]
fn patience_defaults_depend_on_context_layers() {
    let cfg = TrainConfig::default();
    let mut spec = tiny_spec(Framework::BasicParser);
    assert_eq!(cfg.effective_patience(&spec), 100);
    spec.use_context_layers = true;
    assert_eq!(cfg.effective_patience(&spec), 50);
    let mut cfg = cfg;
    cfg.set("patience", "7").unwrap();
    assert_eq!(cfg.effective_patience(&spec), 7);
    cfg.set("patience", "auto").unwrap();
    assert_eq!(cfg.patience, None);
    assert!(!cfg.set("nonsense", "1").unwrap());
    assert!(cfg.set("lr", "abc").is_err());
}

#[test]
fn batches_respect_token_budget_and_order() {
    let lengths = vec![3, 4, 5, 9, 1, 2];
    let order = vec![5, 4, 3, 2, 1, 0];
    let batches = make_batches(&order, &lengths, 8);
    let flat: Vec<usize> = batches.iter().flatten().copied().collect();
    assert_eq!(flat, order);
    for b in &batches {
        let tokens: usize = b.iter().map(|&i| lengths[i]).sum();
        assert!(tokens <= 8 || b.len() == 1);
    }
}

#[test]
fn interleave_places_hetero_batches_after_treebank_batches() {
    let tb = vec![vec![0], vec![1]];
    let het = vec![vec![10], vec![11], vec![12], vec![13]];
    let sched = interleave(tb, het, 2);
    let sources: Vec<BatchSource> = sched.iter().map(|(s, _)| *s).collect();
    assert_eq!(
        sources,
        [
            BatchSource::Treebank,
            BatchSource::Hetero,
            BatchSource::Hetero,
            BatchSource::Treebank,
            BatchSource::Hetero,
            BatchSource::Hetero
        ]
    );
}

fn quick_config(epochs: usize) -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.batch_tokens = 60;
    cfg.max_epochs = epochs;
    cfg.patience = Some(1000);
    cfg
}

#[test]
fn max_epochs_bounds_training() {
    let data = corpus(12, 1);
    let (tr, dev) = data.split_at(9);
    let spec = tiny_spec(Framework::ShareLoose);
    let outcome = train(
        &spec,
        &quick_config(3),
        TrainData {
            train: tr,
            dev,
            ..Default::default()
        },
        crate::corpus::Pretrained::empty(spec.word_dim),
        None,
    )
    .unwrap();
    assert_eq!(outcome.records.len(), 3);
    assert!(outcome.records.iter().all(|r| r.steps > 0));
    assert!((1..=3).contains(&outcome.best_epoch));
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let data = corpus(10, 2);
    let (tr, dev) = data.split_at(8);
    let spec = tiny_spec(Framework::Stack);
    let run = || {
        let mut log = Vec::new();
        let outcome = train(
            &spec,
            &quick_config(2),
            TrainData {
                train: tr,
                dev,
                ..Default::default()
            },
            crate::corpus::Pretrained::empty(spec.word_dim),
            Some(&mut log),
        )
        .unwrap();
        let lines: Vec<String> = outcome.records.iter().map(|r| r.to_line(false)).collect();
        let params: Vec<Vec<f64>> = outcome.model.store.iter().map(|(_, p)| p.value.data().to_vec()).collect();
        assert_eq!(String::from_utf8(log).unwrap().lines().count(), 2);
        (lines, params)
    };
    assert_eq!(run(), run());
}

#[test]
fn training_restores_best_dev_parameters() {
    let data = corpus(10, 3);
    let (tr, dev) = data.split_at(8);
    let spec = tiny_spec(Framework::BasicTagger);
    let outcome = train(
        &spec,
        &quick_config(4),
        TrainData {
            train: tr,
            dev,
            ..Default::default()
        },
        crate::corpus::Pretrained::empty(spec.word_dim),
        None,
    )
    .unwrap();
    let report = evaluate_model(&outcome.model, dev, None, DecodeMode::Mst, false).unwrap();
    assert_eq!(report.ta, outcome.best.ta);
    let best = outcome.records[outcome.best_epoch - 1].dev.ta.unwrap();
    assert!(outcome.records.iter().all(|r| r.dev.ta.unwrap() <= best));
}

#[test]
fn empty_training_data_is_rejected() {
    let spec = tiny_spec(Framework::BasicParser);
    let r = train(
        &spec,
        &quick_config(1),
        TrainData::default(),
        crate::corpus::Pretrained::empty(spec.word_dim),
        None,
    );
    assert!(r.is_err());
}

#[test]
fn identical_systems_are_not_significant() {
    let gold: Vec<Sentence> = (2..40).map(chain).collect();
    let preds: Vec<Prediction> = gold.iter().map(wrong).collect();
    for metric in [Metric::Ta, Metric::Uas, Metric::Las] {
        let s = significance(&gold, &preds, &preds, metric, false, 500, 1).unwrap();
        assert_eq!(s.p_value, 1.0);
        assert_eq!(s.delta, 0.0);
    }
}

#[test]
fn perfect_versus_wrong_is_significant() {
    let gold: Vec<Sentence> = (0..200).map(|i| chain(2 + i % 7)).collect();
    let a: Vec<Prediction> = gold.iter().map(wrong).collect();
    let b: Vec<Prediction> = gold.iter().map(perfect).collect();
    for metric in [Metric::Ta, Metric::Uas, Metric::Las] {
        let s = significance(&gold, &a, &b, metric, false, 10_000, 7).unwrap();
        assert_eq!(s.score_a, 0.0);
        assert_eq!(s.score_b, 100.0);
        assert_eq!(s.delta, 100.0);
        assert!(s.p_value < 0.001, "{}", s);
        assert_eq!(s, significance(&gold, &a, &b, metric, false, 10_000, 7).unwrap());
    }
}

#[test]
fn per_pos_delta_reports_tag_level_differences() {
    // Ten NN words; system B fixes exactly one of A's NN tagging errors.
    let tags = vec!["NN"; 10];
    let heads: Vec<usize> = (0..10).collect();
    let g = gold(&tags, &heads, &vec!["dep"; 10]);
    let mut a = perfect(&g);
    a.tags.as_mut().unwrap()[3] = "VB".into();
    a.tags.as_mut().unwrap()[4] = "VB".into();
    let mut b = perfect(&g);
    b.tags.as_mut().unwrap()[4] = "VB".into();
    let rows = per_pos_delta(&[g.clone()], &[a.clone()], &[b], false).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].tag, "NN");
    assert_eq!(rows[0].tokens, 10);
    assert!((rows[0].ta_a - 80.0).abs() < 1e-9);
    assert!((rows[0].delta_ta - 10.0).abs() < 1e-9);
    assert_eq!(rows[0].delta_las, Some(0.0));
    assert!(pos_delta_tsv(&rows).contains("+10.00"));

    let same = per_pos_delta(&[g], &[a.clone()], &[a], false).unwrap();
    assert!(same.iter().all(|r| r.delta_ta == 0.0 && r.delta_las == Some(0.0)));
}

#[test]
fn pattern_table_partitions_scored_tokens() {
    let gold_set: Vec<Sentence> = (3..9).map(chain).collect();
    let mut rng = RngStream::new(4);
    let preds: Vec<Prediction> = gold_set
        .iter()
        .map(|s| {
            let (good, bad) = (perfect(s), wrong(s));
            let n = s.len();
            let pick = |rng: &mut RngStream| rng.below(2) == 0;
            let mut p = good.clone();
            for i in 0..n {
                if pick(&mut rng) {
                    p.tags.as_mut().unwrap()[i] = bad.tags.as_ref().unwrap()[i].clone();
                }
                if pick(&mut rng) {
                    p.heads.as_mut().unwrap()[i] = bad.heads.as_ref().unwrap()[i];
                }
            }
            p
        })
        .collect();
    let table = pattern_table(&gold_set, &preds, false).unwrap();
    let total: usize = gold_set.iter().map(Sentence::len).sum();
    assert_eq!(table.correct_tag.support + table.wrong_tag.support, total);
    assert_eq!(table.rows.iter().map(|r| r.support).sum::<usize>(), total);
    let report = evaluate(&gold_set, &preds, false).unwrap();
    let weighted = (table.correct_tag.uas * table.correct_tag.support as f64
        + table.wrong_tag.uas * table.wrong_tag.support as f64)
        / total as f64;
    assert!((weighted - report.uas.unwrap()).abs() < 1e-9);
    assert!(table.to_tsv().lines().count() == table.rows.len() + 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evaluation_ignores_sentence_order(seed in 0u64..1000) {
        let mut rng = RngStream::new(seed);
        let gold_set: Vec<Sentence> = (0..8).map(|_| chain(2 + rng.below(6))).collect();
        let preds: Vec<Prediction> = gold_set
            .iter()
            .map(|s| if rng.below(2) == 0 { perfect(s) } else { wrong(s) })
            .collect();
        let mut order: Vec<usize> = (0..gold_set.len()).collect();
        rng.shuffle(&mut order);
        let g2: Vec<Sentence> = order.iter().map(|&i| gold_set[i].clone()).collect();
        let p2: Vec<Prediction> = order.iter().map(|&i| preds[i].clone()).collect();
        let a = evaluate(&gold_set, &preds, false).unwrap();
        let b = evaluate(&g2, &p2, false).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn significance_p_value_is_a_probability(seed in 0u64..200) {
        let mut rng = RngStream::new(seed);
        let gold_set: Vec<Sentence> = (0..10).map(|_| chain(2 + rng.below(4))).collect();
        let a: Vec<Prediction> = gold_set.iter().map(|s| if rng.below(2) == 0 { perfect(s) } else { wrong(s) }).collect();
        let b: Vec<Prediction> = gold_set.iter().map(|s| if rng.below(2) == 0 { perfect(s) } else { wrong(s) }).collect();
        let s = significance(&gold_set, &a, &b, Metric::Las, false, 99, seed).unwrap();
        prop_assert!(s.p_value > 0.0 && s.p_value <= 1.0);
        prop_assert!((s.p_value * 100.0 - (s.p_value * 100.0).round()).abs() < 1e-9);
    }
}
