mod common;

use ruletag::corpus::{generate_synthetic, split_corpus, subsample_indices, CorpusSplit, Sentence, SyntheticConfig, SyntheticCorpus};
use ruletag::embeddings::EmbeddingStore;
use ruletag::metrics::{evaluate, run_ablation, AblationSpec};
use ruletag::models::{
    evaluate_tagger, forward_a, forward_b, forward_c, train, Checkpoint, ModelError, Tagger, TrainOptions, Variant,
    VariantConfig,
};
use ruletag::rules::{rule_only_predict, DictionarySet};

const DIM: usize = 16;

fn small(variant: Variant) -> VariantConfig {
    let mut c = VariantConfig::new(variant);
    c.dim = DIM;
    c.hidden = 16;
    c.rule_hidden = 8;
    c.dropout = 0.2;
    c.optimizer.lr = 0.01;
    c
}

fn synthetic(config: SyntheticConfig) -> (SyntheticCorpus, CorpusSplit) {
    let syn = generate_synthetic(&config, config.seed).unwrap();
    let split = split_corpus(&syn.sentences, (0.7, 0.1, 0.2), 1).unwrap();
    (syn, split)
}

fn store() -> EmbeddingStore {
    EmbeddingStore::empty(DIM).unwrap()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

#[test]
fn every_variant_emits_one_distribution_per_token() {
    let (syn, split) = synthetic(SyntheticConfig::default());
    let words = split.test[0].words();
    for variant in Variant::ALL {
        let mut s = store();
        let tagger = Tagger::new(small(variant), syn.tags.clone(), syn.dictionaries.clone(), &mut s, ["x"], 3).unwrap();
        let rules = tagger.rule_vectors(&words, None).unwrap();
        let out = match variant {
            Variant::A => forward_a(&tagger, &words, None).unwrap(),
            Variant::B => forward_b(&tagger, &words, &rules, None).unwrap(),
            Variant::C => forward_c(&tagger, &words, &rules, None).unwrap(),
            Variant::D => tagger.forward(&words, Some(&rules), None).unwrap(),
        };
        assert_eq!(out.len(), words.len());
        for d in &out {
            assert_eq!(d.len(), syn.tags.len());
            assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn zero_output_projection_gives_uniform_distributions() {
    let (syn, split) = synthetic(SyntheticConfig::default());
    let mut s = store();
    let mut tagger = Tagger::new(small(Variant::A), syn.tags.clone(), syn.dictionaries.clone(), &mut s, ["x"], 3).unwrap();
    for name in ["out.weight", "out.bias"] {
        tagger.params_mut().get_mut(name).unwrap().data_mut().fill(0.0);
    }
    let k = syn.tags.len() as f64;
    for d in forward_a(&tagger, &split.train[0].words(), None).unwrap() {
        for p in d.probs() {
            assert!((p - 1.0 / k).abs() < 1e-12);
        }
    }
}

#[test]
fn b_without_rules_has_the_same_output_shape_as_a() {
    let (syn, split) = synthetic(SyntheticConfig::default());
    let empty = DictionarySet::empty(&syn.tags);
    let words = split.train[0].words();
    let mut s = store();
    let a = Tagger::new(small(Variant::A), syn.tags.clone(), empty.clone(), &mut s, ["x"], 1).unwrap();
    let b = Tagger::new(small(Variant::B), syn.tags.clone(), empty, &mut s, ["x"], 1).unwrap();
    let rules = b.rule_vectors(&words, None).unwrap();
    assert!(rules.iter().all(|r| r.is_other_only()));
    let da = forward_a(&a, &words, None).unwrap();
    let db = forward_b(&b, &words, &rules, None).unwrap();
    assert_eq!(da.len(), db.len());
    assert!(da.iter().zip(&db).all(|(x, y)| x.len() == y.len()));
    assert!(matches!(forward_b(&b, &words, &rules[1..], None), Err(ModelError::RuleLength { .. })));
}

#[test]
fn training_is_deterministic() {
    let (syn, split) = synthetic(SyntheticConfig::default());
    let options = TrainOptions {
        epochs: 3,
        seed: 9,
        select_best: true,
    };
    for variant in [Variant::A, Variant::D] {
        let run = || {
            let mut s = store();
            let (tagger, log) =
                train(small(variant), &split.train, &split.val, &syn.tags, &syn.dictionaries, &mut s, &options).unwrap();
            (Checkpoint::from_tagger(&tagger).to_json(), log.to_jsonl())
        };
        assert_eq!(run(), run());
    }
}

#[test]
fn empty_training_set_is_an_error() {
    let (syn, split) = synthetic(SyntheticConfig::default());
    let mut s = store();
    let err = train(small(Variant::A), &[], &split.val, &syn.tags, &syn.dictionaries, &mut s, &TrainOptions::default());
    assert!(matches!(err, Err(ModelError::EmptyTrain)));
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let (syn, split) = synthetic(SyntheticConfig::default());
    let options = TrainOptions {
        epochs: 2,
        seed: 4,
        select_best: false,
    };
    for variant in Variant::ALL {
        let mut s = store();
        let (tagger, _) =
            train(small(variant), &split.train, &split.val, &syn.tags, &syn.dictionaries, &mut s, &options).unwrap();
        let dir = std::env::temp_dir().join(format!("ruletag-ckpt-{variant}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        Checkpoint::from_tagger(&tagger).save(&path).unwrap();
        let restored = Checkpoint::load(&path).unwrap().into_tagger().unwrap();
        std::fs::remove_dir_all(&dir).unwrap();
        assert_eq!(restored.params(), tagger.params());
        let a = evaluate_tagger(&tagger, &split.test, None, None).unwrap();
        let b = evaluate_tagger(&restored, &split.test, None, None).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn learner_beats_rules_when_context_matters() {
    // Negated mentions are tagged `other`, but the rules are given no
    // negative dictionary and a wide window, so they over-tag.
    let (syn, split) = synthetic(SyntheticConfig {
        negated_fraction: 0.3,
        ..SyntheticConfig::default()
    });
    let mut dicts = syn.dictionaries.clone();
    dicts.negative.clear();
    let config = small(Variant::A);
    let mut s = store();
    let options = TrainOptions {
        epochs: 30,
        seed: 1,
        select_best: true,
    };
    let (tagger, log) = train(config.clone(), &split.train, &split.val, &syn.tags, &dicts, &mut s, &options).unwrap();
    let learned = evaluate_tagger(&tagger, &split.val, Some(&s), None).unwrap();
    assert_eq!(Some(learned.micro_f1), log.epochs[log.selected_epoch - 1].val_micro_f1);

    let (mut gold, mut pred) = (Vec::new(), Vec::new());
    for sentence in &split.val {
        let rules = ruletag::rules::apply_rules(&sentence.words(), &dicts, &config.rules, None).unwrap();
        gold.extend(sentence.gold());
        pred.extend(rule_only_predict(&rules));
    }
    let rules_only = evaluate(&gold, &pred, &syn.tags).unwrap();
    assert!(
        learned.micro_f1 > rules_only.micro_f1,
        "learned {} vs rules {}",
        learned.micro_f1,
        rules_only.micro_f1
    );
}

#[test]
fn distillation_trains_without_divergence() {
    let (syn, split) = synthetic(SyntheticConfig::default());
    let mut s = store();
    let options = TrainOptions {
        epochs: 30,
        seed: 2,
        select_best: true,
    };
    let (_, log) = train(small(Variant::D), &split.train, &split.val, &syn.tags, &syn.dictionaries, &mut s, &options).unwrap();
    assert_eq!(log.epochs.len(), 30);
    for e in &log.epochs {
        assert!(e.train_loss.is_finite());
        assert_eq!(e.imitation, Some(0.4));
    }
}

#[test]
fn rule_inputs_help_on_small_training_sets() {
    let (syn, split) = synthetic(SyntheticConfig::default());
    let train_set: Vec<Sentence> = split.train[..50].to_vec();
    let mut scores = Vec::new();
    for variant in [Variant::A, Variant::B] {
        let mut config = small(variant);
        config.rules.window = 0;
        let runs: Vec<f64> = (1..=5)
            .map(|seed| {
                let mut s = store();
                let options = TrainOptions {
                    epochs: 15,
                    seed,
                    select_best: true,
                };
                let (tagger, _) =
                    train(config.clone(), &train_set, &split.val, &syn.tags, &syn.dictionaries, &mut s, &options).unwrap();
                evaluate_tagger(&tagger, &split.test, Some(&s), None).unwrap().micro_f1
            })
            .collect();
        scores.push(median(runs));
    }
    assert!(scores[1] >= scores[0], "B {} < A {}", scores[1], scores[0]);
}

#[test]
fn ablation_grid_shape_and_logged_subsets() {
    let (syn, split) = synthetic(SyntheticConfig::default());
    let spec = AblationSpec {
        variants: vec![Variant::A, Variant::B],
        percents: vec![20, 40],
        seeds: vec![3],
        epochs: 1,
        base: small(Variant::A),
        ..AblationSpec::default()
    };
    let grid = run_ablation(&spec, &split, &syn.tags, &syn.dictionaries, &store()).unwrap();
    assert_eq!(grid.cells.len(), 4);
    assert_eq!(grid.medians.len(), 4);
    for cell in &grid.cells {
        assert_eq!(cell.train_indices, subsample_indices(split.train.len(), cell.percent, cell.seed).unwrap());
    }
    let order: Vec<(Variant, u32)> = grid.cells.iter().map(|c| (c.variant, c.percent)).collect();
    assert_eq!(order, vec![(Variant::A, 20), (Variant::A, 40), (Variant::B, 20), (Variant::B, 40)]);
    let csv = grid.summary_csv();
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(grid.to_jsonl().lines().count(), 4);

    let single = AblationSpec {
        variants: vec![Variant::A],
        percents: vec![100],
        seeds: vec![1],
        epochs: 1,
        base: small(Variant::A),
        ..AblationSpec::default()
    };
    assert_eq!(run_ablation(&single, &split, &syn.tags, &syn.dictionaries, &store()).unwrap().cells.len(), 1);
    let empty = AblationSpec {
        seeds: vec![],
        ..single
    };
    assert!(run_ablation(&empty, &split, &syn.tags, &syn.dictionaries, &store()).is_err());
}
