use footprint::classify::{Hyperparams, Kind};
use footprint::eval::{kfold_cv, subset_search};
use footprint::features::{LabeledVector, MetricConfig, SimilarityVector};
use footprint::profile::Label;
use footprint::synth::{score_table, ScoreParams};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vector(slots: [Option<f64>; 6], config_id: &str, label: Label) -> LabeledVector {
    LabeledVector {
        vector: SimilarityVector {
            slots,
            config_id: config_id.to_string(),
        },
        label,
    }
}

/// Matches score in [0.7, 1] on every used slot, non-matches in [0, 0.3].
fn separable(n: usize, seed: u64) -> Vec<LabeledVector> {
    let cfg = MetricConfig::best_reported();
    let id = cfg.id();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..2 * n)
        .map(|i| {
            let m = i < n;
            let mut slots = [None; 6];
            for s in cfg.included() {
                let u: f64 = rng.gen_range(0.0..0.3);
                slots[s] = Some(if m { 1.0 - u } else { u });
            }
            vector(slots, &id, if m { Label::Match } else { Label::NonMatch })
        })
        .collect()
}

#[test]
fn separable_data_is_classified_perfectly() {
    let data = separable(200, 1);
    let hp = Hyperparams::default();
    for kind in [Kind::DecisionTree, Kind::Knn] {
        assert_eq!(kfold_cv(&data, kind, &hp, 10, 2).unwrap().accuracy(), 1.0, "{kind:?}");
    }
    assert!(kfold_cv(&data, Kind::NaiveBayes, &hp, 10, 2).unwrap().accuracy() >= 0.99);
}

#[test]
fn shuffled_labels_give_chance_accuracy() {
    let table = score_table(&ScoreParams {
        positives: 500,
        negatives: 500,
        ..ScoreParams::default()
    });
    let mut data = table.project(&MetricConfig::best_reported()).unwrap();
    let mut labels: Vec<Label> = data.iter().map(|v| v.label).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
    for (v, l) in data.iter_mut().zip(labels) {
        v.label = l;
    }
    for kind in [Kind::NaiveBayes, Kind::Knn, Kind::DecisionTree] {
        let acc = kfold_cv(&data, kind, &Hyperparams::default(), 10, 3).unwrap().accuracy();
        assert!((acc - 0.5).abs() <= 0.05, "{kind:?}: {acc}");
    }
}

#[test]
fn leave_one_out_pools_every_instance() {
    let data = separable(5, 2);
    let r = kfold_cv(&data, Kind::NaiveBayes, &Hyperparams::default(), 10, 1).unwrap();
    assert_eq!(r.folds.len(), 10);
    assert!(r.folds.iter().all(|f| f.total() == 1));
    assert_eq!(r.confusion.total(), 10);
    assert_eq!(r.accuracy(), 1.0);
}

#[test]
fn too_few_instances_or_one_class_is_an_error() {
    let data = separable(3, 4);
    assert!(kfold_cv(&data, Kind::NaiveBayes, &Hyperparams::default(), 10, 1).is_err());
    let one_class: Vec<LabeledVector> = separable(20, 4).into_iter().filter(|v| v.label == Label::Match).collect();
    assert!(kfold_cv(&one_class, Kind::NaiveBayes, &Hyperparams::default(), 10, 1).is_err());
}

#[test]
fn every_kind_clears_the_polarized_benchmark() {
    let table = score_table(&ScoreParams::default());
    let data = table.project(&MetricConfig::best_reported()).unwrap();
    for kind in Kind::ALL {
        let acc = kfold_cv(&data, kind, &Hyperparams::default(), 10, 1).unwrap().accuracy();
        assert!(acc >= 0.95, "{kind:?}: {acc}");
    }
}

#[test]
fn singleton_subset_search_is_one_cross_validation() {
    let table = score_table(&ScoreParams {
        positives: 100,
        negatives: 100,
        overlap: 1.0,
        ..ScoreParams::default()
    });
    let cfg = MetricConfig::best_reported();
    let hp = Hyperparams::default();
    let results = subset_search(&table, std::slice::from_ref(&cfg), Kind::NaiveBayes, &hp, 10, 6).unwrap();
    assert_eq!(results.len(), 1);
    assert_eq!(results[0].config, cfg);
    let direct = kfold_cv(&table.project(&cfg).unwrap(), Kind::NaiveBayes, &hp, 10, 6).unwrap();
    assert_eq!(results[0].report, direct);
}

#[test]
fn reports_pool_fold_counts() {
    let table = score_table(&ScoreParams {
        positives: 150,
        negatives: 150,
        overlap: 1.0,
        ..ScoreParams::default()
    });
    let data = table.project(&MetricConfig::best_reported()).unwrap();
    let r = kfold_cv(&data, Kind::DecisionTree, &Hyperparams::default(), 10, 8).unwrap();
    assert_eq!(r.confusion.total(), data.len());
    let mut pooled = footprint::eval::Confusion::default();
    for f in &r.folds {
        pooled.add(f);
    }
    assert_eq!(pooled, r.confusion);
    let (p, rec) = (r.precision(), r.recall());
    let f1 = if p + rec > 0.0 { 2.0 * p * rec / (p + rec) } else { 0.0 };
    assert!((r.f1() - f1).abs() <= 1e-12);
}
