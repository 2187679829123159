mod oracles;

use footprint::analysis::{
    entropy, fayyad_irani, feature_ranking, feature_report, gini_score, information_gain, mdl_score, relief, Discretization,
    LabeledColumn,
};
use footprint::features::{Feature, MetricKey};
use footprint::profile::Label;
use footprint::synth::{score_table, ScoreParams};
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn rows_strategy() -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec(((0u8..12).prop_map(|v| v as f64 / 11.0), any::<bool>()), 2..120)
}

proptest! {
    #[test]
    fn cuts_match_exhaustive_search(rows in rows_strategy()) {
        let col = LabeledColumn::from_pairs(&rows);
        prop_assert_eq!(fayyad_irani(&col).cuts, oracles::exhaustive_cuts(&rows));
    }

    #[test]
    fn cuts_match_exhaustive_search_on_separable_data(
        pos in prop::collection::vec(0.55f64..1.0, 1..60),
        neg in prop::collection::vec(0.0f64..0.6, 1..60),
    ) {
        let rows: Vec<(f64, bool)> = pos.iter().map(|&v| (v, true)).chain(neg.iter().map(|&v| (v, false))).collect();
        let col = LabeledColumn::from_pairs(&rows);
        let d = fayyad_irani(&col);
        prop_assert_eq!(&d.cuts, &oracles::exhaustive_cuts(&rows));
        prop_assert!(d.cuts.windows(2).all(|w| w[0] < w[1]));
        let ig = information_gain(&col, &d);
        prop_assert!(ig >= 0.0 && ig <= 1.0 + TOL);
        let g = gini_score(&col, &d);
        prop_assert!(g >= 0.0 && g <= 0.5 + TOL);
    }
}

#[test]
fn cuts_match_exhaustive_search_on_score_subsamples() {
    let table = score_table(&ScoreParams {
        overlap: 1.0,
        ..ScoreParams::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for key in MetricKey::all() {
        for _ in 0..3 {
            let idx = sample(&mut rng, table.len(), 200);
            let values: Vec<Option<f64>> = idx.iter().map(|i| table.rows[i][key.position()]).collect();
            let labels: Vec<Label> = idx.iter().map(|i| table.labels[i]).collect();
            let col = LabeledColumn::new(&values, &labels).unwrap();
            let rows: Vec<(f64, bool)> = col.values().iter().copied().zip(col.matches().iter().copied()).collect();
            assert_eq!(fayyad_irani(&col).cuts, oracles::exhaustive_cuts(&rows), "{key}");
        }
    }
}

#[test]
fn gain_scores_by_hand() {
    // Bin 0: 3 nonmatch, 1 match. Bin 1: 0 nonmatch, 4 match.
    let rows = [(0.1, false), (0.2, false), (0.3, false), (0.35, true), (0.7, true), (0.8, true), (0.9, true), (0.95, true)];
    let col = LabeledColumn::from_pairs(&rows);
    let d = Discretization { cuts: vec![0.5] };
    let h = |p: f64| if p == 0.0 || p == 1.0 { 0.0 } else { -p * p.log2() - (1.0 - p) * (1.0 - p).log2() };
    let prior = h(5.0 / 8.0);
    assert!((entropy([3, 5]) - prior).abs() <= TOL);
    let ig = prior - 0.5 * h(0.25) - 0.5 * h(0.0);
    assert!((information_gain(&col, &d) - ig).abs() <= TOL);
    let gini = |p: f64| 1.0 - p * p - (1.0 - p) * (1.0 - p);
    let g = gini(5.0 / 8.0) - 0.5 * gini(0.25) - 0.5 * gini(0.0);
    assert!((gini_score(&col, &d) - g).abs() <= TOL);

    // Description length: log2 multinomial + log2 C(n + C − 1, C − 1), C = 2.
    let lf = |n: u64| (2..=n).map(|i| (i as f64).log2()).sum::<f64>();
    let code = |a: u64, b: u64| lf(a + b) - lf(a) - lf(b) + ((a + b + 1) as f64).log2();
    let mdl = (code(3, 5) - code(3, 1) - code(0, 4)) / 8.0;
    assert!((mdl_score(&col, &d) - mdl).abs() <= TOL);

    let none = Discretization::default();
    assert_eq!(information_gain(&col, &none), 0.0);
    assert_eq!(gini_score(&col, &none), 0.0);
    assert!(mdl_score(&col, &none).abs() <= TOL);
}

#[test]
fn mdl_goes_negative_for_a_useless_split() {
    let rows = [(0.1, false), (0.2, true), (0.8, false), (0.9, true)];
    let col = LabeledColumn::from_pairs(&rows);
    assert!(mdl_score(&col, &Discretization { cuts: vec![0.5] }) < 0.0);
}

#[test]
fn missing_and_unlabeled_entries_are_dropped() {
    let values = [Some(0.1), None, Some(0.9), Some(0.4)];
    let labels = [Label::NonMatch, Label::Match, Label::Match, Label::Unlabeled];
    let col = LabeledColumn::new(&values, &labels).unwrap();
    assert_eq!(col.values(), &[0.1, 0.9]);
    assert_eq!(col.matches(), &[false, true]);
}

proptest! {
    #[test]
    fn relief_matches_direct_search(
        rows in prop::collection::vec((prop::collection::vec((0u8..5).prop_map(|v| v as f64 / 4.0), 3), any::<bool>()), 4..40)
    ) {
        // Each class needs a second member to have a nearest hit.
        prop_assume!(rows.iter().filter(|r| r.1).count() >= 2 && rows.iter().filter(|r| !r.1).count() >= 2);
        let values: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
        let matches: Vec<bool> = rows.iter().map(|r| r.1).collect();
        let opt: Vec<Vec<Option<f64>>> = values.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect();
        let labels: Vec<Label> = matches.iter().map(|&m| if m { Label::Match } else { Label::NonMatch }).collect();
        let got = relief(&opt, &labels, None, 0).unwrap();
        let want = oracles::relief(&values, &matches);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= TOL, "{:?} vs {:?}", got, want);
        }
    }
}

#[test]
fn relief_rejects_single_class() {
    let rows = vec![vec![Some(0.1)], vec![Some(0.2)]];
    assert!(relief(&rows, &[Label::Match, Label::Match], None, 0).is_err());
}

#[test]
fn polarized_fields_outrank_connections() {
    let table = score_table(&ScoreParams::default());
    let report = feature_report(&table, None, 1).unwrap();
    for score in ["ig", "relief", "mdl", "gini"] {
        let ranking = feature_ranking(&report, score);
        let pos = |f: Feature| ranking.iter().position(|r| r.0 == f).unwrap();
        assert!(pos(Feature::Name) < pos(Feature::Connections), "{score}: {ranking:?}");
        assert!(pos(Feature::UserId) < pos(Feature::Connections), "{score}: {ranking:?}");
    }
}
