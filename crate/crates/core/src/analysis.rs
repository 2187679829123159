//! Discriminative-capacity scores for single similarity columns.
//!
//! Columns are discretized with recursive minimum-entropy splitting and an
//! MDL stopping rule; information gain, MDL and Gini reduction are computed
//! over the resulting bins. Relief works on whole vectors.

use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::features::{Feature, MetricKey, MetricTable};
use crate::profile::Label;
use crate::{Error, Result};

/// One similarity column with labels; missing and unlabeled rows are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledColumn {
    values: Vec<f64>,
    matches: Vec<bool>,
}

impl LabeledColumn {
    pub fn new(values: &[Option<f64>], labels: &[Label]) -> Result<Self> {
        if values.len() != labels.len() {
            return Err(Error::Invalid(format!(
                "{} values but {} labels",
                values.len(),
                labels.len()
            )));
        }
        let mut col = LabeledColumn {
            values: Vec::new(),
            matches: Vec::new(),
        };
        for (v, l) in values.iter().zip(labels) {
            let m = match l {
                Label::Match => true,
                Label::NonMatch => false,
                Label::Unlabeled => continue,
            };
            if let Some(v) = v {
                col.values.push(*v);
                col.matches.push(m);
            }
        }
        Ok(col)
    }

    pub fn from_pairs(rows: &[(f64, bool)]) -> Self {
        LabeledColumn {
            values: rows.iter().map(|r| r.0).collect(),
            matches: rows.iter().map(|r| r.1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn matches(&self) -> &[bool] {
        &self.matches
    }

    fn sorted(&self) -> Vec<(f64, bool)> {
        let mut rows: Vec<(f64, bool)> = self.values.iter().copied().zip(self.matches.iter().copied()).collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        rows
    }
}

/// Strictly increasing cut points; a value `v` falls in bin `#{c : v > c}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Discretization {
    pub cuts: Vec<f64>,
}

impl Discretization {
    pub fn bins(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn bin(&self, v: f64) -> usize {
        self.cuts.partition_point(|&c| v > c)
    }

    /// (nonmatch, match) counts per bin.
    fn counts(&self, col: &LabeledColumn) -> Vec<[u64; 2]> {
        let mut counts = vec![[0u64; 2]; self.bins()];
        for (&v, &m) in col.values.iter().zip(&col.matches) {
            counts[self.bin(v)][m as usize] += 1;
        }
        counts
    }
}

/// Binary class entropy in bits.
pub fn entropy(counts: [u64; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn gini(counts: [u64; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn classes(counts: [u64; 2]) -> u32 {
    counts.iter().filter(|&&c| c > 0).count() as u32
}

fn add(a: [u64; 2], b: [u64; 2]) -> [u64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

fn sub(a: [u64; 2], b: [u64; 2]) -> [u64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// Whether recursive splitting should accept a partition of `whole` into
/// `left` and `right` under the minimum-description-length criterion.
pub fn mdlp_accepts(whole: [u64; 2], left: [u64; 2], right: [u64; 2]) -> bool {
    let n = (whole[0] + whole[1]) as f64;
    let (e, e1, e2) = (entropy(whole), entropy(left), entropy(right));
    let n1 = (left[0] + left[1]) as f64;
    let n2 = (right[0] + right[1]) as f64;
    let class_info = (n1 * e1 + n2 * e2) / n;
    let gain = e - class_info;
    let (k, k1, k2) = (classes(whole) as f64, classes(left) as f64, classes(right) as f64);
    let delta = (3f64.powf(k) - 2.0).log2() - (k * e - k1 * e1 - k2 * e2);
    gain > ((n - 1.0).log2() + delta) / n
}

/// A group of equal values with its class counts.
struct Group {
    value: f64,
    counts: [u64; 2],
}

fn groups(sorted: &[(f64, bool)]) -> Vec<Group> {
    let mut out: Vec<Group> = Vec::new();
    for &(v, m) in sorted {
        match out.last_mut() {
            Some(g) if g.value == v => g.counts[m as usize] += 1,
            _ => {
                let mut counts = [0; 2];
                counts[m as usize] = 1;
                out.push(Group { value: v, counts });
            }
        }
    }
    out
}

/// A cut between two adjacent value groups can only be optimal if the two
/// groups are not both pure in the same class.
fn is_boundary(a: &Group, b: &Group) -> bool {
    !(classes(a.counts) == 1 && classes(b.counts) == 1 && (a.counts[0] > 0) == (b.counts[0] > 0))
}

/// Recursive entropy-minimizing discretization with the MDL stopping rule.
pub fn fayyad_irani(col: &LabeledColumn) -> Discretization {
    let groups = groups(&col.sorted());
    let mut cuts = Vec::new();
    split(&groups, &mut cuts);
    cuts.sort_by(f64::total_cmp);
    Discretization { cuts }
}

fn split(groups: &[Group], cuts: &mut Vec<f64>) {
    if groups.len() < 2 {
        return;
    }
    let whole = groups.iter().fold([0, 0], |acc, g| add(acc, g.counts));
    let n = (whole[0] + whole[1]) as f64;
    let mut left = [0u64; 2];
    let mut best: Option<(f64, usize, [u64; 2])> = None;
    for i in 1..groups.len() {
        left = add(left, groups[i - 1].counts);
        if !is_boundary(&groups[i - 1], &groups[i]) {
            continue;
        }
        let right = sub(whole, left);
        let nl = (left[0] + left[1]) as f64;
        let e = (nl * entropy(left) + (n - nl) * entropy(right)) / n;
        if best.map_or(true, |(be, _, _)| e < be) {
            best = Some((e, i, left));
        }
    }
    let Some((_, i, left)) = best else { return };
    if !mdlp_accepts(whole, left, sub(whole, left)) {
        return;
    }
    cuts.push((groups[i - 1].value + groups[i].value) / 2.0);
    split(&groups[..i], cuts);
    split(&groups[i..], cuts);
}

fn totals(bins: &[[u64; 2]]) -> [u64; 2] {
    bins.iter().fold([0, 0], |acc, &c| add(acc, c))
}

/// Entropy reduction in bits.
pub fn information_gain(col: &LabeledColumn, d: &Discretization) -> f64 {
    let bins = d.counts(col);
    let all = totals(&bins);
    let n = (all[0] + all[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let cond: f64 = bins.iter().map(|&b| (b[0] + b[1]) as f64 / n * entropy(b)).sum();
    (entropy(all) - cond).max(0.0)
}

/// Gini impurity reduction.
pub fn gini_score(col: &LabeledColumn, d: &Discretization) -> f64 {
    let bins = d.counts(col);
    let all = totals(&bins);
    let n = (all[0] + all[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let cond: f64 = bins.iter().map(|&b| (b[0] + b[1]) as f64 / n * gini(b)).sum();
    (gini(all) - cond).max(0.0)
}

fn log2_factorial(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).log2()).sum()
}

fn log2_binomial(n: u64, k: u64) -> f64 {
    log2_factorial(n) - log2_factorial(k) - log2_factorial(n - k)
}

/// Bits to encode the labels of a subset: which class counts occur, then
/// which arrangement of labels.
fn code_length(counts: [u64; 2], classes: u64) -> f64 {
    let n = counts[0] + counts[1];
    let arrangement = log2_factorial(n) - counts.iter().map(|&c| log2_factorial(c)).sum::<f64>();
    arrangement + log2_binomial(n + classes - 1, classes - 1)
}

/// Per-instance reduction in label description length achieved by the bins.
/// Negative when the bins cost more than they explain.
pub fn mdl_score(col: &LabeledColumn, d: &Discretization) -> f64 {
    let bins = d.counts(col);
    let all = totals(&bins);
    let n = all[0] + all[1];
    if n == 0 {
        return 0.0;
    }
    let c = u64::from(classes(all).max(1));
    let prior = code_length(all, c);
    let post: f64 = bins.iter().map(|&b| code_length(b, c)).sum();
    (prior - post) / n as f64
}

/// Classic two-class Relief with Manhattan distance. Each row holds one value
/// per column; distances skip missing slots and are rescaled to the full
/// column count. `samples = None` visits every instance once.
pub fn relief(rows: &[Vec<Option<f64>>], labels: &[Label], samples: Option<usize>, seed: u64) -> Result<Vec<f64>> {
    let data: Vec<(&Vec<Option<f64>>, bool)> = rows
        .iter()
        .zip(labels)
        .filter_map(|(r, l)| match l {
            Label::Match => Some((r, true)),
            Label::NonMatch => Some((r, false)),
            Label::Unlabeled => None,
        })
        .collect();
    let dims = data.first().map_or(0, |r| r.0.len());
    if data.iter().any(|r| r.0.len() != dims) {
        return Err(Error::Invalid("rows differ in length".into()));
    }
    let hits = data.iter().filter(|r| r.1).count();
    if hits == 0 || hits == data.len() {
        return Err(Error::Invalid("Relief needs both classes".into()));
    }
    let n = data.len();
    let chosen: Vec<usize> = match samples {
        None => (0..n).collect(),
        Some(m) if m == 0 || m > n => {
            return Err(Error::Invalid(format!("sample count {m} outside 1..={n}")));
        }
        Some(m) => sample(&mut ChaCha8Rng::seed_from_u64(seed), n, m).into_vec(),
    };
    let m = chosen.len() as f64;

    let distance = |a: &[Option<f64>], b: &[Option<f64>]| {
        let (mut sum, mut shared) = (0.0, 0usize);
        for (x, y) in a.iter().zip(b) {
            if let (Some(x), Some(y)) = (x, y) {
                sum += (x - y).abs();
                shared += 1;
            }
        }
        if shared == 0 {
            dims as f64
        } else {
            sum * dims as f64 / shared as f64
        }
    };

    let contributions: Vec<Vec<f64>> = chosen
        .par_iter()
        .map(|&i| {
            let (x, cls) = data[i];
            let mut hit: Option<(f64, usize)> = None;
            let mut miss: Option<(f64, usize)> = None;
            for (j, &(y, c)) in data.iter().enumerate() {
                if j == i {
                    continue;
                }
                let d = distance(x, y);
                let slot = if c == cls { &mut hit } else { &mut miss };
                if slot.map_or(true, |(bd, _)| d < bd) {
                    *slot = Some((d, j));
                }
            }
            let diff = |other: Option<(f64, usize)>, f: usize| match other {
                Some((_, j)) => match (x[f], data[j].0[f]) {
                    (Some(a), Some(b)) => (a - b).abs(),
                    _ => 0.0,
                },
                None => 0.0,
            };
            (0..dims).map(|f| (diff(miss, f) - diff(hit, f)) / m).collect()
        })
        .collect();

    let mut weights = vec![0.0; dims];
    for c in contributions {
        for (w, v) in weights.iter_mut().zip(c) {
            *w += v;
        }
    }
    Ok(weights)
}

/// Scores of one (feature, metric) column.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub key: MetricKey,
    pub ig: f64,
    pub relief: f64,
    pub mdl: f64,
    pub gini: f64,
    pub cuts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureReport {
    pub rows: Vec<ReportRow>,
}

pub const SCORE_NAMES: [&str; 4] = ["ig", "relief", "mdl", "gini"];

impl ReportRow {
    pub fn score(&self, name: &str) -> f64 {
        match name {
            "ig" => self.ig,
            "relief" => self.relief,
            "mdl" => self.mdl,
            "gini" => self.gini,
            other => panic!("unknown score {other}"),
        }
    }
}

impl FeatureReport {
    pub fn row(&self, key: MetricKey) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.key == key)
    }

    /// Names of the scores on which `row` is the best metric of its feature.
    pub fn best_marks(&self, row: &ReportRow) -> Vec<&'static str> {
        SCORE_NAMES
            .iter()
            .copied()
            .filter(|s| {
                let peers = self.rows.iter().filter(|r| r.key.feature == row.key.feature);
                let top = peers.map(|r| r.score(s)).fold(f64::NEG_INFINITY, f64::max);
                self.rows
                    .iter()
                    .find(|r| r.key.feature == row.key.feature && r.score(s) == top)
                    .is_some_and(|first| first.key == row.key)
            })
            .collect()
    }

    /// CSV with header `feature,metric,ig,relief,mdl,gini,best`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Invalid(format!("writing report: {e}"));
        w.write_record(["feature", "metric", "ig", "relief", "mdl", "gini", "best"]).map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.key.feature.short().to_string(),
                r.key.metric.name().to_string(),
                format!("{:.6}", r.ig),
                format!("{:.6}", r.relief),
                format!("{:.6}", r.mdl),
                format!("{:.6}", r.gini),
                self.best_marks(r).join("+"),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Invalid(format!("writing report: {e}")))
    }
}

/// Score every computed column of `table`. Relief runs jointly over all
/// computed columns.
pub fn feature_report(table: &MetricTable, relief_samples: Option<usize>, seed: u64) -> Result<FeatureReport> {
    let keys = &table.keys;
    let projected: Vec<Vec<Option<f64>>> = table
        .rows
        .iter()
        .map(|r| keys.iter().map(|k| r[k.position()]).collect())
        .collect();
    let weights = relief(&projected, &table.labels, relief_samples, seed)?;
    let rows = keys
        .par_iter()
        .zip(weights)
        .map(|(&key, relief)| {
            let col = LabeledColumn::new(&table.column(key), &table.labels)?;
            let d = fayyad_irani(&col);
            Ok(ReportRow {
                key,
                ig: information_gain(&col, &d),
                relief,
                mdl: mdl_score(&col, &d),
                gini: gini_score(&col, &d),
                cuts: d.cuts.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureReport { rows })
}

/// Features ordered by their best metric's score, highest first.
pub fn feature_ranking(report: &FeatureReport, score: &str) -> Vec<(Feature, f64)> {
    let mut best: Vec<(Feature, f64)> = Feature::ALL
        .iter()
        .filter_map(|&f| {
            report
                .rows
                .iter()
                .filter(|r| r.key.feature == f)
                .map(|r| r.score(score))
                .reduce(f64::max)
                .map(|s| (f, s))
        })
        .collect();
    best.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(rows: &[(f64, bool)]) -> LabeledColumn {
        LabeledColumn::from_pairs(rows)
    }

    #[test]
    fn separated_column_gets_one_cut() {
        let rows: Vec<(f64, bool)> = (0..20).map(|i| (if i < 10 { 0.0 } else { 1.0 }, i >= 10)).collect();
        let d = fayyad_irani(&col(&rows));
        assert_eq!(d.cuts, vec![0.5]);
        assert!((information_gain(&col(&rows), &d) - 1.0).abs() < 1e-12);
        assert!((gini_score(&col(&rows), &d) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_column_has_no_cuts() {
        let rows: Vec<(f64, bool)> = (0..10).map(|i| (0.3, i % 2 == 0)).collect();
        let c = col(&rows);
        let d = fayyad_irani(&c);
        assert!(d.cuts.is_empty());
        assert_eq!(information_gain(&c, &d), 0.0);
        assert_eq!(gini_score(&c, &d), 0.0);
        assert_eq!(mdl_score(&c, &d), 0.0);
    }

    #[test]
    fn entropy_by_hand() {
        // 8 rows: bin 0 holds 3 nonmatch + 1 match, bin 1 holds 1 nonmatch + 3 match.
        let rows = [
            (0.1, false),
            (0.2, false),
            (0.3, false),
            (0.4, true),
            (0.6, false),
            (0.7, true),
            (0.8, true),
            (0.9, true),
        ];
        let c = col(&rows);
        let d = Discretization { cuts: vec![0.5] };
        let h_bin = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert!((information_gain(&c, &d) - (1.0 - h_bin)).abs() < 1e-12);
        assert!((gini_score(&c, &d) - (0.5 - 0.375)).abs() < 1e-12);
    }

    #[test]
    fn mdl_by_hand() {
        // Balanced 8 rows split perfectly.
        let rows: Vec<(f64, bool)> = (0..8).map(|i| (i as f64, i >= 4)).collect();
        let c = col(&rows);
        let d = Discretization { cuts: vec![3.5] };
        // prior: log2 C(8,4) + log2 C(9,1); post per bin: log2 C(4,0) + log2 C(5,1).
        let prior = 70f64.log2() + 9f64.log2();
        let post = 2.0 * 5f64.log2();
        assert!((mdl_score(&c, &d) - (prior - post) / 8.0).abs() < 1e-12);
        assert_eq!(mdl_score(&c, &Discretization::default()), 0.0);
        let single: Vec<(f64, bool)> = (0..8).map(|i| (i as f64, true)).collect();
        assert_eq!(mdl_score(&col(&single), &d), 0.0);
    }

    #[test]
    fn useless_split_has_negative_mdl() {
        let rows: Vec<(f64, bool)> = (0..40).map(|i| (i as f64, i % 2 == 0)).collect();
        let d = Discretization { cuts: vec![19.5] };
        assert!(mdl_score(&col(&rows), &d) < 0.0);
    }

    #[test]
    fn relief_extremes() {
        let labels: Vec<Label> = (0..10).map(|i| if i < 5 { Label::Match } else { Label::NonMatch }).collect();
        let rows: Vec<Vec<Option<f64>>> = (0..10)
            .map(|i| vec![Some(if i < 5 { 1.0 } else { 0.0 }), Some(0.3)])
            .collect();
        let w = relief(&rows, &labels, None, 0).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12);
        assert_eq!(w[1], 0.0);
        let one_class = vec![Label::Match; 10];
        assert!(relief(&rows, &one_class, None, 0).is_err());
    }

    #[test]
    fn relief_sampling_is_seeded() {
        let labels: Vec<Label> = (0..30).map(|i| if i % 3 == 0 { Label::Match } else { Label::NonMatch }).collect();
        let rows: Vec<Vec<Option<f64>>> = (0..30)
            .map(|i| vec![Some((i * 7 % 11) as f64 / 10.0), Some((i % 3 == 0) as u8 as f64)])
            .collect();
        let a = relief(&rows, &labels, Some(10), 5).unwrap();
        assert_eq!(a, relief(&rows, &labels, Some(10), 5).unwrap());
    }
}
