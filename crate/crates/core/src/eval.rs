//! Cross-validation, configuration search and candidate ranking.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classify::{self, Hyperparams, Kind, TrainedModel};
use crate::features::{self, FeatureContext, LabeledVector, MetricConfig, MetricTable};
use crate::profile::{Label, Profile, ProfileKey, ProfilePair};
use crate::text;
use crate::{Error, Result};

/// Candidate list size.
pub const DEFAULT_TOP_K: usize = 20;

/// Confusion counts with Match as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth == Label::Match, predicted == Label::Match) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub kind: Kind,
    /// Pooled over folds.
    pub confusion: Confusion,
    pub folds: Vec<Confusion>,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        self.confusion.accuracy()
    }

    pub fn precision(&self) -> f64 {
        self.confusion.precision()
    }

    pub fn recall(&self) -> f64 {
        self.confusion.recall()
    }

    pub fn f1(&self) -> f64 {
        self.confusion.f1()
    }
}

/// CSV with header `classifier,accuracy,precision,recall,f1`.
pub fn write_eval_csv<W: Write>(out: W, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Invalid(format!("writing report: {e}"));
    w.write_record(["classifier", "accuracy", "precision", "recall", "f1"]).map_err(err)?;
    for r in reports {
        w.write_record([
            r.kind.tag().to_string(),
            format!("{:.4}", r.accuracy()),
            format!("{:.4}", r.precision()),
            format!("{:.4}", r.recall()),
            format!("{:.4}", r.f1()),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Invalid(format!("writing report: {e}")))
}

/// Fold index for every labeled vector. Each class is shuffled separately and
/// dealt round-robin, the second class continuing where the first stopped, so
/// fold sizes and per-fold class counts differ by at most one.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Invalid("need at least two folds".into()));
    }
    if labels.len() < k {
        return Err(Error::Invalid(format!("{} instances cannot fill {k} folds", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for class in [Label::Match, Label::NonMatch] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            folds[i] = next % k;
            next += 1;
        }
    }
    Ok(folds)
}

/// Stratified k-fold cross-validation; confusion counts are pooled over folds.
pub fn kfold_cv(vectors: &[LabeledVector], kind: Kind, hp: &Hyperparams, k: usize, seed: u64) -> Result<EvalReport> {
    if vectors.iter().any(|v| v.label == Label::Unlabeled) {
        return Err(Error::Invalid("cross-validation needs labeled vectors".into()));
    }
    let labels: Vec<Label> = vectors.iter().map(|v| v.label).collect();
    let matches = labels.iter().filter(|&&l| l == Label::Match).count();
    if matches == 0 || matches == labels.len() {
        return Err(Error::Training("cross-validation needs both classes".into()));
    }
    let folds = stratified_folds(&labels, k, seed)?;
    let per_fold = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<LabeledVector> = vectors
                .iter()
                .zip(&folds)
                .filter(|(_, &g)| g != f)
                .map(|(v, _)| v.clone())
                .collect();
            let model = classify::train(kind, &train, hp, seed)?;
            let mut c = Confusion::default();
            for (v, _) in vectors.iter().zip(&folds).filter(|(_, &g)| g == f) {
                c.record(v.label, model.predict(&v.vector)?);
            }
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut confusion = Confusion::default();
    for c in &per_fold {
        confusion.add(c);
    }
    Ok(EvalReport {
        kind,
        confusion,
        folds: per_fold,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetResult {
    pub config: MetricConfig,
    pub report: EvalReport,
}

/// Cross-validate every configuration over one precomputed table. Results are
/// sorted by accuracy, highest first, then by configuration id.
pub fn subset_search(
    table: &MetricTable,
    configs: &[MetricConfig],
    kind: Kind,
    hp: &Hyperparams,
    k: usize,
    seed: u64,
) -> Result<Vec<SubsetResult>> {
    let mut results = configs
        .par_iter()
        .map(|cfg| {
            let vectors = table.project(cfg)?;
            Ok(SubsetResult {
                config: cfg.clone(),
                report: kfold_cv(&vectors, kind, hp, k, seed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| {
        b.report
            .accuracy()
            .total_cmp(&a.report.accuracy())
            .then_with(|| a.config.id().cmp(&b.config.id()))
    });
    Ok(results)
}

/// CSV with header `rank,config_id,accuracy,precision,recall,f1`.
pub fn write_subsets_csv<W: Write>(out: W, results: &[SubsetResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Invalid(format!("writing subsets: {e}"));
    w.write_record(["rank", "config_id", "accuracy", "precision", "recall", "f1"]).map_err(err)?;
    for (i, r) in results.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            r.config.id(),
            format!("{:.4}", r.report.accuracy()),
            format!("{:.4}", r.report.precision()),
            format!("{:.4}", r.report.recall()),
            format!("{:.4}", r.report.f1()),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Invalid(format!("writing subsets: {e}")))
}

/// Name-token inverted index over the profiles of one service.
#[derive(Debug, Clone)]
pub struct CandidateIndex {
    profiles: Vec<Profile>,
    postings: HashMap<String, Vec<usize>>,
    pub top_k: usize,
}

fn name_tokens(name: &str) -> Vec<String> {
    let mut t: Vec<String> = text::words(name).collect();
    t.sort();
    t.dedup();
    t
}

impl CandidateIndex {
    pub fn build(profiles: impl IntoIterator<Item = Profile>) -> Self {
        let profiles: Vec<Profile> = profiles.into_iter().collect();
        let mut postings: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, p) in profiles.iter().enumerate() {
            for t in p.name.as_deref().map(name_tokens).unwrap_or_default() {
                postings.entry(t).or_default().push(i);
            }
        }
        CandidateIndex {
            profiles,
            postings,
            top_k: DEFAULT_TOP_K,
        }
    }

    pub fn with_top_k(mut self, top_k: usize) -> Self {
        self.top_k = top_k;
        self
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Profiles sharing a name token with `name`, ordered by shared-token
    /// count, then name similarity to the query, then userid.
    pub fn search(&self, name: &str) -> Vec<&Profile> {
        let mut shared: BTreeMap<usize, usize> = BTreeMap::new();
        for t in name_tokens(name) {
            for &i in self.postings.get(&t).map(Vec::as_slice).unwrap_or_default() {
                *shared.entry(i).or_default() += 1;
            }
        }
        let mut hits: Vec<(usize, f64, &Profile)> = shared
            .into_iter()
            .map(|(i, n)| {
                let p = &self.profiles[i];
                (n, text::jaro_winkler(p.name.as_deref().unwrap_or_default(), name), p)
            })
            .collect();
        hits.sort_by(|a, b| {
            b.0.cmp(&a.0)
                .then(b.1.total_cmp(&a.1))
                .then_with(|| a.2.userid.cmp(&b.2.userid))
        });
        hits.truncate(self.top_k);
        hits.into_iter().map(|h| h.2).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankResult {
    pub query: ProfileKey,
    /// Candidates with P(Match), highest first.
    pub ranked: Vec<(ProfileKey, f64)>,
    /// 1-based position of the true match; `None` when it was not retrieved.
    pub position: Option<usize>,
}

/// Order scored candidates by probability, highest first, ties by userid.
pub fn order_candidates(scored: &mut [(ProfileKey, f64)]) {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.userid.cmp(&b.0.userid)));
}

/// Retrieve candidates for `query` by name and rank them by the model's
/// match probability for each (candidate, query) pair.
pub fn rank_candidates(
    query: &Profile,
    truth: Option<&ProfileKey>,
    index: &CandidateIndex,
    model: &TrainedModel,
    cfg: &MetricConfig,
    ctx: &FeatureContext<'_>,
) -> Result<RankResult> {
    if cfg.id() != model.config_id() {
        return Err(Error::Config(format!(
            "model expects '{}' but ranking uses '{}'",
            model.config_id(),
            cfg.id()
        )));
    }
    let candidates = query.name.as_deref().map(|n| index.search(n)).unwrap_or_default();
    let mut ranked = candidates
        .into_iter()
        .map(|c| {
            let pair = ProfilePair::new(c.clone(), query.clone(), Label::Unlabeled)?;
            let v = features::build_similarity_vector(&pair, cfg, ctx)?;
            Ok((c.key(), model.predict_proba(&v)?))
        })
        .collect::<Result<Vec<_>>>()?;
    order_candidates(&mut ranked);
    let position = truth.and_then(|t| ranked.iter().position(|(k, _)| k == t).map(|p| p + 1));
    Ok(RankResult {
        query: query.key(),
        ranked,
        position,
    })
}

/// Fraction of queries whose true match sits at position ≤ r, for r = 1..=top_k.
pub fn rank_curve(results: &[RankResult], top_k: usize) -> Result<Vec<(usize, f64)>> {
    let positions: Vec<Option<usize>> = results.iter().map(|r| r.position).collect();
    position_curve(&positions, top_k)
}

/// [`rank_curve`] over bare positions, `None` meaning the match was not found.
pub fn position_curve(positions: &[Option<usize>], top_k: usize) -> Result<Vec<(usize, f64)>> {
    if positions.is_empty() {
        return Err(Error::Invalid("no rank results".into()));
    }
    let n = positions.len() as f64;
    Ok((1..=top_k)
        .map(|r| {
            let hits = positions.iter().filter(|x| x.is_some_and(|p| p <= r)).count();
            (r, hits as f64 / n)
        })
        .collect())
}

/// CSV with header `r,fraction`.
pub fn write_curve_csv<W: Write>(out: W, curve: &[(usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Invalid(format!("writing curve: {e}"));
    w.write_record(["r", "fraction"]).map_err(err)?;
    for (r, f) in curve {
        w.write_record([r.to_string(), format!("{f:.6}")]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Invalid(format!("writing curve: {e}")))
}

/// CSV with header `query,position,candidates`; absent positions are empty.
pub fn write_rank_results_csv<W: Write>(out: W, results: &[RankResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Invalid(format!("writing ranks: {e}"));
    w.write_record(["query", "position", "candidates"]).map_err(err)?;
    for r in results {
        w.write_record([
            r.query.to_string(),
            r.position.map(|p| p.to_string()).unwrap_or_default(),
            r.ranked.len().to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Invalid(format!("writing ranks: {e}")))
}

/// Read the `(query, position)` columns of a file written by
/// [`write_rank_results_csv`].
pub fn read_rank_positions<R: std::io::Read>(input: R) -> Result<Vec<(String, Option<usize>)>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(|e| Error::parse("<ranks>", 1, e.to_string()))?;
    if headers.iter().ne(["query", "position", "candidates"]) {
        return Err(Error::parse("<ranks>", 1, "header must be query,position,candidates"));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let bad = |m: String| Error::parse("<ranks>", i + 2, m);
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let cell = rec.get(1).unwrap_or_default();
        let position = if cell.is_empty() {
            None
        } else {
            Some(cell.parse().map_err(|_| bad(format!("bad position '{cell}'")))?)
        };
        out.push((rec.get(0).unwrap_or_default().to_string(), position));
    }
    Ok(out)
}

/// Read `r,fraction` back.
pub fn read_curve_csv<R: std::io::Read>(input: R) -> Result<Vec<(usize, f64)>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let bad = |m: String| Error::parse("<curve>", i + 2, m);
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let r = rec.get(0).unwrap_or_default().parse().map_err(|_| bad("bad r".into()))?;
        let f = rec.get(1).unwrap_or_default().parse().map_err(|_| bad("bad fraction".into()))?;
        out.push((r, f));
    }
    Ok(out)
}

/// Minimal line plot of one or more rank curves.
pub fn curve_svg(series: &[(&str, &[(usize, f64)])]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const L: f64 = 60.0;
    const B: f64 = 50.0;
    const T: f64 = 20.0;
    const R: f64 = 20.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let max_r = series
        .iter()
        .flat_map(|s| s.1.iter().map(|p| p.0))
        .max()
        .unwrap_or(1)
        .max(2);
    let x = |r: usize| L + (r - 1) as f64 / (max_r - 1) as f64 * (W - L - R);
    let y = |f: f64| T + (1.0 - f) * (H - T - B);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<g stroke="black" stroke-width="1">"#).unwrap();
    writeln!(s, r#"<line x1="{L}" y1="{}" x2="{}" y2="{}"/>"#, H - B, W - R, H - B).unwrap();
    writeln!(s, r#"<line x1="{L}" y1="{T}" x2="{L}" y2="{}"/>"#, H - B).unwrap();
    s.push_str("</g>\n");
    s.push_str(r#"<g font-family="sans-serif" font-size="11" fill="black">"#);
    s.push('\n');
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.0}%</text>"#, L - 6.0, y(f) + 4.0, f * 100.0).unwrap();
    }
    for r in 1..=max_r {
        if r == 1 || r % 5 == 0 || r == max_r {
            writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{r}</text>"#, x(r), H - B + 16.0).unwrap();
        }
    }
    writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">Position in rank (r)</text>"#, L + (W - L - R) / 2.0, H - 12.0).unwrap();
    writeln!(
        s,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">Right profile at position ≤ r</text>"#,
        T + (H - T - B) / 2.0
    )
    .unwrap();
    s.push_str("</g>\n");
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(r, f)| format!("{:.1},{:.1}", x(r), y(f))).collect();
        writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" ")).unwrap();
        let ly = T + 14.0 + 16.0 * i as f64;
        writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, W - 170.0, W - 150.0).unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            W - 144.0,
            ly + 4.0,
            xml_escape(name)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Shuffle and split off `fraction` of the items (at least one when possible).
pub fn holdout_split<T: Clone>(items: &[T], fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut v = items.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((items.len() as f64 * fraction).round() as usize).clamp(usize::from(items.len() > 1), items.len());
    let test = v.split_off(v.len() - n_test);
    (v, test)
}
