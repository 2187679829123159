//! Similarity-vector assembly.
//!
//! A [`MetricConfig`] picks at most one metric per profile field and a
//! missing-value policy. Every slot is oriented so that higher means more
//! similar: distances (geographic, MSE, connection differences) are flipped
//! and rescaled into [0, 1] before they enter a vector.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::geo::{self, DistanceMode, Geocoder};
use crate::image::{self, ImageStore};
use crate::profile::{Corpus, Label, Profile, ProfilePair};
use crate::text::{self, Lexicon, TokenSet, TokenizeOptions};
use crate::wordnet::{Aggregation, HypernymGraph};
use crate::{Error, Result};

/// Number of connection classes.
pub const CONNECTION_CLASSES: usize = 5;

/// Value written for a missing slot under [`MissingPolicy::ImputeNeutral`].
pub const NEUTRAL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    UserId,
    Name,
    Description,
    Location,
    Image,
    Connections,
}

impl Feature {
    pub const ALL: [Feature; 6] = [
        Feature::UserId,
        Feature::Name,
        Feature::Description,
        Feature::Location,
        Feature::Image,
        Feature::Connections,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Short name used in configuration ids and reports.
    pub fn short(self) -> &'static str {
        match self {
            Feature::UserId => "userid",
            Feature::Name => "name",
            Feature::Description => "desc",
            Feature::Location => "loc",
            Feature::Image => "img",
            Feature::Connections => "conn",
        }
    }

    /// Column name in vector CSV files.
    pub fn column(self) -> &'static str {
        match self {
            Feature::UserId => "userid",
            Feature::Name => "name",
            Feature::Description => "description",
            Feature::Location => "location",
            Feature::Image => "image",
            Feature::Connections => "connections",
        }
    }

    pub fn metrics(self) -> &'static [Metric] {
        match self {
            Feature::UserId | Feature::Name => &[Metric::Jw],
            Feature::Description => &[Metric::Jaccard, Metric::Tfidf, Metric::Ontology],
            Feature::Location => &[Metric::Jw, Metric::Jaccard, Metric::Substr, Metric::Geo],
            Feature::Image => &[Metric::Mse, Metric::Psnr, Metric::Ls],
            Feature::Connections => &[Metric::Norm, Metric::Class],
        }
    }

    fn from_short(s: &str) -> Option<Feature> {
        Feature::ALL.into_iter().find(|f| f.short() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Jw,
    Jaccard,
    Tfidf,
    Ontology,
    Substr,
    Geo,
    Mse,
    Psnr,
    Ls,
    Norm,
    Class,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Jw => "jw",
            Metric::Jaccard => "jaccard",
            Metric::Tfidf => "tfidf",
            Metric::Ontology => "ontology",
            Metric::Substr => "substr",
            Metric::Geo => "geo",
            Metric::Mse => "mse",
            Metric::Psnr => "psnr",
            Metric::Ls => "ls",
            Metric::Norm => "norm",
            Metric::Class => "class",
        }
    }
}

/// A (feature, metric) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetricKey {
    pub feature: Feature,
    pub metric: Metric,
}

impl MetricKey {
    /// All fourteen combinations, grouped by feature in slot order.
    pub fn all() -> Vec<MetricKey> {
        Feature::ALL
            .iter()
            .flat_map(|&feature| feature.metrics().iter().map(move |&metric| MetricKey { feature, metric }))
            .collect()
    }

    /// Position of this key in [`MetricKey::all`].
    pub fn position(self) -> usize {
        MetricKey::all().iter().position(|k| *k == self).expect("valid metric key")
    }
}

impl fmt::Display for MetricKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.feature.short(), self.metric.name())
    }
}

impl FromStr for MetricKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (f, m) = s
            .split_once('_')
            .ok_or_else(|| Error::Config(format!("'{s}' is not of the form feature_metric")))?;
        let feature = Feature::from_short(f).ok_or_else(|| Error::Config(format!("unknown feature '{f}'")))?;
        let metric = feature
            .metrics()
            .iter()
            .copied()
            .find(|m2| m2.name() == m)
            .ok_or_else(|| Error::Config(format!("metric '{m}' is not available for {f}")))?;
        Ok(MetricKey { feature, metric })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum MissingPolicy {
    /// Write [`NEUTRAL`] into the slot.
    #[default]
    ImputeNeutral,
    /// Keep the slot missing; classifiers handle it.
    PropagateMissing,
}

/// Which metric fills each slot, plus the missing-value policy.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MetricConfig {
    metrics: [Option<Metric>; 6],
    pub missing: MissingPolicy,
    /// Treat present-but-blank text fields as missing instead of scoring them.
    pub empty_as_missing: bool,
}

impl MetricConfig {
    pub fn new(keys: &[MetricKey], missing: MissingPolicy) -> Result<Self> {
        let mut metrics = [None; 6];
        for k in keys {
            let slot = &mut metrics[k.feature.index()];
            if slot.is_some() {
                return Err(Error::Config(format!("more than one metric for {}", k.feature.short())));
            }
            if !k.feature.metrics().contains(&k.metric) {
                return Err(Error::Config(format!("{k} is not a valid combination")));
            }
            *slot = Some(k.metric);
        }
        if metrics.iter().all(Option::is_none) {
            return Err(Error::Config("a configuration needs at least one feature".into()));
        }
        Ok(MetricConfig {
            metrics,
            missing,
            empty_as_missing: false,
        })
    }

    /// ⟨name_jw, userid_jw, loc_geo, desc_jaccard, img_ls⟩.
    pub fn best_reported() -> Self {
        Self::parse_keys("userid_jw+name_jw+desc_jaccard+loc_geo+img_ls").unwrap()
    }

    /// ⟨userid_jw, name_jw⟩.
    pub fn names_only() -> Self {
        Self::parse_keys("userid_jw+name_jw").unwrap()
    }

    fn parse_keys(s: &str) -> Result<Self> {
        let keys = s.split('+').map(str::parse).collect::<Result<Vec<MetricKey>>>()?;
        Self::new(&keys, MissingPolicy::ImputeNeutral)
    }

    pub fn with_missing(mut self, missing: MissingPolicy) -> Self {
        self.missing = missing;
        self
    }

    pub fn metric(&self, feature: Feature) -> Option<Metric> {
        self.metrics[feature.index()]
    }

    /// Included (feature, metric) pairs in slot order.
    pub fn keys(&self) -> Vec<MetricKey> {
        Feature::ALL
            .iter()
            .filter_map(|&f| self.metric(f).map(|m| MetricKey { feature: f, metric: m }))
            .collect()
    }

    /// Included slot indices in order.
    pub fn included(&self) -> Vec<usize> {
        (0..6).filter(|&i| self.metrics[i].is_some()).collect()
    }

    /// Stable textual identifier, e.g. `userid_jw+name_jw;neutral`.
    pub fn id(&self) -> String {
        let keys: Vec<String> = self.keys().iter().map(ToString::to_string).collect();
        let policy = match self.missing {
            MissingPolicy::ImputeNeutral => "neutral",
            MissingPolicy::PropagateMissing => "propagate",
        };
        let mut id = format!("{};{policy}", keys.join("+"));
        if self.empty_as_missing {
            id.push_str(";empty-missing");
        }
        id
    }

    /// Every combination with each feature excluded or given one of its
    /// metrics (959 configurations for the full metric space).
    pub fn enumerate(missing: MissingPolicy) -> Vec<MetricConfig> {
        let mut out = vec![[None; 6]];
        for f in Feature::ALL {
            let mut next = Vec::new();
            for partial in &out {
                let mut skip = *partial;
                skip[f.index()] = None;
                next.push(skip);
                for &m in f.metrics() {
                    let mut with = *partial;
                    with[f.index()] = Some(m);
                    next.push(with);
                }
            }
            out = next;
        }
        out.into_iter()
            .filter(|m| m.iter().any(Option::is_some))
            .map(|metrics| MetricConfig {
                metrics,
                missing,
                empty_as_missing: false,
            })
            .collect()
    }

    /// Fail early if a configured metric needs a resource the context lacks.
    pub fn check_resources(&self, ctx: &FeatureContext<'_>) -> Result<()> {
        for k in self.keys() {
            check_key(k, ctx)?;
        }
        Ok(())
    }
}

fn check_key(k: MetricKey, ctx: &FeatureContext<'_>) -> Result<()> {
    let missing = match (k.feature, k.metric) {
        (Feature::Description, Metric::Ontology) if ctx.wordnet.is_none() => "a WordNet hypernym graph",
        (Feature::Location, Metric::Geo) if ctx.geocoder.is_none() => "a geocoder",
        (Feature::Image, _) if ctx.images.is_none() => "an image store",
        (Feature::Connections, _) if ctx.stats.is_none() => "connection statistics",
        _ => return Ok(()),
    };
    Err(Error::Config(format!("{k} requires {missing}")))
}

impl fmt::Display for MetricConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for MetricConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(';');
        let keys = parts.next().unwrap_or_default();
        let mut cfg = Self::parse_keys(keys)?;
        for p in parts {
            match p {
                "neutral" => cfg.missing = MissingPolicy::ImputeNeutral,
                "propagate" => cfg.missing = MissingPolicy::PropagateMissing,
                "empty-missing" => cfg.empty_as_missing = true,
                other => return Err(Error::Config(format!("unknown configuration flag '{other}'"))),
            }
        }
        Ok(cfg)
    }
}

/// Equal-frequency class boundaries over one service's connection counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectionBins {
    k: usize,
    /// Inclusive upper bound of each class except the last.
    thresholds: Vec<u64>,
}

impl ConnectionBins {
    /// Split sorted `values` into `k` classes of near-equal size. A boundary
    /// that would separate equal values moves right past the duplicates, so
    /// heavy ties can leave fewer than `k` effective classes.
    pub fn build(values: &[u64], k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Invalid("need at least two connection classes".into()));
        }
        if values.len() < k {
            return Err(Error::Capacity(format!(
                "{} connection values cannot fill {k} classes",
                values.len()
            )));
        }
        debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        let n = values.len();
        let mut thresholds = Vec::new();
        let mut last = 0;
        for i in 1..k {
            let mut p = (i * n / k).max(last + 1);
            while p < n && values[p] == values[p - 1] {
                p += 1;
            }
            if p >= n {
                break;
            }
            if p > last {
                thresholds.push(values[p - 1]);
                last = p;
            }
        }
        thresholds.dedup();
        Ok(ConnectionBins { k, thresholds })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn thresholds(&self) -> &[u64] {
        &self.thresholds
    }

    /// Class index in 1..=k.
    pub fn class_index(&self, count: u64) -> usize {
        1 + self.thresholds.iter().filter(|&&t| count > t).count()
    }
}

/// Unsigned difference of the two class indexes (0 = same class).
pub fn connections_class(ca: u64, cb: u64, bins_a: &ConnectionBins, bins_b: &ConnectionBins) -> usize {
    bins_a.class_index(ca).abs_diff(bins_b.class_index(cb))
}

/// Per-service connection statistics.
#[derive(Debug, Clone, Default)]
pub struct ServiceStats {
    services: BTreeMap<String, ServiceConnections>,
}

#[derive(Debug, Clone)]
pub struct ServiceConnections {
    pub min: u64,
    pub max: u64,
    pub sorted: Vec<u64>,
    pub bins: Option<ConnectionBins>,
}

impl ServiceStats {
    pub fn from_corpus(corpus: &Corpus, k: usize) -> Self {
        let mut values: BTreeMap<String, Vec<u64>> = BTreeMap::new();
        for p in corpus.profiles() {
            if let Some(c) = p.connections {
                values.entry(p.service.clone()).or_default().push(c);
            }
        }
        let mut stats = ServiceStats::default();
        for (service, v) in values {
            stats.insert(&service, v, k);
        }
        stats
    }

    pub fn insert(&mut self, service: &str, mut values: Vec<u64>, k: usize) {
        if values.is_empty() {
            return;
        }
        values.sort_unstable();
        let bins = ConnectionBins::build(&values, k).ok();
        self.services.insert(
            service.to_string(),
            ServiceConnections {
                min: values[0],
                max: *values.last().unwrap(),
                sorted: values,
                bins,
            },
        );
    }

    pub fn get(&self, service: &str) -> Option<&ServiceConnections> {
        self.services.get(service)
    }

    fn require(&self, service: &str) -> Result<&ServiceConnections> {
        self.get(service)
            .ok_or_else(|| Error::Config(format!("no connection statistics for service '{service}'")))
    }

    /// Min–max normalized count within its service, clamped to [0, 1]; a
    /// degenerate range maps to 0.5.
    pub fn normalize(&self, service: &str, count: u64) -> Result<f64> {
        let s = self.require(service)?;
        if s.min == s.max {
            return Ok(0.5);
        }
        let c = count.clamp(s.min, s.max);
        Ok((c - s.min) as f64 / (s.max - s.min) as f64)
    }
}

/// 1 − |norm(a) − norm(b)|.
pub fn connections_norm(ca: u64, service_a: &str, cb: u64, service_b: &str, stats: &ServiceStats) -> Result<f64> {
    Ok(1.0 - (stats.normalize(service_a, ca)? - stats.normalize(service_b, cb)?).abs())
}

/// Metric tuning that does not change which metrics are used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOptions {
    pub ontology_aggregation: Aggregation,
    pub distance_mode: DistanceMode,
    /// Pixel intensities within this distance count as equal for `img_ls`.
    pub levenshtein_tolerance: u8,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            ontology_aggregation: Aggregation::MeanOfMax,
            distance_mode: DistanceMode::Degrees,
            levenshtein_tolerance: 0,
        }
    }
}

/// Shared, read-only resources the metrics draw on.
#[derive(Clone, Copy, Default)]
pub struct FeatureContext<'a> {
    pub wordnet: Option<&'a HypernymGraph>,
    pub geocoder: Option<&'a Geocoder>,
    pub stats: Option<&'a ServiceStats>,
    pub images: Option<&'a ImageStore>,
    pub options: MetricOptions,
}

/// Six optional scores in slot order, tagged with the producing configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityVector {
    pub slots: [Option<f64>; 6],
    pub config_id: String,
}

impl SimilarityVector {
    pub fn get(&self, feature: Feature) -> Option<f64> {
        self.slots[feature.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVector {
    pub vector: SimilarityVector,
    pub label: Label,
}

fn text_field<'p>(value: &'p Option<String>, cfg: &MetricConfig) -> Option<&'p str> {
    let v = value.as_deref()?;
    if cfg.empty_as_missing && v.trim().is_empty() {
        None
    } else {
        Some(v)
    }
}

fn both<'p>(x: &'p Option<String>, y: &'p Option<String>, cfg: &MetricConfig) -> Option<(&'p str, &'p str)> {
    Some((text_field(x, cfg)?, text_field(y, cfg)?))
}

fn description_tokens(text: &str, ctx: &FeatureContext<'_>) -> TokenSet {
    let lexicon = ctx.wordnet.map(|g| g as &dyn Lexicon);
    text::tokenize(text, TokenizeOptions::DESCRIPTION, lexicon)
}

/// Score one (feature, metric) on a pair. `Ok(None)` means an input is missing.
pub fn score(key: MetricKey, a: &Profile, b: &Profile, cfg: &MetricConfig, ctx: &FeatureContext<'_>) -> Result<Option<f64>> {
    check_key(key, ctx)?;
    let value = match key.feature {
        Feature::UserId => Some(text::jaro_winkler(&a.userid, &b.userid)),
        Feature::Name => both(&a.name, &b.name, cfg).map(|(x, y)| text::jaro_winkler(x, y)),
        Feature::Description => match both(&a.description, &b.description, cfg) {
            None => None,
            Some((x, y)) => {
                let (ta, tb) = (description_tokens(x, ctx), description_tokens(y, ctx));
                Some(match key.metric {
                    Metric::Jaccard => text::jaccard(&ta, &tb),
                    Metric::Tfidf => text::tfidf_cosine(&ta, &tb),
                    Metric::Ontology => ctx
                        .wordnet
                        .expect("checked")
                        .description_score(&ta, &tb, ctx.options.ontology_aggregation),
                    _ => unreachable!("invalid description metric"),
                })
            }
        },
        Feature::Location => match both(&a.location, &b.location, cfg) {
            None => None,
            Some((x, y)) => match key.metric {
                Metric::Jw => Some(geo::location_jw(x, y)),
                Metric::Jaccard => Some(geo::location_jaccard(x, y)),
                Metric::Substr => Some(geo::substring_score(x, y)),
                Metric::Geo => geo::geo_distance_score(ctx.geocoder.expect("checked"), x, y, ctx.options.distance_mode)?
                    .map(|g| g.similarity),
                _ => unreachable!("invalid location metric"),
            },
        },
        Feature::Image => {
            let store = ctx.images.expect("checked");
            let img = |p: &Profile| p.image_ref.as_deref().and_then(|r| store.get(r));
            match (img(a), img(b)) {
                (Some(x), Some(y)) => Some(match key.metric {
                    Metric::Mse => 1.0 - image::mse(x, y) / (255.0 * 255.0),
                    Metric::Psnr => image::psnr(x, y) / image::PSNR_CAP,
                    Metric::Ls => image::pixel_levenshtein(x, y, ctx.options.levenshtein_tolerance),
                    _ => unreachable!("invalid image metric"),
                }),
                _ => None,
            }
        }
        Feature::Connections => {
            let stats = ctx.stats.expect("checked");
            match (a.connections, b.connections) {
                (Some(ca), Some(cb)) => Some(match key.metric {
                    Metric::Norm => connections_norm(ca, &a.service, cb, &b.service, stats)?,
                    Metric::Class => {
                        let bins = |s: &str| -> Result<&ConnectionBins> {
                            stats.require(s)?.bins.as_ref().ok_or_else(|| {
                                Error::Config(format!("service '{s}' has too few connection values for classes"))
                            })
                        };
                        let (ba, bb) = (bins(&a.service)?, bins(&b.service)?);
                        let diff = connections_class(ca, cb, ba, bb);
                        1.0 - diff as f64 / (ba.k().max(bb.k()) - 1) as f64
                    }
                    _ => unreachable!("invalid connections metric"),
                }),
                _ => None,
            }
        }
    };
    Ok(value)
}

fn apply_policy(v: Option<f64>, policy: MissingPolicy) -> Option<f64> {
    match (v, policy) {
        (None, MissingPolicy::ImputeNeutral) => Some(NEUTRAL),
        (v, _) => v,
    }
}

pub fn build_similarity_vector(pair: &ProfilePair, cfg: &MetricConfig, ctx: &FeatureContext<'_>) -> Result<SimilarityVector> {
    cfg.check_resources(ctx)?;
    let mut slots = [None; 6];
    for key in cfg.keys() {
        let v = score(key, &pair.a, &pair.b, cfg, ctx)?;
        slots[key.feature.index()] = apply_policy(v, cfg.missing);
    }
    Ok(SimilarityVector {
        slots,
        config_id: cfg.id(),
    })
}

/// Build vectors for many pairs in parallel. Output order follows input order.
pub fn build_vectors(pairs: &[ProfilePair], cfg: &MetricConfig, ctx: &FeatureContext<'_>) -> Result<Vec<LabeledVector>> {
    cfg.check_resources(ctx)?;
    pairs
        .par_iter()
        .map(|p| {
            Ok(LabeledVector {
                vector: build_similarity_vector(p, cfg, ctx)?,
                label: p.label,
            })
        })
        .collect()
}

/// Raw scores of every available (feature, metric) for one pair, in
/// [`MetricKey::all`] order. Metrics whose resource is absent stay `None`.
pub type MetricRow = Vec<Option<f64>>;

/// All metric scores for a labeled dataset, computed once and projected onto
/// any number of configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub keys: Vec<MetricKey>,
    pub rows: Vec<MetricRow>,
    pub labels: Vec<Label>,
    /// Whether empty text was treated as missing when scoring.
    pub empty_as_missing: bool,
}

impl MetricTable {
    pub fn compute(pairs: &[ProfilePair], ctx: &FeatureContext<'_>, empty_as_missing: bool) -> Result<Self> {
        let keys: Vec<MetricKey> = MetricKey::all().into_iter().filter(|k| check_key(*k, ctx).is_ok()).collect();
        let mut cfg = MetricConfig::new(&keys[..1], MissingPolicy::PropagateMissing)?;
        cfg.empty_as_missing = empty_as_missing;
        let rows = pairs
            .par_iter()
            .map(|p| {
                let mut row = vec![None; MetricKey::all().len()];
                for k in &keys {
                    row[k.position()] = score(*k, &p.a, &p.b, &cfg, ctx)?;
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricTable {
            keys,
            rows,
            labels: pairs.iter().map(|p| p.label).collect(),
            empty_as_missing,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, key: MetricKey) -> Vec<Option<f64>> {
        let i = key.position();
        self.rows.iter().map(|r| r[i]).collect()
    }

    /// Vectors for one configuration, with its missing policy applied.
    pub fn project(&self, cfg: &MetricConfig) -> Result<Vec<LabeledVector>> {
        let keys = cfg.keys();
        for k in &keys {
            if !self.keys.contains(k) {
                return Err(Error::Config(format!("{k} was not computed for this table")));
            }
        }
        let id = cfg.id();
        Ok(self
            .rows
            .iter()
            .zip(&self.labels)
            .map(|(row, &label)| {
                let mut slots = [None; 6];
                for k in &keys {
                    slots[k.feature.index()] = apply_policy(row[k.position()], cfg.missing);
                }
                LabeledVector {
                    vector: SimilarityVector {
                        slots,
                        config_id: id.clone(),
                    },
                    label,
                }
            })
            .collect())
    }
}

const VECTOR_HEADER: [&str; 8] = [
    "userid",
    "name",
    "description",
    "location",
    "image",
    "connections",
    "label",
    "config_id",
];

/// Write vectors as CSV. Missing slots are empty cells.
pub fn write_vectors_csv<W: Write>(out: W, vectors: &[LabeledVector]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Invalid(format!("writing vectors: {e}"));
    w.write_record(VECTOR_HEADER).map_err(io)?;
    for v in vectors {
        let mut rec: Vec<String> = v
            .vector
            .slots
            .iter()
            .map(|s| s.map(|x| x.to_string()).unwrap_or_default())
            .collect();
        rec.push(v.label.as_str().to_string());
        rec.push(v.vector.config_id.clone());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Invalid(format!("writing vectors: {e}")))
}

pub fn read_vectors_csv<R: Read>(input: R) -> Result<Vec<LabeledVector>> {
    let mut r = csv::Reader::from_reader(input);
    let bad = |line: usize, m: String| Error::parse("<vectors>", line, m);
    let headers = r.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if headers.iter().ne(VECTOR_HEADER) {
        return Err(bad(1, format!("header must be {}", VECTOR_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        let mut slots = [None; 6];
        for (k, slot) in slots.iter_mut().enumerate() {
            let cell = rec.get(k).unwrap_or_default();
            if !cell.is_empty() {
                *slot = Some(cell.parse::<f64>().map_err(|_| bad(line, format!("bad score '{cell}'")))?);
            }
        }
        let label = rec.get(6).unwrap_or_default().parse().map_err(|e: Error| bad(line, e.to_string()))?;
        out.push(LabeledVector {
            vector: SimilarityVector {
                slots,
                config_id: rec.get(7).unwrap_or_default().to_string(),
            },
            label,
        });
    }
    Ok(out)
}

/// Write a metric table as CSV: one column per computed key, then `label`.
/// Missing scores are empty cells.
pub fn write_table_csv<W: Write>(out: W, table: &MetricTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Invalid(format!("writing metric table: {e}"));
    let mut header: Vec<String> = table.keys.iter().map(|k| k.to_string()).collect();
    header.push("label".into());
    w.write_record(&header).map_err(io)?;
    for (row, label) in table.rows.iter().zip(&table.labels) {
        let mut rec: Vec<String> = table
            .keys
            .iter()
            .map(|k| row[k.position()].map(|x| x.to_string()).unwrap_or_default())
            .collect();
        rec.push(label.as_str().to_string());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Invalid(format!("writing metric table: {e}")))
}

/// Read a table written by [`write_table_csv`]. Text emptiness handling is
/// not recorded in the file, so `empty_as_missing` comes back `false`.
pub fn read_table_csv<R: Read>(input: R) -> Result<MetricTable> {
    let mut r = csv::Reader::from_reader(input);
    let bad = |line: usize, m: String| Error::parse("<metric table>", line, m);
    let headers = r.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    let n = headers.len();
    if n < 2 || &headers[n - 1] != "label" {
        return Err(bad(1, "last column must be 'label'".into()));
    }
    let keys = headers
        .iter()
        .take(n - 1)
        .map(|h| h.parse::<MetricKey>().map_err(|e| bad(1, e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let width = MetricKey::all().len();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        let mut row = vec![None; width];
        for (c, k) in keys.iter().enumerate() {
            let cell = rec.get(c).unwrap_or_default();
            if !cell.is_empty() {
                row[k.position()] = Some(cell.parse::<f64>().map_err(|_| bad(line, format!("bad score '{cell}'")))?);
            }
        }
        rows.push(row);
        labels.push(rec.get(n - 1).unwrap_or_default().parse().map_err(|e: Error| bad(line, e.to_string()))?);
    }
    Ok(MetricTable {
        keys,
        rows,
        labels,
        empty_as_missing: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{Gazetteer, GeoPoint};
    use crate::image::GrayImage;

    #[test]
    fn equal_frequency_bins() {
        let v: Vec<u64> = (1..=10).collect();
        let b = ConnectionBins::build(&v, 5).unwrap();
        assert_eq!(b.thresholds(), &[2, 4, 6, 8]);
        let classes: Vec<usize> = v.iter().map(|&c| b.class_index(c)).collect();
        assert_eq!(classes, vec![1, 1, 2, 2, 3, 3, 4, 4, 5, 5]);

        let same = ConnectionBins::build(&[7; 12], 5).unwrap();
        assert!(same.thresholds().is_empty());
        assert_eq!(same.class_index(7), 1);

        let skew = ConnectionBins::build(&[1, 1, 1, 1, 1_000_000], 2).unwrap();
        assert_eq!(skew.thresholds(), &[1]);
        assert_eq!(skew.class_index(1), 1);
        assert_eq!(skew.class_index(1_000_000), 2);

        assert!(matches!(ConnectionBins::build(&[1, 2], 5), Err(Error::Capacity(_))));
    }

    #[test]
    fn bin_sizes_differ_by_at_most_one_without_ties() {
        for n in 5..60u64 {
            let v: Vec<u64> = (0..n).collect();
            let b = ConnectionBins::build(&v, 5).unwrap();
            let mut counts = [0usize; 5];
            for &c in &v {
                counts[b.class_index(c) - 1] += 1;
            }
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(hi - lo <= 1, "n={n}: {counts:?}");
        }
    }

    fn stats() -> ServiceStats {
        let mut s = ServiceStats::default();
        s.insert("twitter", vec![0, 50, 100], 2);
        s.insert("linkedin", vec![10, 20], 2);
        s
    }

    #[test]
    fn norm_cases() {
        let s = stats();
        assert_eq!(connections_norm(0, "twitter", 10, "linkedin", &s).unwrap(), 1.0);
        assert_eq!(connections_norm(0, "twitter", 20, "linkedin", &s).unwrap(), 0.0);
        assert_eq!(connections_norm(50, "twitter", 20, "linkedin", &s).unwrap(), 0.5);
        // Out of range clamps.
        assert_eq!(connections_norm(500, "twitter", 20, "linkedin", &s).unwrap(), 1.0);
        let mut flat = ServiceStats::default();
        flat.insert("x", vec![3, 3], 2);
        assert_eq!(flat.normalize("x", 3).unwrap(), 0.5);
        assert!(matches!(s.normalize("myspace", 1), Err(Error::Config(_))));
    }

    #[test]
    fn class_difference() {
        let v: Vec<u64> = (1..=10).collect();
        let b = ConnectionBins::build(&v, 5).unwrap();
        assert_eq!(connections_class(1, 2, &b, &b), 0);
        assert_eq!(connections_class(1, 10, &b, &b), 4);
        assert_eq!(connections_class(3, 7, &b, &b), 2);
    }

    #[test]
    fn config_ids_round_trip() {
        let cfg = MetricConfig::best_reported();
        assert_eq!(cfg.id(), "userid_jw+name_jw+desc_jaccard+loc_geo+img_ls;neutral");
        assert_eq!(cfg.id().parse::<MetricConfig>().unwrap(), cfg);
        let mut p = MetricConfig::names_only().with_missing(MissingPolicy::PropagateMissing);
        p.empty_as_missing = true;
        assert_eq!(p.id().parse::<MetricConfig>().unwrap(), p);
        assert!("userid_geo".parse::<MetricConfig>().is_err());
        assert!("userid_jw+userid_jw".parse::<MetricConfig>().is_err());
        assert!(MetricConfig::new(&[], MissingPolicy::ImputeNeutral).is_err());
    }

    #[test]
    fn enumerate_counts() {
        let all = MetricConfig::enumerate(MissingPolicy::ImputeNeutral);
        assert_eq!(all.len(), 2 * 2 * 4 * 5 * 4 * 3 - 1);
        let ids: std::collections::HashSet<String> = all.iter().map(MetricConfig::id).collect();
        assert_eq!(ids.len(), all.len());
        assert_eq!(MetricKey::all().len(), 14);
    }

    fn full_profile(service: &str) -> Profile {
        Profile {
            service: service.into(),
            userid: "jdoe".into(),
            name: Some("Jane Doe".into()),
            description: Some("Software engineer who loves dogs".into()),
            location: Some("New Delhi, India".into()),
            image_ref: Some("jane.png".into()),
            connections: Some(50),
            language: None,
        }
    }

    struct Resources {
        geo: Geocoder,
        stats: ServiceStats,
        images: ImageStore,
    }

    fn resources() -> Resources {
        let mut gaz = Gazetteer::new();
        gaz.insert("new delhi", GeoPoint::new(28.61, 77.21).unwrap());
        let mut images = ImageStore::new();
        images.insert("jane.png", GrayImage::from_fn(|x, y| (x * y) as u8));
        images.insert("other.png", GrayImage::from_fn(|x, y| (x + 3 * y) as u8));
        let mut stats = ServiceStats::default();
        stats.insert("twitter", (0..100).collect(), 5);
        stats.insert("linkedin", (0..500).collect(), 5);
        Resources {
            geo: Geocoder::offline(gaz),
            stats,
            images,
        }
    }

    fn ctx(r: &Resources) -> FeatureContext<'_> {
        FeatureContext {
            wordnet: None,
            geocoder: Some(&r.geo),
            stats: Some(&r.stats),
            images: Some(&r.images),
            options: MetricOptions::default(),
        }
    }

    #[test]
    fn identical_profiles_score_one_on_every_metric() {
        let r = resources();
        let a = full_profile("twitter");
        let mut b = full_profile("linkedin");
        b.connections = Some(250); // same relative position and class
        for k in MetricKey::all() {
            if k.metric == Metric::Ontology {
                continue;
            }
            let cfg = MetricConfig::new(&[k], MissingPolicy::PropagateMissing).unwrap();
            let pair = ProfilePair::new(a.clone(), b.clone(), Label::Match).unwrap();
            let v = build_similarity_vector(&pair, &cfg, &ctx(&r)).unwrap();
            let s = v.get(k.feature).unwrap();
            assert!((s - 1.0).abs() < 0.01, "{k}: {s}");
        }
    }

    #[test]
    fn missing_policies() {
        let r = resources();
        let a = full_profile("twitter");
        let mut b = full_profile("linkedin");
        b.image_ref = None;
        b.location = None;
        let pair = ProfilePair::new(a, b, Label::Match).unwrap();
        let cfg = MetricConfig::best_reported();
        let v = build_similarity_vector(&pair, &cfg, &ctx(&r)).unwrap();
        assert_eq!(v.get(Feature::Image), Some(0.5));
        let cfg = cfg.with_missing(MissingPolicy::PropagateMissing);
        let v = build_similarity_vector(&pair, &cfg, &ctx(&r)).unwrap();
        assert_eq!(v.get(Feature::Location), None);
        assert_eq!(v.get(Feature::Connections), None);
        assert_eq!(v.config_id, cfg.id());
    }

    #[test]
    fn empty_text_policy() {
        let r = resources();
        let mut a = full_profile("twitter");
        let mut b = full_profile("linkedin");
        a.description = Some(String::new());
        b.description = Some("  ".into());
        let pair = ProfilePair::new(a, b, Label::Match).unwrap();
        let mut cfg: MetricConfig = "desc_jaccard;propagate".parse().unwrap();
        assert_eq!(build_similarity_vector(&pair, &cfg, &ctx(&r)).unwrap().get(Feature::Description), Some(1.0));
        cfg.empty_as_missing = true;
        assert_eq!(build_similarity_vector(&pair, &cfg, &ctx(&r)).unwrap().get(Feature::Description), None);
    }

    #[test]
    fn missing_resource_is_config_error() {
        let pair = ProfilePair::new(full_profile("twitter"), full_profile("linkedin"), Label::Match).unwrap();
        let cfg: MetricConfig = "desc_ontology".parse().unwrap();
        let err = build_similarity_vector(&pair, &cfg, &FeatureContext::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn swapping_the_pair_keeps_the_vector() {
        let r = resources();
        let a = full_profile("twitter");
        let mut b = full_profile("linkedin");
        b.userid = "jane_d".into();
        b.name = Some("Jane M. Doe".into());
        b.description = Some("Engineer and traveller".into());
        b.image_ref = Some("other.png".into());
        b.connections = Some(20);
        let pair = ProfilePair::new(a, b, Label::Match).unwrap();
        for cfg in MetricConfig::enumerate(MissingPolicy::ImputeNeutral).iter().step_by(37) {
            if cfg.metric(Feature::Description) == Some(Metric::Ontology) {
                continue;
            }
            let v1 = build_similarity_vector(&pair, cfg, &ctx(&r)).unwrap();
            let v2 = build_similarity_vector(&pair.swapped(), cfg, &ctx(&r)).unwrap();
            assert_eq!(v1, v2, "{cfg}");
        }
    }

    #[test]
    fn vectors_csv_round_trip() {
        let v = vec![LabeledVector {
            vector: SimilarityVector {
                slots: [Some(0.25), None, Some(1.0), None, Some(0.1), None],
                config_id: "userid_jw+desc_jaccard+img_ls;propagate".into(),
            },
            label: Label::Match,
        }];
        let mut buf = Vec::new();
        write_vectors_csv(&mut buf, &v).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("userid,name,description,location,image,connections,label,config_id\n0.25,,1,,0.1,,match,"));
        assert_eq!(read_vectors_csv(&buf[..]).unwrap(), v);
    }
}
