//! Binary classifiers over similarity vectors.
//!
//! All four kinds share [`train`], [`TrainedModel::predict`] and
//! [`TrainedModel::predict_proba`]. Ties always resolve to
//! [`Label::NonMatch`]. A model remembers the configuration id of its training
//! vectors and rejects vectors produced under any other configuration.
//!
//! # Model file format
//!
//! Plain text, one record per line, fields separated by single spaces.
//! Floats use the shortest decimal form that round-trips exactly.
//!
//! ```text
//! footprint-model 1
//! kind <nb|knn|dt|svm>
//! config <config id>
//! slots <slot index>...
//! trained <n> <seed>
//! <kind-specific block>
//! end
//! ```
//!
//! Kind-specific blocks:
//!
//! * `nb`: `prior <p_nonmatch> <p_match>`, then one
//!   `gauss <mean_nonmatch> <var_nonmatch> <mean_match> <var_match>` line per slot.
//! * `knn`: `k <k>`, `instances <n>`, then `<match|nonmatch> <x>...` per instance.
//! * `dt`: `nodes <n>`, then per node either `leaf <n_nonmatch> <n_match>` or
//!   `split <feature> <threshold> <left> <right>`; node 0 is the root and
//!   `x[feature] <= threshold` goes left.
//! * `svm`: `lambda <l>`, `bias <b>`, `weights <w>...`.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::features::{LabeledVector, MetricConfig, SimilarityVector, NEUTRAL};
use crate::profile::Label;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const VARIANCE_FLOOR: f64 = 1e-9;
const MAX_BACKTRACK: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    NaiveBayes,
    Knn,
    DecisionTree,
    Svm,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::NaiveBayes, Kind::Knn, Kind::DecisionTree, Kind::Svm];

    pub fn tag(self) -> &'static str {
        match self {
            Kind::NaiveBayes => "nb",
            Kind::Knn => "knn",
            Kind::DecisionTree => "dt",
            Kind::Svm => "svm",
        }
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown classifier '{s}' (expected nb, knn, dt or svm)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub knn_k: usize,
    pub dt_min_leaf: usize,
    pub dt_max_depth: Option<usize>,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    /// Initial step; epoch `t` uses `svm_step / sqrt(t + 1)`.
    pub svm_step: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            knn_k: 5,
            dt_min_leaf: 2,
            dt_max_depth: None,
            svm_lambda: 1e-5,
            svm_epochs: 2000,
            svm_step: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Gaussian {
    mean: f64,
    var: f64,
}

impl Gaussian {
    fn fit(values: &[f64]) -> Gaussian {
        if values.is_empty() {
            return Gaussian { mean: NEUTRAL, var: 1.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Gaussian {
            mean,
            var: var.max(VARIANCE_FLOOR),
        }
    }

    fn log_pdf(&self, x: f64) -> f64 {
        -0.5 * (2.0 * std::f64::consts::PI * self.var).ln() - (x - self.mean).powi(2) / (2.0 * self.var)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf { counts: [u32; 2] },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Params {
    NaiveBayes {
        prior: [f64; 2],
        /// Per slot, per class (nonmatch, match).
        gauss: Vec<[Gaussian; 2]>,
    },
    Knn {
        k: usize,
        points: Vec<Vec<f64>>,
        matches: Vec<bool>,
    },
    DecisionTree {
        nodes: Vec<Node>,
    },
    Svm {
        lambda: f64,
        weights: Vec<f64>,
        bias: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    config_id: String,
    slots: Vec<usize>,
    n_train: usize,
    seed: u64,
    params: Params,
}

fn slots_of(config_id: &str) -> Result<Vec<usize>> {
    Ok(config_id.parse::<MetricConfig>()?.included())
}

fn extract(v: &SimilarityVector, slots: &[usize]) -> Vec<Option<f64>> {
    slots.iter().map(|&s| v.slots[s]).collect()
}

fn impute(x: &[Option<f64>]) -> Vec<f64> {
    x.iter().map(|v| v.unwrap_or(NEUTRAL)).collect()
}

/// Prepared training matrix.
struct Data {
    rows: Vec<Vec<Option<f64>>>,
    matches: Vec<bool>,
}

fn prepare(vectors: &[LabeledVector]) -> Result<(String, Vec<usize>, Data)> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::Training("no training vectors".into()))?;
    let config_id = first.vector.config_id.clone();
    if let Some(other) = vectors.iter().find(|v| v.vector.config_id != config_id) {
        return Err(Error::Config(format!(
            "training vectors mix configurations '{config_id}' and '{}'",
            other.vector.config_id
        )));
    }
    let slots = slots_of(&config_id)?;
    let mut data = Data {
        rows: Vec::new(),
        matches: Vec::new(),
    };
    for v in vectors {
        let m = match v.label {
            Label::Match => true,
            Label::NonMatch => false,
            Label::Unlabeled => return Err(Error::Training("unlabeled training vector".into())),
        };
        data.rows.push(extract(&v.vector, &slots));
        data.matches.push(m);
    }
    let pos = data.matches.iter().filter(|&&m| m).count();
    if pos == 0 || pos == data.matches.len() {
        return Err(Error::Training("training data must contain both classes".into()));
    }
    Ok((config_id, slots, data))
}

/// Train a model. Vectors must share one configuration and contain both
/// classes. Every kind is deterministic; `seed` is recorded in the model.
pub fn train(kind: Kind, vectors: &[LabeledVector], hp: &Hyperparams, seed: u64) -> Result<TrainedModel> {
    let (config_id, slots, data) = prepare(vectors)?;
    let params = match kind {
        Kind::NaiveBayes => train_nb(&data, slots.len()),
        Kind::Knn => {
            if hp.knn_k == 0 {
                return Err(Error::Config("k must be positive".into()));
            }
            Params::Knn {
                k: hp.knn_k.min(data.rows.len()),
                points: data.rows.iter().map(|r| impute(r)).collect(),
                matches: data.matches.clone(),
            }
        }
        Kind::DecisionTree => train_dt(&data, hp)?,
        Kind::Svm => train_svm(&data, slots.len(), hp, None),
    };
    Ok(TrainedModel {
        config_id,
        slots,
        n_train: data.rows.len(),
        seed,
        params,
    })
}

fn train_nb(data: &Data, dims: usize) -> Params {
    let n = data.rows.len() as f64;
    let pos = data.matches.iter().filter(|&&m| m).count() as f64;
    let gauss = (0..dims)
        .map(|f| {
            let class_values = |cls: bool| -> Vec<f64> {
                data.rows
                    .iter()
                    .zip(&data.matches)
                    .filter(|(_, &m)| m == cls)
                    .filter_map(|(r, _)| r[f])
                    .collect()
            };
            [Gaussian::fit(&class_values(false)), Gaussian::fit(&class_values(true))]
        })
        .collect();
    Params::NaiveBayes {
        prior: [(n - pos) / n, pos / n],
        gauss,
    }
}

fn gini_impurity(counts: [u32; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = counts[1] as f64 / n;
    2.0 * p * (1.0 - p)
}

fn train_dt(data: &Data, hp: &Hyperparams) -> Result<Params> {
    if hp.dt_min_leaf == 0 {
        return Err(Error::Config("min leaf size must be positive".into()));
    }
    let points: Vec<Vec<f64>> = data.rows.iter().map(|r| impute(r)).collect();
    let mut nodes = Vec::new();
    let all: Vec<usize> = (0..points.len()).collect();
    grow(&points, &data.matches, all, 0, hp, &mut nodes);
    Ok(Params::DecisionTree { nodes })
}

fn grow(points: &[Vec<f64>], y: &[bool], idx: Vec<usize>, depth: usize, hp: &Hyperparams, nodes: &mut Vec<Node>) -> usize {
    let me = nodes.len();
    let mut counts = [0u32; 2];
    for &i in &idx {
        counts[y[i] as usize] += 1;
    }
    nodes.push(Node::Leaf { counts });
    let pure = counts[0] == 0 || counts[1] == 0;
    if pure || hp.dt_max_depth.is_some_and(|d| depth >= d) || idx.len() < 2 * hp.dt_min_leaf {
        return me;
    }
    let Some((feature, threshold)) = best_split(points, y, &idx, hp.dt_min_leaf) else {
        return me;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| points[i][feature] <= threshold);
    let left = grow(points, y, l, depth + 1, hp, nodes);
    let right = grow(points, y, r, depth + 1, hp, nodes);
    nodes[me] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    me
}

/// Lowest weighted Gini over all features and midpoints; the first candidate
/// wins on ties. Zero-gain splits are allowed so impure nodes keep splitting.
fn best_split(points: &[Vec<f64>], y: &[bool], idx: &[usize], min_leaf: usize) -> Option<(usize, f64)> {
    let dims = points.first().map_or(0, Vec::len);
    let n = idx.len();
    let mut total = [0u32; 2];
    for &i in idx {
        total[y[i] as usize] += 1;
    }
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = idx.to_vec();
    for f in 0..dims {
        order.sort_by(|&a, &b| points[a][f].total_cmp(&points[b][f]).then(a.cmp(&b)));
        let mut left = [0u32; 2];
        for j in 1..n {
            left[y[order[j - 1]] as usize] += 1;
            let (lo, hi) = (points[order[j - 1]][f], points[order[j]][f]);
            if lo == hi || j < min_leaf || n - j < min_leaf {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let score = (j as f64 * gini_impurity(left) + (n - j) as f64 * gini_impurity(right)) / n as f64;
            if best.map_or(true, |(s, _, _)| score < s - 1e-15) {
                best = Some((score, f, lo + (hi - lo) / 2.0));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

/// Regularized hinge objective λ‖w‖² + mean(max(0, 1 − y(w·x + b))).
fn svm_objective(points: &[Vec<f64>], ys: &[f64], w: &[f64], b: f64, lambda: f64) -> f64 {
    let reg: f64 = w.iter().map(|v| v * v).sum::<f64>() * lambda;
    let loss: f64 = points
        .iter()
        .zip(ys)
        .map(|(x, y)| (1.0 - y * (dot(w, x) + b)).max(0.0))
        .sum::<f64>()
        / points.len() as f64;
    reg + loss
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Full-batch subgradient descent with a diminishing step. Each epoch halves
/// its step until the objective does not increase, so it never rises.
fn train_svm(data: &Data, dims: usize, hp: &Hyperparams, mut trace: Option<&mut Vec<f64>>) -> Params {
    let points: Vec<Vec<f64>> = data.rows.iter().map(|r| impute(r)).collect();
    let ys: Vec<f64> = data.matches.iter().map(|&m| if m { 1.0 } else { -1.0 }).collect();
    let n = points.len() as f64;
    let lambda = hp.svm_lambda;
    let mut w = vec![0.0; dims];
    let mut b = 0.0;
    let mut obj = svm_objective(&points, &ys, &w, b, lambda);
    if let Some(t) = trace.as_deref_mut() {
        t.push(obj);
    }
    for epoch in 0..hp.svm_epochs {
        let mut gw: Vec<f64> = w.iter().map(|v| 2.0 * lambda * v).collect();
        let mut gb = 0.0;
        for (x, y) in points.iter().zip(&ys) {
            if y * (dot(&w, x) + b) < 1.0 {
                for (g, xi) in gw.iter_mut().zip(x) {
                    *g -= y * xi / n;
                }
                gb -= y / n;
            }
        }
        // Backtrack from the scheduled step until the objective does not rise.
        let mut step = hp.svm_step / ((epoch + 1) as f64).sqrt();
        for _ in 0..MAX_BACKTRACK {
            let cw: Vec<f64> = w.iter().zip(&gw).map(|(v, g)| v - step * g).collect();
            let cb = b - step * gb;
            let cobj = svm_objective(&points, &ys, &cw, cb, lambda);
            if cobj <= obj {
                w = cw;
                b = cb;
                obj = cobj;
                break;
            }
            step *= 0.5;
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(obj);
        }
    }
    Params::Svm { lambda, weights: w, bias: b }
}

/// Objective value before training and after every epoch.
pub fn svm_objective_trace(vectors: &[LabeledVector], hp: &Hyperparams) -> Result<Vec<f64>> {
    let (_, slots, data) = prepare(vectors)?;
    let mut trace = Vec::new();
    train_svm(&data, slots.len(), hp, Some(&mut trace));
    Ok(trace)
}

fn proba_to_label(p: f64) -> Label {
    if p > 0.5 {
        Label::Match
    } else {
        Label::NonMatch
    }
}

impl TrainedModel {
    pub fn kind(&self) -> Kind {
        match self.params {
            Params::NaiveBayes { .. } => Kind::NaiveBayes,
            Params::Knn { .. } => Kind::Knn,
            Params::DecisionTree { .. } => Kind::DecisionTree,
            Params::Svm { .. } => Kind::Svm,
        }
    }

    pub fn config_id(&self) -> &str {
        &self.config_id
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn features(&self, v: &SimilarityVector) -> Result<Vec<Option<f64>>> {
        if v.config_id != self.config_id {
            return Err(Error::Config(format!(
                "model was trained on '{}' but the vector comes from '{}'",
                self.config_id, v.config_id
            )));
        }
        Ok(extract(v, &self.slots))
    }

    /// Naive Bayes class means and variances, per slot as
    /// `[(mean, var) nonmatch, (mean, var) match]`.
    pub fn gaussians(&self) -> Option<Vec<[(f64, f64); 2]>> {
        match &self.params {
            Params::NaiveBayes { gauss, .. } => {
                Some(gauss.iter().map(|g| [(g[0].mean, g[0].var), (g[1].mean, g[1].var)]).collect())
            }
            _ => None,
        }
    }

    /// P(Match | v). Uncalibrated for SVM (logistic of the margin).
    pub fn predict_proba(&self, v: &SimilarityVector) -> Result<f64> {
        let x = self.features(v)?;
        Ok(match &self.params {
            Params::NaiveBayes { prior, gauss } => {
                let mut lp = [prior[0].ln(), prior[1].ln()];
                for (xi, g) in x.iter().zip(gauss) {
                    if let Some(xi) = xi {
                        lp[0] += g[0].log_pdf(*xi);
                        lp[1] += g[1].log_pdf(*xi);
                    }
                }
                let m = lp[0].max(lp[1]);
                let (e0, e1) = ((lp[0] - m).exp(), (lp[1] - m).exp());
                e1 / (e0 + e1)
            }
            Params::Knn { k, points, matches } => {
                let q = impute(&x);
                let mut d: Vec<(f64, usize)> = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
                    .collect();
                let k = *k;
                if k < d.len() {
                    d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    d.truncate(k);
                }
                let votes = d.iter().filter(|(_, i)| matches[*i]).count();
                votes as f64 / k as f64
            }
            Params::DecisionTree { nodes } => {
                let q = impute(&x);
                let mut at = 0;
                loop {
                    match &nodes[at] {
                        Node::Leaf { counts } => break counts[1] as f64 / (counts[0] + counts[1]) as f64,
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => at = if q[*feature] <= *threshold { *left } else { *right },
                    }
                }
            }
            Params::Svm { weights, bias, .. } => {
                let margin = dot(weights, &impute(&x)) + bias;
                1.0 / (1.0 + (-margin).exp())
            }
        })
    }

    pub fn predict(&self, v: &SimilarityVector) -> Result<Label> {
        if let Params::Svm { weights, bias, .. } = &self.params {
            let x = impute(&self.features(v)?);
            let margin = dot(weights, &x) + bias;
            return Ok(if margin > 0.0 { Label::Match } else { Label::NonMatch });
        }
        Ok(proba_to_label(self.predict_proba(v)?))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |xs: &mut dyn Iterator<Item = String>| xs.collect::<Vec<_>>().join(" ");
        writeln!(s, "footprint-model {FORMAT_VERSION}").unwrap();
        writeln!(s, "kind {}", self.kind().tag()).unwrap();
        writeln!(s, "config {}", self.config_id).unwrap();
        writeln!(s, "slots {}", join(&mut self.slots.iter().map(ToString::to_string))).unwrap();
        writeln!(s, "trained {} {}", self.n_train, self.seed).unwrap();
        match &self.params {
            Params::NaiveBayes { prior, gauss } => {
                writeln!(s, "prior {} {}", prior[0], prior[1]).unwrap();
                for g in gauss {
                    writeln!(s, "gauss {} {} {} {}", g[0].mean, g[0].var, g[1].mean, g[1].var).unwrap();
                }
            }
            Params::Knn { k, points, matches } => {
                writeln!(s, "k {k}").unwrap();
                writeln!(s, "instances {}", points.len()).unwrap();
                for (p, m) in points.iter().zip(matches) {
                    let label = if *m { "match" } else { "nonmatch" };
                    let xs = join(&mut p.iter().map(ToString::to_string));
                    writeln!(s, "{label} {xs}").unwrap();
                }
            }
            Params::DecisionTree { nodes } => {
                writeln!(s, "nodes {}", nodes.len()).unwrap();
                for node in nodes {
                    match node {
                        Node::Leaf { counts } => writeln!(s, "leaf {} {}", counts[0], counts[1]).unwrap(),
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => writeln!(s, "split {feature} {threshold} {left} {right}").unwrap(),
                    }
                }
            }
            Params::Svm { lambda, weights, bias } => {
                writeln!(s, "lambda {lambda}").unwrap();
                writeln!(s, "bias {bias}").unwrap();
                writeln!(s, "weights {}", join(&mut weights.iter().map(ToString::to_string))).unwrap();
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Reader {
            lines: text.lines().enumerate(),
        };
        let version: u32 = r.field("footprint-model")?.parse_one()?;
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let kind: Kind = r.field("kind")?.rest.parse().map_err(|_| corrupt("unknown kind"))?;
        let config_id = r.field("config")?.rest.to_string();
        let slots: Vec<usize> = r.field("slots")?.parse_all()?;
        if slots != slots_of(&config_id).map_err(|e| corrupt(&e.to_string()))? {
            return Err(corrupt("slot list does not match the configuration"));
        }
        let trained: Vec<u64> = r.field("trained")?.parse_all()?;
        let [n_train, seed] = trained[..] else {
            return Err(corrupt("trained line needs two numbers"));
        };
        let dims = slots.len();
        let params = match kind {
            Kind::NaiveBayes => {
                let prior: Vec<f64> = r.field("prior")?.parse_all()?;
                let prior: [f64; 2] = prior.try_into().map_err(|_| corrupt("prior needs two values"))?;
                let mut gauss = Vec::new();
                for _ in 0..dims {
                    let g: Vec<f64> = r.field("gauss")?.parse_all()?;
                    let [m0, v0, m1, v1] = g[..] else {
                        return Err(corrupt("gauss needs four values"));
                    };
                    if !(v0 >= VARIANCE_FLOOR && v1 >= VARIANCE_FLOOR) {
                        return Err(corrupt("variance below floor"));
                    }
                    gauss.push([Gaussian { mean: m0, var: v0 }, Gaussian { mean: m1, var: v1 }]);
                }
                Params::NaiveBayes { prior, gauss }
            }
            Kind::Knn => {
                let k: usize = r.field("k")?.parse_one()?;
                let n: usize = r.field("instances")?.parse_one()?;
                let mut points = Vec::with_capacity(n);
                let mut matches = Vec::with_capacity(n);
                for _ in 0..n {
                    let line = r.next()?;
                    let m = match line.key {
                        "match" => true,
                        "nonmatch" => false,
                        _ => return Err(corrupt(&format!("line {}: expected an instance", line.number))),
                    };
                    let p: Vec<f64> = line.parse_all()?;
                    if p.len() != dims {
                        return Err(corrupt(&format!("line {}: wrong instance width", line.number)));
                    }
                    points.push(p);
                    matches.push(m);
                }
                if k == 0 || k > n {
                    return Err(corrupt("k out of range"));
                }
                Params::Knn { k, points, matches }
            }
            Kind::DecisionTree => {
                let n: usize = r.field("nodes")?.parse_one()?;
                let mut nodes = Vec::with_capacity(n);
                for i in 0..n {
                    let line = r.next()?;
                    let node = match line.key {
                        "leaf" => {
                            let c: Vec<u32> = line.parse_all()?;
                            let [a, b] = c[..] else {
                                return Err(corrupt("leaf needs two counts"));
                            };
                            if a + b == 0 {
                                return Err(corrupt("empty leaf"));
                            }
                            Node::Leaf { counts: [a, b] }
                        }
                        "split" => {
                            let parts: Vec<&str> = line.rest.split(' ').collect();
                            let [f, t, l, rr] = parts[..] else {
                                return Err(corrupt("split needs four fields"));
                            };
                            let num = |x: &str| x.parse::<usize>().map_err(|_| corrupt("bad split index"));
                            let (feature, left, right) = (num(f)?, num(l)?, num(rr)?);
                            let threshold: f64 = t.parse().map_err(|_| corrupt("bad threshold"))?;
                            if feature >= dims || left <= i || right <= i || left >= n || right >= n {
                                return Err(corrupt("split points outside the tree"));
                            }
                            Node::Split {
                                feature,
                                threshold,
                                left,
                                right,
                            }
                        }
                        _ => return Err(corrupt(&format!("line {}: expected a node", line.number))),
                    };
                    nodes.push(node);
                }
                if nodes.is_empty() {
                    return Err(corrupt("tree has no nodes"));
                }
                Params::DecisionTree { nodes }
            }
            Kind::Svm => {
                let lambda: f64 = r.field("lambda")?.parse_one()?;
                let bias: f64 = r.field("bias")?.parse_one()?;
                let weights: Vec<f64> = r.field("weights")?.parse_all()?;
                if weights.len() != dims || !weights.iter().chain([&bias]).all(|w| w.is_finite()) {
                    return Err(corrupt("bad weight vector"));
                }
                Params::Svm { lambda, weights, bias }
            }
        };
        r.field("end")?;
        Ok(TrainedModel {
            config_id,
            slots,
            n_train: n_train as usize,
            seed,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn corrupt(msg: &str) -> Error {
    Error::Corrupt(msg.to_string())
}

struct Line<'a> {
    number: usize,
    key: &'a str,
    rest: &'a str,
}

impl Line<'_> {
    fn parse_all<T: FromStr>(&self) -> Result<Vec<T>> {
        if self.rest.is_empty() {
            return Ok(Vec::new());
        }
        self.rest
            .split(' ')
            .map(|x| {
                x.parse()
                    .map_err(|_| corrupt(&format!("line {}: bad value '{x}'", self.number)))
            })
            .collect()
    }

    fn parse_one<T: FromStr>(&self) -> Result<T> {
        self.rest
            .parse()
            .map_err(|_| corrupt(&format!("line {}: bad value '{}'", self.number, self.rest)))
    }
}

struct Reader<'a, I: Iterator<Item = (usize, &'a str)>> {
    lines: I,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Reader<'a, I> {
    fn next(&mut self) -> Result<Line<'a>> {
        let (i, line) = self.lines.next().ok_or_else(|| corrupt("file ends early"))?;
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        Ok(Line {
            number: i + 1,
            key,
            rest,
        })
    }

    fn field(&mut self, key: &str) -> Result<Line<'a>> {
        let line = self.next()?;
        if line.key != key {
            return Err(corrupt(&format!("line {}: expected '{key}', found '{}'", line.number, line.key)));
        }
        Ok(line)
    }
}

/// Predict many vectors in parallel; output order follows input order.
pub fn predict_batch(model: &TrainedModel, vectors: &[SimilarityVector]) -> Result<Vec<Label>> {
    use rayon::prelude::*;
    vectors.par_iter().map(|v| model.predict(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_of(x: &[f64], id: &str) -> SimilarityVector {
        let cfg: MetricConfig = id.parse().unwrap();
        let mut slots = [None; 6];
        for (s, v) in cfg.included().into_iter().zip(x) {
            slots[s] = Some(*v);
        }
        SimilarityVector {
            slots,
            config_id: id.to_string(),
        }
    }

    const ID: &str = "userid_jw+name_jw;neutral";

    fn lv(x: &[f64], label: Label) -> LabeledVector {
        LabeledVector {
            vector: vec_of(x, ID),
            label,
        }
    }

    fn two_point() -> Vec<LabeledVector> {
        vec![lv(&[1.0, 1.0], Label::Match), lv(&[0.0, 0.0], Label::NonMatch)]
    }

    #[test]
    fn every_kind_separates_two_points() {
        let hp = Hyperparams {
            dt_min_leaf: 1,
            knn_k: 1,
            ..Hyperparams::default()
        };
        for kind in Kind::ALL {
            let m = train(kind, &two_point(), &hp, 1).unwrap();
            assert_eq!(m.predict(&vec_of(&[1.0, 1.0], ID)).unwrap(), Label::Match, "{kind:?}");
            assert_eq!(m.predict(&vec_of(&[0.0, 0.0], ID)).unwrap(), Label::NonMatch, "{kind:?}");
        }
        let nb = train(Kind::NaiveBayes, &two_point(), &hp, 1).unwrap();
        assert!(nb.predict_proba(&vec_of(&[1.0, 1.0], ID)).unwrap() > 0.99);
    }

    #[test]
    fn nb_parameters_by_hand() {
        let data = vec![
            lv(&[0.9, 0.8], Label::Match),
            lv(&[0.7, 1.0], Label::Match),
            lv(&[0.1, 0.2], Label::NonMatch),
            lv(&[0.3, 0.0], Label::NonMatch),
        ];
        let m = train(Kind::NaiveBayes, &data, &Hyperparams::default(), 0).unwrap();
        let g = m.gaussians().unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(g[0][1].0, 0.8) && close(g[0][1].1, 0.01));
        assert!(close(g[1][0].0, 0.1) && close(g[1][0].1, 0.01));
        // Equidistant query: equal priors and variances give 0.5, and the tie goes to NonMatch.
        let mid = vec_of(&[0.5, 0.5], ID);
        assert!(close(m.predict_proba(&mid).unwrap(), 0.5));
        assert_eq!(m.predict(&mid).unwrap(), Label::NonMatch);
    }

    #[test]
    fn knn_vote_tie_is_nonmatch() {
        let data = vec![
            lv(&[0.6, 0.6], Label::Match),
            lv(&[0.4, 0.4], Label::NonMatch),
            lv(&[1.0, 1.0], Label::Match),
            lv(&[0.0, 0.0], Label::NonMatch),
        ];
        let hp = Hyperparams {
            knn_k: 2,
            ..Hyperparams::default()
        };
        let m = train(Kind::Knn, &data, &hp, 0).unwrap();
        let q = vec_of(&[0.5, 0.5], ID);
        assert_eq!(m.predict_proba(&q).unwrap(), 0.5);
        assert_eq!(m.predict(&q).unwrap(), Label::NonMatch);
    }

    #[test]
    fn config_guards() {
        let m = train(Kind::NaiveBayes, &two_point(), &Hyperparams::default(), 0).unwrap();
        let other = vec_of(&[1.0], "userid_jw;neutral");
        assert!(matches!(m.predict(&other), Err(Error::Config(_))));
        let mut mixed = two_point();
        mixed.push(LabeledVector {
            vector: other,
            label: Label::Match,
        });
        assert!(matches!(train(Kind::Knn, &mixed, &Hyperparams::default(), 0), Err(Error::Config(_))));
        let single = vec![lv(&[1.0, 1.0], Label::Match)];
        assert!(matches!(train(Kind::Svm, &single, &Hyperparams::default(), 0), Err(Error::Training(_))));
    }

    #[test]
    fn missing_slots_are_skipped_by_nb() {
        let m = train(Kind::NaiveBayes, &two_point(), &Hyperparams::default(), 0).unwrap();
        let mut v = vec_of(&[1.0, 1.0], ID);
        v.slots[1] = None;
        let only_first = m.predict_proba(&v).unwrap();
        assert!(only_first > 0.99);
    }

    #[test]
    fn file_errors() {
        let m = train(Kind::DecisionTree, &two_point(), &Hyperparams { dt_min_leaf: 1, ..Default::default() }, 0).unwrap();
        let text = m.to_text();
        assert_eq!(TrainedModel::from_text(&text).unwrap(), m);
        let truncated = &text[..text.len() - 4];
        assert!(matches!(TrainedModel::from_text(truncated), Err(Error::Corrupt(_))));
        let future = text.replacen("footprint-model 1", "footprint-model 7", 1);
        assert!(matches!(
            TrainedModel::from_text(&future),
            Err(Error::Version { found: 7, supported: 1 })
        ));
    }
}
