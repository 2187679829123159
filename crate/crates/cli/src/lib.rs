//! Command-line driver: loads corpora and resources, runs the pipeline stages
//! and writes their CSV/SVG artifacts.

pub mod config;
mod decode;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use footprint::analysis::{feature_ranking, feature_report};
use footprint::classify::{train, Hyperparams, Kind, TrainedModel};
use footprint::eval::{
    curve_svg, holdout_split, kfold_cv, position_curve, rank_candidates, rank_curve, read_rank_positions,
    subset_search, write_curve_csv, write_eval_csv, write_rank_results_csv, write_subsets_csv, CandidateIndex,
};
use footprint::features::{
    read_table_csv, read_vectors_csv, write_table_csv, write_vectors_csv, FeatureContext, LabeledVector,
    MetricConfig, MetricTable, ServiceStats, CONNECTION_CLASSES,
};
use footprint::geo::{Gazetteer, Geocoder};
use footprint::image::ImageStore;
use footprint::profile::{
    dedup_positive_links, filter_english, load_corpus, read_links, synthesize_negatives, write_links_csv, Corpus,
    Format, ProfilePair,
};
use footprint::wordnet::HypernymGraph;
use rayon::prelude::*;

pub use config::RunConfig;
pub use decode::{FileDecoder, ImageDecoder};

/// An input path that does not exist. Reported with exit code 2.
#[derive(Debug)]
pub struct MissingPath(pub PathBuf);

impl fmt::Display for MissingPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no such file or directory: {}", self.0.display())
    }
}

impl std::error::Error for MissingPath {}

/// Process exit code for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let missing = err.chain().any(|e| {
        e.is::<MissingPath>()
            || e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::NotFound)
            || matches!(
                e.downcast_ref::<footprint::Error>(),
                Some(footprint::Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound
            )
    });
    if missing {
        2
    } else {
        1
    }
}

#[derive(Debug, Parser)]
#[command(name = "footprint", version, about = "Cross-network profile disambiguation")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// key=value file with run settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory for output artifacts.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Extra key=value setting, as in a config file. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub settings: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a corpus and report profile counts and field missingness.
    Ingest(Inputs),
    /// Train one classifier and save the model.
    Train(Inputs),
    /// Cross-validate classifiers and write the accuracy table.
    Evaluate(Inputs),
    /// Score labeled pairs with every metric and rank the metrics.
    Features(Inputs),
    /// Cross-validate every feature/metric combination.
    Subsets(Inputs),
    /// Rank name-matched candidates for each query profile.
    Rank(Inputs),
    /// Plot rank curves from one or more rank result files.
    Curve(CurveArgs),
}

#[derive(Debug, Default, Args)]
pub struct Inputs {
    /// Profile file (.jsonl or .csv).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Known same-user links (service_a,userid_a,service_b,userid_b).
    #[arg(long)]
    pub links: Option<PathBuf>,
    /// Place names with coordinates, tab separated.
    #[arg(long)]
    pub gazetteer: Option<PathBuf>,
    /// Directory holding WordNet index.noun and data.noun.
    #[arg(long)]
    pub wordnet: Option<PathBuf>,
    /// Directory the profiles' image references resolve against.
    #[arg(long)]
    pub image_dir: Option<PathBuf>,
    /// Directory for cached thumbnails and geocoder answers.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Model file to write (train) or read (rank).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Metric table written by `features`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Similarity vectors written by `features`.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Links to use as ranking queries.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Metric configuration, e.g. `userid_jw+name_jw;neutral`.
    #[arg(long)]
    pub metrics: Option<String>,
    /// Classifier: nb, knn, dt, svm or all.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Fraction of positive links held out of training for ranking.
    #[arg(long)]
    pub holdout: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Rank result files, each optionally prefixed `label=`.
    #[arg(required = true)]
    pub series: Vec<String>,
    #[arg(long)]
    pub top_k: Option<usize>,
}

impl Inputs {
    fn settings(&self) -> Vec<(&'static str, String)> {
        let p = |x: &Option<PathBuf>| x.as_ref().map(|p| p.display().to_string());
        let entries = [
            ("corpus", p(&self.corpus)),
            ("links", p(&self.links)),
            ("gazetteer", p(&self.gazetteer)),
            ("wordnet", p(&self.wordnet)),
            ("image_dir", p(&self.image_dir)),
            ("cache_dir", p(&self.cache_dir)),
            ("model", p(&self.model)),
            ("table", p(&self.table)),
            ("vectors", p(&self.vectors)),
            ("queries", p(&self.queries)),
            ("metrics", self.metrics.clone()),
            ("kind", self.kind.clone()),
            ("folds", self.folds.map(|x| x.to_string())),
            ("holdout", self.holdout.map(|x| x.to_string())),
            ("top_k", self.top_k.map(|x| x.to_string())),
        ];
        entries.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect()
    }
}

impl Cli {
    /// Defaults, then the config file, then `--set`, then dedicated flags.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let here = Path::new("");
        for s in &self.settings {
            let (k, v) = s.split_once('=').with_context(|| format!("--set expects key=value, got '{s}'"))?;
            cfg.set(k.trim(), v, here)?;
        }
        let inputs = match &self.command {
            Command::Curve(c) => c.top_k.map(|k| vec![("top_k", k.to_string())]).unwrap_or_default(),
            Command::Ingest(i)
            | Command::Train(i)
            | Command::Evaluate(i)
            | Command::Features(i)
            | Command::Subsets(i)
            | Command::Rank(i) => i.settings(),
        };
        for (k, v) in inputs {
            cfg.set(k, &v, here)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(jobs) = self.jobs {
            cfg.jobs = Some(jobs);
        }
        if let Some(dir) = &self.out_dir {
            cfg.out_dir = dir.clone();
        }
        Ok(cfg)
    }

    fn name(&self) -> &'static str {
        match self.command {
            Command::Ingest(_) => "ingest",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Features(_) => "features",
            Command::Subsets(_) => "subsets",
            Command::Rank(_) => "rank",
            Command::Curve(_) => "curve",
        }
    }
}

/// Run one command and return its one-line summary.
pub fn run(cli: &Cli) -> Result<String> {
    let cfg = cli.run_config()?;
    cfg.require_existing()?;
    if let Command::Curve(c) = &cli.command {
        for s in &c.series {
            let path = Path::new(s.split_once('=').map_or(s.as_str(), |x| x.1));
            if !path.exists() {
                return Err(MissingPath(path.to_path_buf()).into());
            }
        }
    }
    if let Some(j) = cfg.jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        // A pool may already exist when several commands run in one process.
        if rayon::ThreadPoolBuilder::new().num_threads(j).build_global().is_err() {
            log::debug!("thread pool already initialised");
        }
    }
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let name = cli.name();
    let summary = match &cli.command {
        Command::Ingest(_) => cmd_ingest(&cfg)?,
        Command::Train(_) => cmd_train(&cfg)?,
        Command::Evaluate(_) => cmd_evaluate(&cfg)?,
        Command::Features(_) => cmd_features(&cfg)?,
        Command::Subsets(_) => cmd_subsets(&cfg)?,
        Command::Rank(_) => cmd_rank(&cfg)?,
        Command::Curve(c) => cmd_curve(&cfg, &c.series)?,
    };
    write_atomic(&cfg.out_dir.join(format!("{name}.conf")), cfg.to_text().as_bytes())?;
    Ok(format!("{name}: {summary}"))
}

/// Write through a temporary sibling and rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = path.file_name().with_context(|| format!("{} has no file name", path.display()))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file.to_string_lossy()));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))
}

fn write_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> footprint::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_atomic(path, &buf)
}

/// Like [`write_atomic`] for writers that insist on a path of their own.
fn write_via_path(path: &Path, f: impl FnOnce(&Path) -> footprint::Result<()>) -> Result<()> {
    let file = path.file_name().with_context(|| format!("{} has no file name", path.display()))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file.to_string_lossy()));
    f(&tmp)?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))
}

fn need<'a>(v: &'a Option<PathBuf>, key: &str, command: &str) -> Result<&'a Path> {
    v.as_deref().with_context(|| format!("{command} needs --{} (or {key}= in the config)", key.replace('_', "-")))
}

fn read_corpus(cfg: &RunConfig, command: &str) -> Result<Corpus> {
    let path = need(&cfg.corpus, "corpus", command)?;
    let format = match &cfg.format {
        Some(f) => f.parse::<Format>()?,
        None => Format::from_path(path),
    };
    let (mut corpus, report) = load_corpus(path, format, cfg.links.as_deref())?;
    if report.duplicates > 0 {
        log::warn!("skipped {} duplicate profiles", report.duplicates);
    }
    if cfg.english_only {
        corpus = filter_english(&corpus);
    }
    if cfg.dedup_links {
        corpus = dedup_positive_links(&corpus);
    }
    Ok(corpus)
}

/// (query service, indexed service).
fn services(cfg: &RunConfig, corpus: &Corpus) -> Result<(String, String)> {
    let all = corpus.services();
    let (q, ix) = match (&cfg.query_service, &cfg.index_service) {
        (Some(q), Some(ix)) => (q.clone(), ix.clone()),
        (q, ix) if all.len() == 2 => {
            let q = q.clone().or_else(|| ix.as_ref().map(|ix| all.iter().find(|s| *s != ix).unwrap().clone()));
            let q = q.unwrap_or_else(|| all[0].clone());
            let ix = ix.clone().unwrap_or_else(|| all.iter().find(|s| **s != q).unwrap().clone());
            (q, ix)
        }
        _ => bail!(
            "the corpus holds {} services; set query_service and index_service",
            all.len()
        ),
    };
    for s in [&q, &ix] {
        if !all.contains(s) {
            bail!("service '{s}' does not occur in the corpus");
        }
    }
    if q == ix {
        bail!("query and indexed service must differ");
    }
    Ok((q, ix))
}

/// Metric resources named by the run configuration.
struct Resources {
    wordnet: Option<HypernymGraph>,
    geocoder: Option<Geocoder>,
    stats: Option<ServiceStats>,
    images: Option<ImageStore>,
}

impl Resources {
    fn load(cfg: &RunConfig, corpus: Option<&Corpus>) -> Result<Self> {
        let wordnet = cfg.wordnet.as_deref().map(HypernymGraph::parse_dir).transpose()?;
        let geocoder = match &cfg.gazetteer {
            Some(path) => {
                let mut g = Geocoder::offline(Gazetteer::load(path)?);
                if let Some(dir) = &cfg.cache_dir {
                    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                    g = g.with_cache_file(&dir.join("geocode.tsv"))?;
                }
                Some(g)
            }
            None => None,
        };
        let stats = corpus.map(|c| ServiceStats::from_corpus(c, CONNECTION_CLASSES));
        let images = match (&cfg.image_dir, corpus) {
            (Some(dir), Some(c)) => Some(decode::load_images(c, dir, cfg.cache_dir.as_deref(), &FileDecoder)?),
            _ => None,
        };
        Ok(Resources {
            wordnet,
            geocoder,
            stats,
            images,
        })
    }

    fn ctx(&self) -> FeatureContext<'_> {
        FeatureContext {
            wordnet: self.wordnet.as_ref(),
            geocoder: self.geocoder.as_ref(),
            stats: self.stats.as_ref(),
            images: self.images.as_ref(),
            ..FeatureContext::default()
        }
    }
}

fn cmd_ingest(cfg: &RunConfig) -> Result<String> {
    let corpus = read_corpus(cfg, "ingest")?;
    let mut counts = String::from("service,profiles\n");
    for s in corpus.services() {
        counts.push_str(&format!("{s},{}\n", corpus.profiles_of(&s).count()));
    }
    write_atomic(&cfg.out_dir.join("ingest.csv"), counts.as_bytes())?;
    let mut miss = String::from("service,field,missing_percent\n");
    for (service, rows) in corpus.missingness() {
        for (field, pct) in rows {
            miss.push_str(&format!("{service},{field},{pct:.1}\n"));
        }
    }
    write_atomic(&cfg.out_dir.join("missingness.csv"), miss.as_bytes())?;
    Ok(format!(
        "{} profiles across {} services, {} links",
        corpus.len(),
        corpus.services().len(),
        corpus.links().len()
    ))
}

/// Vectors from `vectors=` or projected from `table=`, checked against an
/// explicitly selected configuration.
fn load_vectors(cfg: &RunConfig, command: &str) -> Result<Vec<LabeledVector>> {
    let vectors = if let Some(path) = &cfg.vectors {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let v = read_vectors_csv(bytes.as_slice()).with_context(|| format!("parsing {}", path.display()))?;
        let ids: HashSet<&str> = v.iter().map(|x| x.vector.config_id.as_str()).collect();
        if ids.len() > 1 {
            bail!("{} mixes {} metric configurations", path.display(), ids.len());
        }
        if let (Some(want), Some(have)) = (&cfg.metrics, ids.iter().next()) {
            let want = cfg.metric_config(want.clone()).id();
            if want != *have {
                bail!("vectors were built with '{have}' but the run selects '{want}'");
            }
        }
        v
    } else if let Some(path) = &cfg.table {
        let table = read_table(path)?;
        table.project(&cfg.metric_config(MetricConfig::best_reported()))?
    } else {
        bail!("{command} needs --vectors or --table");
    };
    if vectors.is_empty() {
        bail!("{command}: no labeled vectors");
    }
    Ok(vectors)
}

fn read_table(path: &Path) -> Result<MetricTable> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    read_table_csv(bytes.as_slice()).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_train(cfg: &RunConfig) -> Result<String> {
    let vectors = load_vectors(cfg, "train")?;
    let kind = cfg.kind.unwrap_or(Kind::NaiveBayes);
    let model = train(kind, &vectors, &Hyperparams::default(), cfg.seed)?;
    let path = cfg.model.clone().unwrap_or_else(|| cfg.out_dir.join("model.txt"));
    write_atomic(&path, model.to_text().as_bytes())?;
    Ok(format!(
        "{} trained on {} vectors ({}) -> {}",
        kind.tag(),
        vectors.len(),
        model.config_id(),
        path.display()
    ))
}

fn cmd_evaluate(cfg: &RunConfig) -> Result<String> {
    let vectors = load_vectors(cfg, "evaluate")?;
    let kinds = cfg.kind.map_or(Kind::ALL.to_vec(), |k| vec![k]);
    let hp = Hyperparams::default();
    let reports = kinds
        .iter()
        .map(|&k| kfold_cv(&vectors, k, &hp, cfg.folds, cfg.seed))
        .collect::<footprint::Result<Vec<_>>>()?;
    write_with(&cfg.out_dir.join("evaluation.csv"), |w| write_eval_csv(w, &reports))?;
    let parts: Vec<String> = reports
        .iter()
        .map(|r| format!("{} acc {:.3} P {:.3} R {:.3}", r.kind.tag(), r.accuracy(), r.precision(), r.recall()))
        .collect();
    Ok(format!("{}-fold on {} vectors: {}", cfg.folds, vectors.len(), parts.join("; ")))
}

fn cmd_features(cfg: &RunConfig) -> Result<String> {
    let selected = cfg.metrics.as_ref().map(|m| cfg.metric_config(m.clone()));
    let table = if let Some(path) = &cfg.table {
        read_table(path)?
    } else {
        let corpus = read_corpus(cfg, "features")?;
        let (q, ix) = services(cfg, &corpus)?;
        let res = Resources::load(cfg, Some(&corpus))?;
        let ctx = res.ctx();
        if let Some(sel) = &selected {
            sel.check_resources(&ctx)?;
        }
        let pairs = labeled_pairs(cfg, &corpus, &q, &ix)?;
        let table = MetricTable::compute(&pairs, &ctx, cfg.empty_as_missing)?;
        write_with(&cfg.out_dir.join("metrics.csv"), |w| write_table_csv(w, &table))?;
        table
    };
    let report = feature_report(&table, cfg.relief_samples, cfg.seed)?;
    write_with(&cfg.out_dir.join("feature_report.csv"), |w| report.write_csv(w))?;
    let vector_cfg = selected.unwrap_or_else(|| cfg.metric_config(MetricConfig::best_reported()));
    match table.project(&vector_cfg) {
        Ok(v) => write_with(&cfg.out_dir.join("vectors.csv"), |w| write_vectors_csv(w, &v))?,
        Err(e) if cfg.metrics.is_none() => log::warn!("no vectors written: {e}"),
        Err(e) => return Err(e.into()),
    }
    let top = feature_ranking(&report, "ig");
    Ok(format!(
        "{} pairs, {} metrics; most discriminative by information gain: {}",
        table.len(),
        table.keys.len(),
        top.first().map_or("none", |(f, _)| f.short())
    ))
}

/// Training pairs: the non-held-out positives plus as many random negatives.
/// The held-out links go to `holdout.csv` for later ranking.
fn labeled_pairs(cfg: &RunConfig, corpus: &Corpus, q: &str, ix: &str) -> Result<Vec<ProfilePair>> {
    let positives = corpus.positive_pairs(q);
    if positives.is_empty() {
        bail!("the corpus has no links between {q} and {ix}");
    }
    let (mut pairs, held) = if cfg.holdout > 0.0 {
        holdout_split(&positives, cfg.holdout, cfg.seed)
    } else {
        (positives, Vec::new())
    };
    let held_corpus = corpus.with_links(held.iter().map(|p| (p.a.key(), p.b.key())).collect())?;
    write_via_path(&cfg.out_dir.join("holdout.csv"), |p| write_links_csv(&held_corpus, p))?;
    let negatives = synthesize_negatives(corpus, (q, ix), pairs.len(), cfg.seed)?;
    pairs.extend(negatives);
    Ok(pairs)
}

fn cmd_subsets(cfg: &RunConfig) -> Result<String> {
    let path = need(&cfg.table, "table", "subsets")?;
    let table = read_table(path)?;
    let policy = cfg.metrics.as_ref().map_or(MetricConfig::best_reported().missing, |m| m.missing);
    let computed: HashSet<_> = table.keys.iter().copied().collect();
    let configs: Vec<MetricConfig> = MetricConfig::enumerate(policy)
        .into_iter()
        .filter(|c| c.keys().iter().all(|k| computed.contains(k)))
        .map(|c| cfg.metric_config(c))
        .collect();
    let kind = cfg.kind.unwrap_or(Kind::NaiveBayes);
    let results = subset_search(&table, &configs, kind, &Hyperparams::default(), cfg.folds, cfg.seed)?;
    write_with(&cfg.out_dir.join("subsets.csv"), |w| write_subsets_csv(w, &results))?;
    let best = results.first().context("no configuration could be evaluated")?;
    Ok(format!(
        "{} configurations with {}; best {} (accuracy {:.4})",
        results.len(),
        kind.tag(),
        best.config.id(),
        best.report.accuracy()
    ))
}

fn cmd_rank(cfg: &RunConfig) -> Result<String> {
    let model_path = cfg.model.clone().unwrap_or_else(|| cfg.out_dir.join("model.txt"));
    if !model_path.exists() {
        return Err(MissingPath(model_path).into());
    }
    let model = TrainedModel::load(&model_path)?;
    let metric_cfg: MetricConfig = model
        .config_id()
        .parse()
        .with_context(|| format!("model configuration '{}'", model.config_id()))?;
    let corpus = read_corpus(cfg, "rank")?;
    let (q, ix) = services(cfg, &corpus)?;
    let res = Resources::load(cfg, Some(&corpus))?;
    let ctx = res.ctx();
    metric_cfg.check_resources(&ctx)?;
    let queries = match &cfg.queries {
        Some(path) => {
            let links = read_links(path)?.into_iter().map(|(_, l)| l).collect();
            corpus.with_links(links)?.positive_pairs(&q)
        }
        None => corpus.positive_pairs(&q),
    };
    if queries.is_empty() {
        bail!("no query links");
    }
    let index = CandidateIndex::build(corpus.profiles_of(&ix).cloned()).with_top_k(cfg.top_k);
    let results = queries
        .par_iter()
        .map(|p| rank_candidates(&p.a, Some(&p.b.key()), &index, &model, &metric_cfg, &ctx))
        .collect::<footprint::Result<Vec<_>>>()?;
    write_with(&cfg.out_dir.join("rank.csv"), |w| write_rank_results_csv(w, &results))?;
    let curve = rank_curve(&results, cfg.top_k)?;
    write_with(&cfg.out_dir.join("curve.csv"), |w| write_curve_csv(w, &curve))?;
    let at = |r: usize| curve.get(r - 1).map_or(0.0, |c| c.1);
    Ok(format!(
        "{} queries against {} {} profiles: rank 1 {:.1}%, rank <= 3 {:.1}%",
        results.len(),
        index.len(),
        ix,
        100.0 * at(1),
        100.0 * at(3.min(cfg.top_k))
    ))
}

fn cmd_curve(cfg: &RunConfig, series: &[String]) -> Result<String> {
    let mut curves = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let (label, path) = match s.split_once('=') {
            Some((l, p)) => (l.to_string(), PathBuf::from(p)),
            None => (format!("series{}", i + 1), PathBuf::from(s)),
        };
        if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            bail!("curve label '{label}' must be non-empty ASCII letters, digits, '-', '_' or '.'");
        }
        if curves.iter().any(|(l, _)| *l == label) {
            bail!("curve label '{label}' used twice");
        }
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let positions: Vec<Option<usize>> = read_rank_positions(bytes.as_slice())
            .with_context(|| format!("parsing {}", path.display()))?
            .into_iter()
            .map(|(_, p)| p)
            .collect();
        let curve = position_curve(&positions, cfg.top_k).with_context(|| path.display().to_string())?;
        write_with(&cfg.out_dir.join(format!("curve_{label}.csv")), |w| write_curve_csv(w, &curve))?;
        curves.push((label, curve));
    }
    let plot: Vec<(&str, &[(usize, f64)])> = curves.iter().map(|(l, c)| (l.as_str(), c.as_slice())).collect();
    write_atomic(&cfg.out_dir.join("curve.svg"), curve_svg(&plot).as_bytes())?;
    let parts: Vec<String> = curves
        .iter()
        .map(|(l, c)| format!("{l} rank 1 {:.1}%", 100.0 * c[0].1))
        .collect();
    Ok(format!("{} curves plotted to curve.svg: {}", curves.len(), parts.join(", ")))
}
