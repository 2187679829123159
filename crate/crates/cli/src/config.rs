//! Run configuration: defaults, then a key=value file, then command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use footprint::classify::Kind;
use footprint::eval::DEFAULT_TOP_K;
use footprint::features::MetricConfig;

use crate::MissingPath;

/// Everything a command needs, after merging all sources.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub format: Option<String>,
    pub links: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub wordnet: Option<PathBuf>,
    pub image_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub metrics: Option<MetricConfig>,
    pub kind: Option<Kind>,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub out_dir: PathBuf,
    pub folds: usize,
    pub holdout: f64,
    pub top_k: usize,
    pub relief_samples: Option<usize>,
    pub query_service: Option<String>,
    pub index_service: Option<String>,
    pub english_only: bool,
    pub dedup_links: bool,
    pub empty_as_missing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            format: None,
            links: None,
            gazetteer: None,
            wordnet: None,
            image_dir: None,
            cache_dir: None,
            model: None,
            table: None,
            vectors: None,
            queries: None,
            metrics: None,
            kind: None,
            seed: 1,
            jobs: None,
            out_dir: PathBuf::from("."),
            folds: 10,
            holdout: 0.1,
            top_k: DEFAULT_TOP_K,
            relief_samples: None,
            query_service: None,
            index_service: None,
            english_only: false,
            dedup_links: false,
            empty_as_missing: false,
        }
    }
}

/// Keys accepted in a config file and as `--set key=value`.
pub const KEYS: [&str; 25] = [
    "corpus",
    "format",
    "links",
    "gazetteer",
    "wordnet",
    "image_dir",
    "cache_dir",
    "model",
    "table",
    "vectors",
    "queries",
    "metrics",
    "kind",
    "seed",
    "jobs",
    "out_dir",
    "folds",
    "holdout",
    "top_k",
    "relief_samples",
    "query_service",
    "index_service",
    "english_only",
    "dedup_links",
    "empty_as_missing",
];

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("{key}: expected true or false, got '{v}'"),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| anyhow::anyhow!("{key}: '{v}' is not a valid number"))
}

impl RunConfig {
    /// Apply one `key=value` setting. Relative paths resolve against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let v = value.trim();
        let path = || base.join(v);
        match key {
            "corpus" => self.corpus = Some(path()),
            "format" => self.format = Some(v.to_string()),
            "links" => self.links = Some(path()),
            "gazetteer" => self.gazetteer = Some(path()),
            "wordnet" => self.wordnet = Some(path()),
            "image_dir" => self.image_dir = Some(path()),
            "cache_dir" => self.cache_dir = Some(path()),
            "model" => self.model = Some(path()),
            "table" => self.table = Some(path()),
            "vectors" => self.vectors = Some(path()),
            "queries" => self.queries = Some(path()),
            "metrics" => self.metrics = Some(v.parse().with_context(|| format!("metrics '{v}'"))?),
            "kind" => self.kind = if v == "all" { None } else { Some(v.parse()?) },
            "seed" => self.seed = parse_num(key, v)?,
            "jobs" => self.jobs = Some(parse_num(key, v)?),
            "out_dir" => self.out_dir = path(),
            "folds" => self.folds = parse_num(key, v)?,
            "holdout" => {
                let h: f64 = parse_num(key, v)?;
                if !(0.0..1.0).contains(&h) {
                    bail!("holdout must lie in [0, 1), got {h}");
                }
                self.holdout = h;
            }
            "top_k" => self.top_k = parse_num(key, v)?,
            "relief_samples" => self.relief_samples = Some(parse_num(key, v)?),
            "query_service" => self.query_service = Some(v.to_string()),
            "index_service" => self.index_service = Some(v.to_string()),
            "english_only" => self.english_only = parse_bool(key, v)?,
            "dedup_links" => self.dedup_links = parse_bool(key, v)?,
            "empty_as_missing" => self.empty_as_missing = parse_bool(key, v)?,
            other => bail!("unknown setting '{other}' (known: {})", KEYS.join(", ")),
        }
        Ok(())
    }

    /// Apply a key=value file. Blank lines and `#` comments are skipped;
    /// relative paths resolve against the file's directory.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(MissingPath(path.to_path_buf()).into());
        }
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("{}:{}: expected key=value", path.display(), i + 1))?;
            self.set(k.trim(), v, base)
                .with_context(|| format!("{}:{}", path.display(), i + 1))?;
        }
        Ok(())
    }

    /// Render as a config file that [`RunConfig::apply_file`] reads back from
    /// any directory. Paths are written absolute.
    pub fn to_text(&self) -> String {
        let mut m: BTreeMap<&str, String> = BTreeMap::new();
        let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf()).display().to_string();
        let p = |x: &Option<PathBuf>| x.as_deref().map(abs);
        let entries = [
            ("corpus", p(&self.corpus)),
            ("format", self.format.clone()),
            ("links", p(&self.links)),
            ("gazetteer", p(&self.gazetteer)),
            ("wordnet", p(&self.wordnet)),
            ("image_dir", p(&self.image_dir)),
            ("cache_dir", p(&self.cache_dir)),
            ("model", p(&self.model)),
            ("table", p(&self.table)),
            ("vectors", p(&self.vectors)),
            ("queries", p(&self.queries)),
            ("metrics", self.metrics.as_ref().map(MetricConfig::id)),
            ("kind", Some(self.kind.map_or("all", Kind::tag).to_string())),
            ("seed", Some(self.seed.to_string())),
            ("jobs", self.jobs.map(|j| j.to_string())),
            ("out_dir", Some(abs(&self.out_dir))),
            ("folds", Some(self.folds.to_string())),
            ("holdout", Some(self.holdout.to_string())),
            ("top_k", Some(self.top_k.to_string())),
            ("relief_samples", self.relief_samples.map(|r| r.to_string())),
            ("query_service", self.query_service.clone()),
            ("index_service", self.index_service.clone()),
            ("english_only", Some(self.english_only.to_string())),
            ("dedup_links", Some(self.dedup_links.to_string())),
            ("empty_as_missing", Some(self.empty_as_missing.to_string())),
        ];
        for (k, v) in entries {
            if let Some(v) = v {
                m.insert(k, v);
            }
        }
        m.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Metric configuration to use, `best` when nothing was selected.
    pub fn metric_config(&self, best: MetricConfig) -> MetricConfig {
        let mut cfg = self.metrics.clone().unwrap_or(best);
        if self.empty_as_missing {
            cfg.empty_as_missing = true;
        }
        cfg
    }

    /// Fail with a path error before any work starts if an input is absent.
    pub fn require_existing(&self) -> Result<()> {
        let inputs = [
            &self.corpus,
            &self.links,
            &self.gazetteer,
            &self.wordnet,
            &self.image_dir,
            &self.table,
            &self.vectors,
            &self.queries,
        ];
        for p in inputs.into_iter().flatten() {
            if !p.exists() {
                return Err(MissingPath(p.clone()).into());
            }
        }
        Ok(())
    }
}
