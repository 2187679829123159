//! Profiles, corpora, link files and negative-pair synthesis.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::text::jaro_winkler;
use crate::{Error, Result};

/// (service, userid), unique within a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProfileKey {
    pub service: String,
    pub userid: String,
}

impl ProfileKey {
    pub fn new(service: impl Into<String>, userid: impl Into<String>) -> Self {
        ProfileKey {
            service: service.into(),
            userid: userid.into(),
        }
    }
}

impl fmt::Display for ProfileKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.service, self.userid)
    }
}

/// One account on one service. `None` marks a missing field; an empty string
/// is a present-but-empty field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub service: String,
    pub userid: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connections: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

impl Profile {
    pub fn new(service: impl Into<String>, userid: impl Into<String>) -> Self {
        Profile {
            service: service.into(),
            userid: userid.into(),
            ..Default::default()
        }
    }

    pub fn key(&self) -> ProfileKey {
        ProfileKey::new(&self.service, &self.userid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Match,
    NonMatch,
    Unlabeled,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Match => "match",
            Label::NonMatch => "nonmatch",
            Label::Unlabeled => "",
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "match" | "1" => Ok(Label::Match),
            "nonmatch" | "non_match" | "0" => Ok(Label::NonMatch),
            "" => Ok(Label::Unlabeled),
            other => Err(Error::Invalid(format!("unknown label '{other}'"))),
        }
    }
}

/// A cross-network profile pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePair {
    pub a: Profile,
    pub b: Profile,
    pub label: Label,
}

impl ProfilePair {
    pub fn new(a: Profile, b: Profile, label: Label) -> Result<Self> {
        if a.service == b.service {
            return Err(Error::Invalid(format!(
                "pair {} / {} is not cross-network",
                a.key(),
                b.key()
            )));
        }
        Ok(ProfilePair { a, b, label })
    }

    pub fn swapped(&self) -> Self {
        ProfilePair {
            a: self.b.clone(),
            b: self.a.clone(),
            label: self.label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!("unknown corpus format '{other}'"))),
        }
    }
}

impl Format {
    /// Guess from a file extension; defaults to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

pub type Link = (ProfileKey, ProfileKey);

/// Profiles keyed by (service, userid) plus known same-user links.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    profiles: Vec<Profile>,
    index: HashMap<ProfileKey, usize>,
    links: Vec<Link>,
}

/// Non-fatal observations made while loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub duplicates: usize,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a profile. Returns `false` (and keeps the existing one) on a duplicate key.
    pub fn insert(&mut self, profile: Profile) -> Result<bool> {
        if profile.service.is_empty() || profile.userid.is_empty() {
            return Err(Error::Invalid("profile service and userid must be non-empty".into()));
        }
        let key = profile.key();
        if self.index.contains_key(&key) {
            return Ok(false);
        }
        self.index.insert(key, self.profiles.len());
        self.profiles.push(profile);
        Ok(true)
    }

    pub fn add_link(&mut self, a: ProfileKey, b: ProfileKey) -> Result<()> {
        for k in [&a, &b] {
            if !self.index.contains_key(k) {
                return Err(Error::Reference(format!("link endpoint {k} is not in the corpus")));
            }
        }
        if a.service == b.service {
            return Err(Error::Reference(format!("link {a} - {b} joins two profiles of one service")));
        }
        self.links.push((a, b));
        Ok(())
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn get(&self, key: &ProfileKey) -> Option<&Profile> {
        self.index.get(key).map(|&i| &self.profiles[i])
    }

    /// Service names in sorted order.
    pub fn services(&self) -> Vec<String> {
        let mut s: Vec<String> = self.profiles.iter().map(|p| p.service.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn profiles_of<'a>(&'a self, service: &'a str) -> impl Iterator<Item = &'a Profile> + 'a {
        self.profiles.iter().filter(move |p| p.service == service)
    }

    /// Positive links as labeled pairs, oriented so `a` belongs to `service_a`.
    pub fn positive_pairs(&self, service_a: &str) -> Vec<ProfilePair> {
        self.links
            .iter()
            .map(|(x, y)| {
                let (pa, pb) = (self.get(x).unwrap().clone(), self.get(y).unwrap().clone());
                let (a, b) = if pa.service == service_a { (pa, pb) } else { (pb, pa) };
                ProfilePair {
                    a,
                    b,
                    label: Label::Match,
                }
            })
            .collect()
    }

    /// Replace the link list, validating every entry.
    pub fn with_links(&self, links: Vec<Link>) -> Result<Corpus> {
        let mut c = Corpus {
            profiles: self.profiles.clone(),
            index: self.index.clone(),
            links: Vec::new(),
        };
        for (a, b) in links {
            c.add_link(a, b)?;
        }
        Ok(c)
    }

    /// Percentage of profiles missing each optional field, per service and
    /// over the whole corpus (service `"all"`).
    pub fn missingness(&self) -> BTreeMap<String, Vec<(&'static str, f64)>> {
        let mut groups: BTreeMap<String, Vec<&Profile>> = BTreeMap::new();
        for p in &self.profiles {
            groups.entry(p.service.clone()).or_default().push(p);
            groups.entry("all".to_string()).or_default().push(p);
        }
        groups
            .into_iter()
            .map(|(service, ps)| {
                let n = ps.len() as f64;
                let pct = |f: &dyn Fn(&Profile) -> bool| 100.0 * ps.iter().filter(|p| f(p)).count() as f64 / n;
                let rows = vec![
                    ("name", pct(&|p| p.name.is_none())),
                    ("description", pct(&|p| p.description.is_none())),
                    ("location", pct(&|p| p.location.is_none())),
                    ("image", pct(&|p| p.image_ref.is_none())),
                    ("connections", pct(&|p| p.connections.is_none())),
                ];
                (service, rows)
            })
            .collect()
    }
}

/// Load a profile file and, optionally, a links CSV.
pub fn load_corpus(profiles: &Path, format: Format, links: Option<&Path>) -> Result<(Corpus, LoadReport)> {
    let records = match format {
        Format::Jsonl => read_jsonl(profiles)?,
        Format::Csv => read_profile_csv(profiles)?,
    };
    let mut corpus = Corpus::new();
    let mut report = LoadReport::default();
    for (line, p) in records {
        if p.service.is_empty() || p.userid.is_empty() {
            return Err(Error::parse(profiles, line, "service and userid must be non-empty"));
        }
        if !corpus.insert(p)? {
            report.duplicates += 1;
        }
    }
    if report.duplicates > 0 {
        log::warn!(
            "{}: {} duplicate (service, userid) records ignored",
            profiles.display(),
            report.duplicates
        );
    }
    if let Some(path) = links {
        for (line, (a, b)) in read_links(path)? {
            corpus.add_link(a, b).map_err(|e| match e {
                Error::Reference(m) => Error::Reference(format!("{}:{line}: {m}", path.display())),
                other => other,
            })?;
        }
    }
    Ok((corpus, report))
}

fn read_jsonl(path: &Path) -> Result<Vec<(usize, Profile)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Profile = serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        out.push((i + 1, p));
    }
    Ok(out)
}

const PROFILE_COLUMNS: [&str; 8] = [
    "service",
    "userid",
    "name",
    "description",
    "location",
    "image_ref",
    "connections",
    "language",
];

fn read_profile_csv(path: &Path) -> Result<Vec<(usize, Profile)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(si), Some(ui)) = (col("service"), col("userid")) else {
        return Err(Error::parse(path, 1, "header must contain service and userid"));
    };
    let optional: Vec<Option<usize>> = PROFILE_COLUMNS[2..].iter().map(|c| col(c)).collect();

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let cell = |idx: Option<usize>| -> Option<String> {
            idx.and_then(|k| rec.get(k)).filter(|v| !v.is_empty()).map(str::to_string)
        };
        let connections = match cell(optional[4]) {
            Some(v) => Some(
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::parse(path, line, format!("bad connections value '{v}'")))?,
            ),
            None => None,
        };
        out.push((
            line,
            Profile {
                service: rec.get(si).unwrap_or_default().to_string(),
                userid: rec.get(ui).unwrap_or_default().to_string(),
                name: cell(optional[0]),
                description: cell(optional[1]),
                location: cell(optional[2]),
                image_ref: cell(optional[3]),
                connections,
                language: cell(optional[5]),
            },
        ));
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

/// Read `service_a,userid_a,service_b,userid_b` rows with their line numbers.
pub fn read_links(path: &Path) -> Result<Vec<(usize, Link)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = ["service_a", "userid_a", "service_b", "userid_b"];
    if headers.iter().map(str::trim).ne(expected) {
        return Err(Error::parse(path, 1, format!("links header must be {}", expected.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let f = |k| rec.get(k).unwrap_or_default().to_string();
        out.push((i + 2, (ProfileKey::new(f(0), f(1)), ProfileKey::new(f(2), f(3)))));
    }
    Ok(out)
}

pub fn write_profiles_jsonl(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in corpus.profiles() {
        let line = serde_json::to_string(p).expect("profile serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_links_csv(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["service_a", "userid_a", "service_b", "userid_b"])
        .map_err(|e| csv_error(path, e))?;
    for (a, b) in corpus.links() {
        w.write_record([&a.service, &a.userid, &b.service, &b.userid])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Drop profiles that declare a language other than English, and any link
/// touching them. Profiles without a language tag are kept.
pub fn filter_english(corpus: &Corpus) -> Corpus {
    let mut out = Corpus::new();
    for p in corpus.profiles() {
        let keep = match p.language.as_deref() {
            None => true,
            Some(l) => l.trim().eq_ignore_ascii_case("en"),
        };
        if keep {
            out.insert(p.clone()).expect("profiles were already validated");
        }
    }
    for (a, b) in corpus.links() {
        if out.get(a).is_some() && out.get(b).is_some() {
            out.links.push((a.clone(), b.clone()));
        }
    }
    out
}

/// Keep one link per group of linked accounts: the pair whose userids are
/// most similar by Jaro-Winkler.
///
/// Links sharing an endpoint form a group (one real user), so a group with
/// several accounts on one service collapses to its best cross pair.
pub fn dedup_positive_links(corpus: &Corpus) -> Corpus {
    let mut parent: HashMap<&ProfileKey, &ProfileKey> = HashMap::new();
    fn find<'a>(parent: &mut HashMap<&'a ProfileKey, &'a ProfileKey>, k: &'a ProfileKey) -> &'a ProfileKey {
        let mut root = k;
        while let Some(&p) = parent.get(root) {
            if p == root {
                break;
            }
            root = p;
        }
        parent.insert(k, root);
        root
    }
    for (a, b) in corpus.links() {
        parent.entry(a).or_insert(a);
        parent.entry(b).or_insert(b);
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent.insert(hi, lo);
        }
    }
    let mut best: BTreeMap<ProfileKey, (f64, &Link)> = BTreeMap::new();
    for link in corpus.links() {
        let root = find(&mut parent, &link.0).clone();
        let score = jaro_winkler(&link.0.userid, &link.1.userid);
        match best.get(&root) {
            Some((s, l)) if *s > score || (*s == score && *l <= link) => {}
            _ => {
                best.insert(root, (score, link));
            }
        }
    }
    let keep: HashSet<&Link> = best.values().map(|(_, l)| *l).collect();
    let mut out = corpus.clone();
    out.links.retain(|l| keep.contains(l));
    out
}

/// Randomly pair accounts of `services.0` with accounts of `services.1`,
/// avoiding known positive links. Sampling is without replacement and fully
/// determined by `seed`.
pub fn synthesize_negatives(
    corpus: &Corpus,
    services: (&str, &str),
    count: usize,
    seed: u64,
) -> Result<Vec<ProfilePair>> {
    if services.0 == services.1 {
        return Err(Error::Invalid("negative pairs need two distinct services".into()));
    }
    let side_a: Vec<&Profile> = corpus.profiles_of(services.0).collect();
    let side_b: Vec<&Profile> = corpus.profiles_of(services.1).collect();
    let pos_a: HashMap<&str, usize> = side_a.iter().enumerate().map(|(i, p)| (p.userid.as_str(), i)).collect();
    let pos_b: HashMap<&str, usize> = side_b.iter().enumerate().map(|(i, p)| (p.userid.as_str(), i)).collect();

    let mut positives: HashSet<(usize, usize)> = HashSet::new();
    for (x, y) in corpus.links() {
        let (ka, kb) = if x.service == services.0 { (x, y) } else { (y, x) };
        if ka.service != services.0 || kb.service != services.1 {
            continue;
        }
        if let (Some(&i), Some(&j)) = (pos_a.get(ka.userid.as_str()), pos_b.get(kb.userid.as_str())) {
            positives.insert((i, j));
        }
    }

    let total = side_a.len() * side_b.len();
    let available = total - positives.len();
    if count > available {
        return Err(Error::Capacity(format!(
            "requested {count} negative pairs but only {available} non-matching pairs exist"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: Vec<(usize, usize)> = if count == 0 {
        Vec::new()
    } else if count * 2 >= available {
        let mut all: Vec<(usize, usize)> = (0..side_a.len())
            .flat_map(|i| (0..side_b.len()).map(move |j| (i, j)))
            .filter(|ij| !positives.contains(ij))
            .collect();
        all.shuffle(&mut rng);
        all.truncate(count);
        all
    } else {
        let mut seen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let ij = (rng.gen_range(0..side_a.len()), rng.gen_range(0..side_b.len()));
            if !positives.contains(&ij) && seen.insert(ij) {
                out.push(ij);
            }
        }
        out
    };

    Ok(chosen
        .into_iter()
        .map(|(i, j)| ProfilePair {
            a: side_a[i].clone(),
            b: side_b[j].clone(),
            label: Label::NonMatch,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Corpus {
        let mut c = Corpus::new();
        for (s, u) in [("twitter", "t1"), ("twitter", "t2"), ("linkedin", "l1"), ("linkedin", "l2")] {
            c.insert(Profile::new(s, u)).unwrap();
        }
        c.add_link(ProfileKey::new("twitter", "t1"), ProfileKey::new("linkedin", "l1")).unwrap();
        c.add_link(ProfileKey::new("twitter", "t2"), ProfileKey::new("linkedin", "l2")).unwrap();
        c
    }

    #[test]
    fn exhaustive_complement() {
        let c = small();
        let neg = synthesize_negatives(&c, ("twitter", "linkedin"), 2, 1).unwrap();
        let mut keys: Vec<(String, String)> = neg.iter().map(|p| (p.a.userid.clone(), p.b.userid.clone())).collect();
        keys.sort();
        assert_eq!(keys, vec![("t1".into(), "l2".into()), ("t2".into(), "l1".into())]);
        assert!(neg.iter().all(|p| p.label == Label::NonMatch));
        assert!(synthesize_negatives(&c, ("twitter", "linkedin"), 0, 1).unwrap().is_empty());
        assert!(matches!(
            synthesize_negatives(&c, ("twitter", "linkedin"), 3, 1),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn links_must_resolve() {
        let mut c = small();
        assert!(matches!(
            c.add_link(ProfileKey::new("twitter", "nope"), ProfileKey::new("linkedin", "l1")),
            Err(Error::Reference(_))
        ));
        assert!(matches!(
            c.add_link(ProfileKey::new("twitter", "t1"), ProfileKey::new("twitter", "t2")),
            Err(Error::Reference(_))
        ));
    }

    #[test]
    fn filter_english_drops_links() {
        let mut c = Corpus::new();
        let mut pt = Profile::new("twitter", "t1");
        pt.language = Some("pt".into());
        c.insert(pt).unwrap();
        let mut en = Profile::new("twitter", "t2");
        en.language = Some("en".into());
        c.insert(en).unwrap();
        c.insert(Profile::new("linkedin", "l1")).unwrap();
        c.add_link(ProfileKey::new("twitter", "t1"), ProfileKey::new("linkedin", "l1")).unwrap();
        let f = filter_english(&c);
        assert_eq!(f.len(), 2);
        assert!(f.links().is_empty());
        assert_eq!(filter_english(&f), f);

        let untagged = small();
        assert_eq!(filter_english(&untagged), untagged);
    }

    #[test]
    fn dedup_keeps_most_similar_userids() {
        let mut c = Corpus::new();
        for (s, u) in [("twitter", "jsmith"), ("twitter", "spam_bot"), ("linkedin", "jsmith1"), ("twitter", "ann"), ("linkedin", "ann_l")] {
            c.insert(Profile::new(s, u)).unwrap();
        }
        c.add_link(ProfileKey::new("twitter", "spam_bot"), ProfileKey::new("linkedin", "jsmith1")).unwrap();
        c.add_link(ProfileKey::new("twitter", "jsmith"), ProfileKey::new("linkedin", "jsmith1")).unwrap();
        c.add_link(ProfileKey::new("twitter", "ann"), ProfileKey::new("linkedin", "ann_l")).unwrap();
        let d = dedup_positive_links(&c);
        assert_eq!(d.links().len(), 2);
        assert!(d.links().contains(&(ProfileKey::new("twitter", "jsmith"), ProfileKey::new("linkedin", "jsmith1"))));
    }

    #[test]
    fn missingness_counts() {
        let mut c = Corpus::new();
        let mut a = Profile::new("twitter", "a");
        a.location = Some("Paris".into());
        c.insert(a).unwrap();
        c.insert(Profile::new("twitter", "b")).unwrap();
        let m = c.missingness();
        let loc = m["twitter"].iter().find(|(f, _)| *f == "location").unwrap().1;
        assert_eq!(loc, 50.0);
    }

    #[test]
    fn label_parsing() {
        assert_eq!("Match".parse::<Label>().unwrap(), Label::Match);
        assert_eq!("nonmatch".parse::<Label>().unwrap(), Label::NonMatch);
        assert!("maybe".parse::<Label>().is_err());
    }
}
