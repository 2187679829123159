//! Location-field similarity and geocoding.
//!
//! Locations are resolved in a fixed order: on-disk cache, offline gazetteer,
//! then an optional remote provider whose answers (including misses) are
//! appended to the cache.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::text::{self, TokenSet, TokenizeOptions};
use crate::{Error, Result};

/// Largest planar distance between two points in degree space.
pub fn max_degree_distance() -> f64 {
    (180.0f64.powi(2) + 360.0f64.powi(2)).sqrt()
}

const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::Invalid(format!("coordinates out of range: ({lat}, {lon})")));
        }
        Ok(GeoPoint { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// Euclidean distance in degree space.
    pub fn degree_distance(&self, other: &GeoPoint) -> f64 {
        ((self.lat - other.lat).powi(2) + (self.lon - other.lon).powi(2)).sqrt()
    }

    /// Great-circle distance in kilometres.
    pub fn haversine_km(&self, other: &GeoPoint) -> f64 {
        let (p1, p2) = (self.lat.to_radians(), other.lat.to_radians());
        let dp = p2 - p1;
        let dl = (other.lon - self.lon).to_radians();
        let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum DistanceMode {
    /// Planar distance over (lat, lon) degrees.
    #[default]
    Degrees,
    /// Great-circle distance, normalized by half the earth's circumference.
    Haversine,
}

/// Lookup key for a location text: lowercase, punctuation-free, single spaced.
pub fn location_key(text: &str) -> String {
    text::normalize(text)
}

fn first_segment_key(text: &str) -> Option<String> {
    let (head, _) = text.split_once(',')?;
    let key = location_key(head);
    (!key.is_empty()).then_some(key)
}

/// Offline name → coordinate table.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: HashMap<String, GeoPoint>,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, point: GeoPoint) {
        self.entries.insert(location_key(name), point);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Read `name<TAB>lat<TAB>lon` lines. Later entries overwrite earlier ones.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut g = Gazetteer::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(path, i + 1, "expected name<TAB>lat<TAB>lon"));
            }
            let point = parse_point(cols[1], cols[2]).map_err(|m| Error::parse(path, i + 1, m))?;
            g.insert(cols[0], point);
        }
        Ok(g)
    }

    /// Write `name<TAB>lat<TAB>lon` lines sorted by name, readable by [`Gazetteer::load`].
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut names: Vec<&String> = self.entries.keys().collect();
        names.sort();
        let mut out = String::new();
        for n in names {
            let p = self.entries[n];
            out.push_str(&format!("{n}\t{}\t{}\n", p.lat, p.lon));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Full key first, then the first comma-separated segment.
    pub fn lookup(&self, text: &str) -> Option<GeoPoint> {
        if let Some(p) = self.entries.get(&location_key(text)) {
            return Some(*p);
        }
        first_segment_key(text).and_then(|k| self.entries.get(&k).copied())
    }
}

fn parse_point(lat: &str, lon: &str) -> std::result::Result<GeoPoint, String> {
    let lat: f64 = lat.trim().parse().map_err(|_| format!("bad latitude '{lat}'"))?;
    let lon: f64 = lon.trim().parse().map_err(|_| format!("bad longitude '{lon}'"))?;
    GeoPoint::new(lat, lon).map_err(|e| e.to_string())
}

/// A remote geocoding service. HTTP details live in implementations.
pub trait RemoteGeocoder: Send + Sync {
    /// `Ok(None)` means the provider answered but found nothing.
    fn resolve(&self, text: &str) -> Result<Option<GeoPoint>>;
}

#[derive(Debug, Default)]
struct Cache {
    entries: HashMap<String, Option<GeoPoint>>,
    file: Option<PathBuf>,
}

impl Cache {
    fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.is_empty() {
                    continue;
                }
                let cols: Vec<&str> = line.split('\t').collect();
                let value = match cols.as_slice() {
                    [_, "MISS"] => None,
                    [_, lat, lon] => {
                        Some(parse_point(lat, lon).map_err(|m| Error::parse(path, i + 1, m))?)
                    }
                    _ => return Err(Error::parse(path, i + 1, "expected query<TAB>lat<TAB>lon or query<TAB>MISS")),
                };
                entries.insert(cols[0].to_string(), value);
            }
        }
        Ok(Cache {
            entries,
            file: Some(path.to_path_buf()),
        })
    }

    fn record(&mut self, key: &str, value: Option<GeoPoint>) -> Result<()> {
        if let Some(path) = &self.file {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            let line = match value {
                Some(p) => format!("{key}\t{}\t{}\n", p.lat, p.lon),
                None => format!("{key}\tMISS\n"),
            };
            f.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
        }
        self.entries.insert(key.to_string(), value);
        Ok(())
    }
}

/// Cache → gazetteer → remote resolver.
pub struct Geocoder {
    gazetteer: Gazetteer,
    cache: Mutex<Cache>,
    remote: Option<Box<dyn RemoteGeocoder>>,
}

impl Geocoder {
    /// Gazetteer only, no cache file, no remote provider.
    pub fn offline(gazetteer: Gazetteer) -> Self {
        Geocoder {
            gazetteer,
            cache: Mutex::new(Cache::default()),
            remote: None,
        }
    }

    /// Attach an append-only cache file, loading whatever it already holds.
    pub fn with_cache_file(mut self, path: &Path) -> Result<Self> {
        self.cache = Mutex::new(Cache::open(path)?);
        Ok(self)
    }

    pub fn with_remote(mut self, remote: Box<dyn RemoteGeocoder>) -> Self {
        self.remote = Some(remote);
        self
    }

    pub fn gazetteer(&self) -> &Gazetteer {
        &self.gazetteer
    }

    /// Resolve a location text. Unresolvable text yields `Ok(None)`; an error is
    /// returned only when the remote provider itself fails.
    pub fn resolve(&self, text: &str) -> Result<Option<GeoPoint>> {
        let key = location_key(text);
        if key.is_empty() {
            return Ok(None);
        }
        if let Some(hit) = self.cache.lock().expect("geocoder cache poisoned").entries.get(&key) {
            return Ok(*hit);
        }
        if let Some(p) = self.gazetteer.lookup(text) {
            return Ok(Some(p));
        }
        let Some(remote) = &self.remote else {
            return Ok(None);
        };
        let answer = remote.resolve(text)?;
        let mut cache = self.cache.lock().expect("geocoder cache poisoned");
        // Another thread may have resolved the same key while we were out.
        if let Some(hit) = cache.entries.get(&key) {
            return Ok(*hit);
        }
        cache.record(&key, answer)?;
        Ok(answer)
    }
}

/// Fraction of location tokens that appear as a substring of the other
/// location, counted in both directions.
pub fn substring_score(a: &str, b: &str) -> f64 {
    let na = location_key(a);
    let nb = location_key(b);
    let ta: Vec<&str> = na.split(' ').filter(|t| !t.is_empty()).collect();
    let tb: Vec<&str> = nb.split(' ').filter(|t| !t.is_empty()).collect();
    match (ta.is_empty(), tb.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let hits = ta.iter().filter(|t| nb.contains(**t)).count() + tb.iter().filter(|t| na.contains(**t)).count();
    hits as f64 / (ta.len() + tb.len()) as f64
}

pub fn location_tokens(text: &str) -> TokenSet {
    text::tokenize(text, TokenizeOptions::PLAIN, None)
}

pub fn location_jaccard(a: &str, b: &str) -> f64 {
    text::jaccard(&location_tokens(a), &location_tokens(b))
}

pub fn location_jw(a: &str, b: &str) -> f64 {
    text::jaro_winkler(&a.trim().to_lowercase(), &b.trim().to_lowercase())
}

/// Distance between two points mapped to a similarity in [0, 1].
pub fn distance_similarity(a: &GeoPoint, b: &GeoPoint, mode: DistanceMode) -> f64 {
    let s = match mode {
        DistanceMode::Degrees => 1.0 - a.degree_distance(b) / max_degree_distance(),
        DistanceMode::Haversine => 1.0 - a.haversine_km(b) / (std::f64::consts::PI * EARTH_RADIUS_KM),
    };
    s.clamp(0.0, 1.0)
}

/// Result of comparing two locations geographically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoComparison {
    pub similarity: f64,
    /// Raw distance in the mode's unit (degrees or km).
    pub distance: f64,
}

/// Resolve both texts and compare them. `Ok(None)` if either is unresolvable.
pub fn geo_distance_score(
    geocoder: &Geocoder,
    a: &str,
    b: &str,
    mode: DistanceMode,
) -> Result<Option<GeoComparison>> {
    let (Some(pa), Some(pb)) = (geocoder.resolve(a)?, geocoder.resolve(b)?) else {
        return Ok(None);
    };
    let distance = match mode {
        DistanceMode::Degrees => pa.degree_distance(&pb),
        DistanceMode::Haversine => pa.haversine_km(&pb),
    };
    Ok(Some(GeoComparison {
        similarity: distance_similarity(&pa, &pb, mode),
        distance,
    }))
}
