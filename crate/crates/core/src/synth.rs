//! Synthetic two-service corpora with known ground truth.
//!
//! Each simulated person owns an account on the query service and, with some
//! probability, a linked account on the indexed service. Linked accounts
//! share a noisy copy of the person's name, handle, city, interests and
//! photo, so every field metric sees realistic agreement. Names follow a
//! Zipf law, which makes namesakes common.

use std::collections::{HashMap, HashSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::{Feature, Metric, MetricKey, MetricTable};
use crate::geo::{Gazetteer, GeoPoint};
use crate::image::{GrayImage, ImageStore};
use crate::profile::{synthesize_negatives, Corpus, Label, Profile, ProfileKey, ProfilePair};
use crate::text::normalize;
use crate::Result;

const SYLLABLES: [&str; 40] = [
    "an", "bel", "cor", "da", "el", "fin", "ga", "hal", "is", "jo", "ka", "lem", "mar", "nor", "os", "pel", "qua",
    "ri", "sa", "tor", "ul", "ven", "wil", "xan", "yor", "zel", "bra", "cri", "dro", "fle", "gri", "hon", "lis",
    "mon", "nik", "pra", "ros", "sten", "tam", "vik",
];

const TOPICS: [&str; 95] = [
    "music", "travel", "coffee", "software", "design", "photography", "football", "cooking", "books", "science",
    "startup", "marketing", "finance", "teacher", "student", "engineer", "developer", "writer", "artist", "runner",
    "cyclist", "gamer", "father", "mother", "dog", "cat", "garden", "film", "theatre", "poetry", "history", "politics",
    "economics", "data", "cloud", "security", "mobile", "web", "research", "health", "fitness", "yoga", "nature",
    "ocean", "mountain", "hiking", "climbing", "chess", "jazz", "guitar", "piano", "painting", "fashion", "wine",
    "beer", "tea", "baking", "robotics", "physics", "chemistry", "biology", "medicine", "nurse", "doctor", "lawyer",
    "architect", "manager", "consultant", "sales", "product", "analytics", "education", "volunteer", "church",
    "family", "friends", "humor", "news", "sports", "basketball", "tennis", "golf", "swimming", "sailing", "aviation",
    "cars", "motorcycle", "camping", "fishing", "astronomy", "languages", "linguistics", "philosophy", "psychology",
    "anime",
];

const FILLER: [&str; 12] = [
    "i", "love", "and", "the", "of", "my", "at", "a", "with", "about", "lover", "fan",
];

/// Knobs for [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    /// Accounts on the indexed service; each is one person.
    pub persons: usize,
    /// Fraction of persons with a linked account on the query service.
    pub linked_fraction: f64,
    pub first_names: usize,
    pub last_names: usize,
    /// Zipf exponent for name popularity.
    pub name_skew: f64,
    /// Fraction of linked persons whose handle and display name disagree
    /// across services while the other fields still agree.
    pub hard_positive_rate: f64,
    /// How far linked accounts drift apart in location, photo and
    /// description, from 0 (close copies) to 1.
    pub drift: f64,
    pub regions: usize,
    pub cities_per_region: usize,
    pub indexed_service: String,
    pub query_service: String,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            persons: 1000,
            linked_fraction: 1.0,
            first_names: 100,
            last_names: 100,
            name_skew: 1.0,
            hard_positive_rate: 0.0,
            drift: 0.0,
            regions: 8,
            cities_per_region: 25,
            indexed_service: "twitter".into(),
            query_service: "linkedin".into(),
            seed: 1,
        }
    }
}

/// A generated corpus plus the reference data its metrics need.
#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub corpus: Corpus,
    pub gazetteer: Gazetteer,
    pub images: ImageStore,
    pub params: SynthParams,
}

struct City {
    name: String,
    region: String,
    region_index: usize,
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

/// `count` distinct pronounceable words, none in `taken`.
fn coin_words(rng: &mut ChaCha8Rng, count: usize, syllables: usize, taken: &mut HashSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let w: String = (0..syllables).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn zipf(n: usize, s: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|r| 1.0 / (r as f64).powf(s))).expect("non-empty pool")
}

/// A smooth random picture: a few cosine waves over a random base level.
fn photo(rng: &mut ChaCha8Rng) -> GrayImage {
    let base = rng.gen_range(60.0..190.0);
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(10.0..60.0),
                rng.gen_range(0.05..0.5),
                rng.gen_range(0.05..0.5),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    GrayImage::from_fn(|x, y| {
        let v: f64 = waves
            .iter()
            .map(|&(a, fx, fy, ph)| a * (fx * x as f64 + fy * y as f64 + ph).cos())
            .sum::<f64>()
            + base;
        v.round().clamp(0.0, 255.0) as u8
    })
}

/// Re-encoded copy: a sparse set of pixels is perturbed.
fn noisy_copy(rng: &mut ChaCha8Rng, img: &GrayImage, rate: f64) -> GrayImage {
    let mut bytes = img.as_bytes().to_vec();
    for b in bytes.iter_mut() {
        if rng.gen_bool(rate) {
            let delta: i32 = rng.gen_range(-30..=30);
            *b = (*b as i32 + delta).clamp(0, 255) as u8;
        }
    }
    GrayImage::from_bytes(&bytes).expect("same size")
}

struct Person {
    first: String,
    last: String,
    handle: String,
    city: usize,
    interests: Vec<&'static str>,
    photo_ref: String,
}

fn handle_for(rng: &mut ChaCha8Rng, first: &str, last: &str) -> String {
    let n: u32 = rng.gen_range(1..99);
    match rng.gen_range(0..5) {
        0 => format!("{first}{last}"),
        1 => format!("{first}_{last}"),
        2 => format!("{}{last}{n}", &first[..1]),
        3 => format!("{first}{n}"),
        _ => format!("{last}{}", &first[..2]),
    }
}

/// The same handle as typed on another service.
fn handle_variant(rng: &mut ChaCha8Rng, handle: &str) -> String {
    match rng.gen_range(0..4) {
        0 => handle.to_string(),
        1 => format!("{handle}{}", rng.gen_range(1..10)),
        2 => handle.replace('_', ""),
        _ => format!("{}{}", handle, ["x", "_", "o"].choose(rng).unwrap()),
    }
}

fn description(rng: &mut ChaCha8Rng, interests: &[&str], keep: usize, extra: usize) -> String {
    let mut words: Vec<&str> = interests.choose_multiple(rng, keep.min(interests.len())).copied().collect();
    for _ in 0..extra {
        words.push(TOPICS.choose(rng).unwrap());
    }
    words.shuffle(rng);
    let mut out = Vec::new();
    for w in words {
        if rng.gen_bool(0.3) {
            out.push(*FILLER.choose(rng).unwrap());
        }
        out.push(w);
    }
    let mut s = out.join(" ");
    if let Some(f) = s.get_mut(0..1) {
        f.make_ascii_uppercase();
    }
    s
}

fn location_text(rng: &mut ChaCha8Rng, city: &City) -> String {
    match rng.gen_range(0..3) {
        0 => city.name.clone(),
        1 => format!("{}, {}", city.name, city.region),
        _ => city.name.to_lowercase(),
    }
}

fn maybe<T>(rng: &mut ChaCha8Rng, present: f64, value: impl FnOnce(&mut ChaCha8Rng) -> T) -> Option<T> {
    if rng.gen_bool(present) {
        Some(value(rng))
    } else {
        None
    }
}

/// Build a synthetic world. Fully determined by `params.seed`.
pub fn generate(params: &SynthParams) -> SynthWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut taken = HashSet::new();
    let firsts = coin_words(&mut rng, params.first_names, 2, &mut taken);
    let lasts = coin_words(&mut rng, params.last_names, 3, &mut taken);
    let region_names = coin_words(&mut rng, params.regions, 3, &mut taken);

    let mut gazetteer = Gazetteer::new();
    let mut cities = Vec::new();
    for (ri, region) in region_names.iter().enumerate() {
        let (clat, clon) = (rng.gen_range(-50.0..60.0), rng.gen_range(-170.0..170.0));
        let names = coin_words(&mut rng, params.cities_per_region, 2, &mut taken);
        for name in names {
            let p = GeoPoint::new(
                (clat + rng.gen_range(-4.0..4.0f64)).clamp(-90.0, 90.0),
                (clon + rng.gen_range(-6.0..6.0f64)).clamp(-180.0, 180.0),
            )
            .expect("in range");
            let name = capitalize(&name);
            gazetteer.insert(&name, p);
            cities.push(City {
                name,
                region: capitalize(region),
                region_index: ri,
            });
        }
    }

    let first_dist = zipf(firsts.len(), params.name_skew);
    let last_dist = zipf(lasts.len(), params.name_skew);
    let topic_dist = zipf(TOPICS.len(), 0.6);
    let mut images = ImageStore::new();
    let mut persons = Vec::with_capacity(params.persons);
    for i in 0..params.persons {
        let first = firsts[first_dist.sample(&mut rng)].clone();
        let last = lasts[last_dist.sample(&mut rng)].clone();
        let handle = handle_for(&mut rng, &first, &last);
        let mut interests: Vec<&'static str> = Vec::new();
        while interests.len() < 6 {
            let t = TOPICS[topic_dist.sample(&mut rng)];
            if !interests.contains(&t) {
                interests.push(t);
            }
        }
        let photo_ref = format!("p{i:05}.png");
        images.insert(photo_ref.clone(), photo(&mut rng));
        persons.push(Person {
            first,
            last,
            handle,
            city: rng.gen_range(0..cities.len()),
            interests,
            photo_ref,
        });
    }

    let mut corpus = Corpus::new();
    let mut indexed_ids = HashSet::new();
    let mut query_ids = HashSet::new();
    let unique = |ids: &mut HashSet<String>, base: String| {
        let mut id = base.clone();
        let mut n = 2;
        while !ids.insert(id.clone()) {
            id = format!("{base}{n}");
            n += 1;
        }
        id
    };

    for (i, p) in persons.iter().enumerate() {
        let display = format!("{} {}", capitalize(&p.first), capitalize(&p.last));
        let city = &cities[p.city];
        let userid = unique(&mut indexed_ids, p.handle.clone());
        let indexed = Profile {
            service: params.indexed_service.clone(),
            userid: userid.clone(),
            name: Some(display.clone()),
            description: maybe(&mut rng, 0.8, |r| description(r, &p.interests, 4, 1)),
            location: maybe(&mut rng, 0.75, |r| location_text(r, city)),
            image_ref: maybe(&mut rng, 0.9, |_| p.photo_ref.clone()),
            connections: Some((rng.gen_range(1.0f64..9.0).exp()) as u64),
            language: Some("en".into()),
        };
        corpus.insert(indexed).expect("unique userid");

        if !rng.gen_bool(params.linked_fraction) {
            continue;
        }
        let hard = rng.gen_bool(params.hard_positive_rate);
        let (q_name, q_handle) = if hard {
            // A nickname and an unrelated handle scheme built from it.
            let nick = coin_once(&mut rng);
            let handle = handle_for(&mut rng, &nick, &p.last);
            (format!("{} {}", capitalize(&nick), capitalize(&p.last)), handle)
        } else {
            let name = match rng.gen_range(0..10) {
                0 => format!("{}. {}", capitalize(&p.first[..1]), capitalize(&p.last)),
                1 => format!("{} {} {}", capitalize(&p.first), SYLLABLES.choose(&mut rng).unwrap().to_uppercase().chars().next().unwrap(), capitalize(&p.last)),
                2 => display.to_lowercase(),
                _ => display.clone(),
            };
            (name, handle_variant(&mut rng, &p.handle))
        };
        let drift = params.drift.clamp(0.0, 1.0);
        let moved = rng.gen_bool(0.15 + 0.6 * drift);
        let q_city = if moved && rng.gen_bool(0.5 * drift) {
            rng.gen_range(0..cities.len())
        } else if moved {
            let same_region: Vec<usize> = (0..cities.len())
                .filter(|&c| cities[c].region_index == city.region_index)
                .collect();
            *same_region.choose(&mut rng).unwrap()
        } else {
            p.city
        };
        let q_image = if rng.gen_bool(0.7) {
            let r = format!("q{i:05}.png");
            let copy = {
                let rate = 0.05 + drift * rng.gen_range(0.0..0.9);
                noisy_copy(&mut rng, images.get(&p.photo_ref).unwrap(), rate)
            };
            images.insert(r.clone(), copy);
            Some(r)
        } else if rng.gen_bool(0.5) {
            let r = format!("q{i:05}.png");
            images.insert(r.clone(), photo(&mut rng));
            Some(r)
        } else {
            None
        };
        let query = Profile {
            service: params.query_service.clone(),
            userid: unique(&mut query_ids, q_handle),
            name: Some(q_name),
            description: maybe(&mut rng, 0.85, |r| {
                let keep = 3 - (2.0 * drift * r.gen::<f64>()).round() as usize;
                description(r, &p.interests, keep, 2)
            }),
            location: maybe(&mut rng, 0.95, |r| location_text(r, &cities[q_city])),
            image_ref: q_image,
            connections: Some((rng.gen_range(2.0f64..7.0).exp()) as u64),
            language: Some("en".into()),
        };
        let qkey = query.key();
        corpus.insert(query).expect("unique userid");
        corpus
            .add_link(ProfileKey::new(&params.indexed_service, userid), qkey)
            .expect("valid link");
    }
    SynthWorld {
        corpus,
        gazetteer,
        images,
        params: params.clone(),
    }
}

fn coin_once(rng: &mut ChaCha8Rng) -> String {
    (0..3).map(|_| *SYLLABLES.choose(rng).unwrap()).collect()
}

impl SynthWorld {
    /// Every linked pair plus an equal number of random non-matching pairs,
    /// oriented (query service, indexed service).
    pub fn labeled_pairs(&self, seed: u64) -> Result<Vec<ProfilePair>> {
        self.labeled_pairs_with_namesakes(0.0, seed)
    }

    /// Like [`SynthWorld::labeled_pairs`], but a `namesakes` fraction of the
    /// negatives pairs a query account with a different person who has the
    /// same display name (or, failing that, the same surname).
    pub fn labeled_pairs_with_namesakes(&self, namesakes: f64, seed: u64) -> Result<Vec<ProfilePair>> {
        let q = self.params.query_service.as_str();
        let ix = self.params.indexed_service.as_str();
        let mut pairs = self.corpus.positive_pairs(q);
        let n = pairs.len();
        let n_hard = ((n as f64) * namesakes).round() as usize;

        let mut by_name: HashMap<String, Vec<&Profile>> = HashMap::new();
        let mut by_last: HashMap<String, Vec<&Profile>> = HashMap::new();
        for p in self.corpus.profiles_of(ix) {
            let name = normalize(p.name.as_deref().unwrap_or_default());
            if let Some(last) = name.split(' ').next_back() {
                by_last.entry(last.to_string()).or_default().push(p);
            }
            by_name.entry(name).or_default().push(p);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e61_6d65);
        let mut order: Vec<&ProfilePair> = pairs.iter().collect();
        order.shuffle(&mut rng);
        let mut used: HashSet<(String, String)> = HashSet::new();
        let mut hard = Vec::with_capacity(n_hard);
        for pos in order {
            if hard.len() == n_hard {
                break;
            }
            let name = normalize(pos.b.name.as_deref().unwrap_or_default());
            let last = name.split(' ').next_back().unwrap_or_default().to_string();
            let others = |group: Option<&Vec<&'_ Profile>>| -> Vec<Profile> {
                group
                    .map(|g| g.iter().filter(|c| c.userid != pos.b.userid).map(|c| (*c).clone()).collect())
                    .unwrap_or_default()
            };
            let mut pool = others(by_name.get(&name));
            if pool.is_empty() {
                pool = others(by_last.get(&last));
            }
            if let Some(c) = pool.choose(&mut rng) {
                used.insert((pos.a.userid.clone(), c.userid.clone()));
                hard.push(ProfilePair {
                    a: pos.a.clone(),
                    b: c.clone(),
                    label: Label::NonMatch,
                });
            }
        }
        let mut random = synthesize_negatives(&self.corpus, (q, ix), n - hard.len() + used.len(), seed)?;
        random.retain(|p| !used.contains(&(p.a.userid.clone(), p.b.userid.clone())));
        random.truncate(n - hard.len());
        pairs.extend(hard);
        pairs.extend(random);
        Ok(pairs)
    }
}

/// Per-class shape of one field's latent agreement, drawn as
/// `sigmoid(center + spread * z)` with standard normal `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement {
    pub center: f64,
    pub spread: f64,
}

impl Agreement {
    pub const fn new(center: f64, spread: f64) -> Self {
        Agreement { center, spread }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        sigmoid(self.center + self.spread * standard_normal(rng))
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Score-level generator: draws the fourteen metric columns directly from
/// per-class distributions instead of from profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreParams {
    pub positives: usize,
    pub negatives: usize,
    /// (match, nonmatch) agreement per field in slot order.
    pub fields: [(Agreement, Agreement); 6],
    /// Probability that a pair lacks each field.
    pub missing: [f64; 6],
    /// Probability that a matching pair shares the same photo.
    pub same_photo: f64,
    /// Fraction of matching pairs drawn from the broader `diffuse` shapes,
    /// which reach into the compact non-match cloud. For userid and name the
    /// center is a lift above the non-match center and the deviation is
    /// one-sided; other fields use `diffuse` as given.
    pub overlap: f64,
    pub diffuse: [Agreement; 6],
    pub seed: u64,
}

impl Default for ScoreParams {
    fn default() -> Self {
        ScoreParams {
            positives: 2000,
            negatives: 2000,
            fields: [
                (Agreement::new(2.6, 0.7), Agreement::new(-0.1, 0.25)),
                (Agreement::new(3.0, 0.6), Agreement::new(0.2, 0.25)),
                (Agreement::new(-0.8, 0.8), Agreement::new(-3.8, 0.3)),
                (Agreement::new(2.5, 1.2), Agreement::new(0.0, 1.5)),
                (Agreement::new(2.5, 0.5), Agreement::new(-3.5, 0.4)),
                (Agreement::new(1.1, 1.2), Agreement::new(1.0, 1.2)),
            ],
            missing: [0.0, 0.05, 0.35, 0.3, 0.25, 0.1],
            same_photo: 0.4,
            overlap: 0.0,
            diffuse: [
                Agreement::new(0.2, 1.2),
                Agreement::new(0.2, 1.2),
                Agreement::new(-2.5, 2.5),
                Agreement::new(0.0, 2.0),
                Agreement::new(-1.5, 5.0),
                Agreement::new(1.1, 1.2),
            ],
            seed: 1,
        }
    }
}

fn clip(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Draw a labeled metric table. Metrics of one field are monotone views of
/// the field's latent agreement plus small independent noise.
pub fn score_table(params: &ScoreParams) -> MetricTable {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let keys = MetricKey::all();
    let mut rows = Vec::with_capacity(params.positives + params.negatives);
    let mut labels = Vec::with_capacity(rows.capacity());
    for i in 0..params.positives + params.negatives {
        let is_match = i < params.positives;
        let diffuse = is_match && rng.gen_bool(params.overlap);
        let mut row = vec![None; keys.len()];
        for (slot, feature) in Feature::ALL.into_iter().enumerate() {
            let (m, n) = params.fields[slot];
            let missing = rng.gen_bool(params.missing[slot]);
            let same = feature != Feature::Image || rng.gen_bool(params.same_photo);
            let u = match (is_match && same, diffuse) {
                (true, true) if matches!(feature, Feature::UserId | Feature::Name) => {
                    let d = params.diffuse[slot];
                    sigmoid(n.center + d.center + d.spread * standard_normal(&mut rng).abs())
                }
                (true, true) => params.diffuse[slot].draw(&mut rng),
                (true, false) => m.draw(&mut rng),
                (false, _) => n.draw(&mut rng),
            };
            let mut noise = |scale: f64| scale * standard_normal(&mut rng);
            for &metric in feature.metrics() {
                let v = match metric {
                    Metric::Jw if feature == Feature::Location => clip(0.3 + 0.7 * u * u + noise(0.05)),
                    Metric::Jw => u,
                    Metric::Jaccard if feature == Feature::Location => clip((3.0 * u - 1.5).round() / 2.0 + noise(0.1)),
                    Metric::Jaccard => clip(u.powf(1.1) + noise(0.005)),
                    Metric::Tfidf => clip(u.powf(0.95) + noise(0.005)),
                    Metric::Ontology => clip(0.55 + 0.25 * u + noise(0.08)),
                    Metric::Substr => clip((3.0 * u - 1.2).round() / 2.0 + noise(0.1)),
                    Metric::Geo => u,
                    Metric::Mse => clip(0.85 + 0.15 * u.powf(0.7) + noise(0.02)),
                    Metric::Psnr => clip(0.08 + 0.3 * u + noise(0.01)),
                    Metric::Ls => u,
                    Metric::Norm => clip(u + noise(0.05)),
                    Metric::Class => (clip(u + noise(0.1)) * 4.0).round() / 4.0,
                };
                let key = MetricKey { feature, metric };
                row[key.position()] = (!missing).then_some(v);
            }
        }
        rows.push(row);
        labels.push(if is_match { Label::Match } else { Label::NonMatch });
    }
    MetricTable {
        keys,
        rows,
        labels,
        empty_as_missing: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_seeded() {
        let p = SynthParams {
            persons: 60,
            ..SynthParams::default()
        };
        let a = generate(&p);
        let b = generate(&p);
        assert_eq!(a.corpus.profiles(), b.corpus.profiles());
        assert_eq!(a.corpus.links(), b.corpus.links());
        assert_eq!(a.corpus.links().len(), 60);
        let c = generate(&SynthParams { seed: 2, ..p });
        assert_ne!(a.corpus.profiles(), c.corpus.profiles());
    }

    #[test]
    fn every_image_reference_resolves() {
        let w = generate(&SynthParams {
            persons: 40,
            ..SynthParams::default()
        });
        for p in w.corpus.profiles() {
            if let Some(r) = &p.image_ref {
                assert!(w.images.get(r).is_some(), "{r}");
            }
            if let Some(l) = &p.location {
                assert!(w.gazetteer.lookup(l).is_some(), "{l}");
            }
        }
    }

    #[test]
    fn score_table_shape() {
        let p = ScoreParams {
            positives: 50,
            negatives: 70,
            overlap: 0.5,
            ..ScoreParams::default()
        };
        let t = score_table(&p);
        assert_eq!(t.len(), 120);
        assert_eq!(t.labels.iter().filter(|l| **l == Label::Match).count(), 50);
        assert_eq!(t, score_table(&p));
        for row in &t.rows {
            assert_eq!(row.len(), 14);
            for v in row.iter().flatten() {
                assert!((0.0..=1.0).contains(v));
            }
            // A field is either present for all its metrics or for none.
            for f in Feature::ALL {
                let present: Vec<bool> = f
                    .metrics()
                    .iter()
                    .map(|&metric| row[MetricKey { feature: f, metric }.position()].is_some())
                    .collect();
                assert!(present.iter().all(|&x| x == present[0]));
            }
        }
    }
}
