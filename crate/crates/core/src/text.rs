//! Short-string and free-text similarity.
//!
//! Jaro and Jaro-Winkler operate on Unicode scalar values. The token-based
//! metrics work on [`TokenSet`]s produced by [`tokenize`]: punctuation acts as
//! a separator, everything is lowercased, and stop-word removal and
//! lemmatization are opt-in.
//!
//! Every metric here follows one convention for empty inputs: two empty
//! inputs score 1.0, exactly one empty input scores 0.0.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::OnceLock;

/// Winkler prefix scaling factor.
pub const WINKLER_SCALE: f64 = 0.1;
/// Maximum common-prefix length rewarded by Jaro-Winkler.
pub const WINKLER_PREFIX_CAP: usize = 4;

const STOPWORDS_RAW: &str = include_str!("../resources/stopwords.txt");

/// Bundled English stop-word list.
pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_RAW
            .lines()
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .collect()
    })
}

/// Jaro similarity. Case-sensitive; see [`jaro_winkler`] for the folded variant.
pub fn jaro(s1: &str, s2: &str) -> f64 {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    jaro_chars(&a, &b)
}

fn jaro_chars(a: &[char], b: &[char]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    // Greedy matching is order dependent; fix a canonical scan order so that
    // jaro(a, b) == jaro(b, a) exactly.
    let (a, b) = if (a.len(), a) <= (b.len(), b) { (a, b) } else { (b, a) };

    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut a_matched = vec![false; a.len()];
    let mut b_matched = vec![false; b.len()];
    let mut matches = 0usize;

    for (i, &ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_matched[j] && b[j] == ca {
                a_matched[i] = true;
                b_matched[j] = true;
                matches += 1;
                break;
            }
        }
    }
    if matches == 0 {
        return 0.0;
    }

    let mut half_transpositions = 0usize;
    let mut b_iter = b.iter().zip(&b_matched).filter(|(_, &m)| m).map(|(c, _)| c);
    for (ca, _) in a.iter().zip(&a_matched).filter(|(_, &m)| m) {
        if let Some(cb) = b_iter.next() {
            if ca != cb {
                half_transpositions += 1;
            }
        }
    }

    let m = matches as f64;
    let t = (half_transpositions / 2) as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

/// Jaro-Winkler similarity over case-folded inputs, prefix scale 0.1 capped
/// at four characters.
pub fn jaro_winkler(s1: &str, s2: &str) -> f64 {
    let a: Vec<char> = s1.chars().flat_map(char::to_lowercase).collect();
    let b: Vec<char> = s2.chars().flat_map(char::to_lowercase).collect();
    let sim = jaro_chars(&a, &b);
    let prefix = a
        .iter()
        .zip(&b)
        .take(WINKLER_PREFIX_CAP)
        .take_while(|(x, y)| x == y)
        .count();
    (sim + prefix as f64 * WINKLER_SCALE * (1.0 - sim)).min(1.0)
}

/// A set of normalized word tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSet {
    tokens: BTreeSet<String>,
    source_length: usize,
}

impl TokenSet {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut source_length = 0;
        let tokens = tokens
            .into_iter()
            .map(|t| {
                source_length += 1;
                t.into()
            })
            .collect();
        TokenSet {
            tokens,
            source_length,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    /// Tokens in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Number of raw tokens seen before stop-word filtering and deduplication.
    pub fn source_length(&self) -> usize {
        self.source_length
    }
}

/// Something that can confirm a word is a known dictionary lemma.
pub trait Lexicon {
    fn has_lemma(&self, word: &str) -> bool;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TokenizeOptions {
    pub lemmatize: bool,
    pub drop_stopwords: bool,
}

impl TokenizeOptions {
    /// Options used for profile descriptions: stop words dropped, lemmatized.
    pub const DESCRIPTION: TokenizeOptions = TokenizeOptions {
        lemmatize: true,
        drop_stopwords: true,
    };
    /// Plain lowercase word split.
    pub const PLAIN: TokenizeOptions = TokenizeOptions {
        lemmatize: false,
        drop_stopwords: false,
    };
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

/// Lowercased text with punctuation replaced by single spaces.
pub fn normalize(text: &str) -> String {
    words(text).collect::<Vec<_>>().join(" ")
}

pub fn tokenize(text: &str, opts: TokenizeOptions, lexicon: Option<&dyn Lexicon>) -> TokenSet {
    let stop = stopwords();
    let mut source_length = 0;
    let mut tokens = BTreeSet::new();
    for w in words(text) {
        source_length += 1;
        if opts.drop_stopwords && stop.contains(w.as_str()) {
            continue;
        }
        let w = if opts.lemmatize { lemmatize(&w, lexicon) } else { w };
        if opts.drop_stopwords && stop.contains(w.as_str()) {
            continue;
        }
        tokens.insert(w);
    }
    TokenSet {
        tokens,
        source_length,
    }
}

// Inflectional suffix rules, (suffix, replacement), tried in order.
const SUFFIX_RULES: &[(&str, &str)] = &[
    ("ies", "y"),
    ("sses", "ss"),
    ("ches", "ch"),
    ("shes", "sh"),
    ("xes", "x"),
    ("zes", "z"),
    ("men", "man"),
    ("ses", "s"),
    ("es", "e"),
    ("es", ""),
    ("s", ""),
    ("ing", "e"),
    ("ing", ""),
    ("ed", "e"),
    ("ed", ""),
];

const MIN_STEM: usize = 3;

fn undouble(stem: &str) -> Option<String> {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 2 && b[n - 1] == b[n - 2] && !b"aeioulsz".contains(&b[n - 1]) && b[n - 1].is_ascii_alphabetic() {
        Some(stem[..n - 1].to_string())
    } else {
        None
    }
}

/// Reduce an inflected lowercase word to its base form.
///
/// With a lexicon, the word itself wins if it is a known lemma, otherwise the
/// first rule-derived candidate the lexicon knows. Without one (or when no
/// candidate is known) a fixed rule cascade is applied.
pub fn lemmatize(word: &str, lexicon: Option<&dyn Lexicon>) -> String {
    if let Some(lex) = lexicon {
        if lex.has_lemma(word) {
            return word.to_string();
        }
        for (suffix, repl) in SUFFIX_RULES {
            if let Some(stem) = word.strip_suffix(suffix) {
                if stem.len() + repl.len() < MIN_STEM {
                    continue;
                }
                let cand = format!("{stem}{repl}");
                if lex.has_lemma(&cand) {
                    return cand;
                }
                if let Some(u) = undouble(stem) {
                    if lex.has_lemma(&u) {
                        return u;
                    }
                }
            }
        }
    }
    rule_lemma(word)
}

fn rule_lemma(word: &str) -> String {
    if word.len() <= MIN_STEM || !word.is_ascii() {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        if stem.len() >= 2 {
            return format!("{stem}y");
        }
    }
    if word.ends_with("sses") {
        return word[..word.len() - 2].to_string();
    }
    for s in ["ches", "shes", "xes", "zes"] {
        if word.ends_with(s) {
            return word[..word.len() - 2].to_string();
        }
    }
    if word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix('s') {
        return stem.to_string();
    }
    for suffix in ["ing", "ed"] {
        if let Some(stem) = word.strip_suffix(suffix) {
            if stem.len() >= MIN_STEM && stem.bytes().any(|c| b"aeiouy".contains(&c)) {
                return undouble(stem).unwrap_or_else(|| stem.to_string());
            }
        }
    }
    word.to_string()
}

/// |a ∩ b| / |a ∪ b|.
pub fn jaccard(a: &TokenSet, b: &TokenSet) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let inter = a.tokens.intersection(&b.tokens).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Smoothed inverse document frequency, ln(1 + N/df).
pub fn smoothed_idf(n_docs: usize, doc_freq: usize) -> f64 {
    (1.0 + n_docs as f64 / doc_freq as f64).ln()
}

/// Cosine similarity of TF-IDF vectors, treating the two token sets as the
/// whole document collection.
///
/// Term frequency is binary (token sets carry no counts) and IDF is
/// [`smoothed_idf`] with N = 2, so shared tokens weigh ln 2 and unshared ln 3.
pub fn tfidf_cosine(a: &TokenSet, b: &TokenSet) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut df: HashMap<&str, usize> = HashMap::new();
    for t in a.iter().chain(b.iter()) {
        *df.entry(t).or_default() += 1;
    }
    let weight = |t: &str| smoothed_idf(2, df[t]);
    let dot: f64 = a.iter().filter(|t| b.contains(t)).map(|t| weight(t).powi(2)).sum();
    let na: f64 = a.iter().map(|t| weight(t).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|t| weight(t).powi(2)).sum::<f64>().sqrt();
    if dot == 0.0 || na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}
