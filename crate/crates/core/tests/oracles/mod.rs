//! Slow, obviously-correct reference implementations used to check the
//! library's metrics and discretizer.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

/// Jaro from its matching definition, scanning the shorter string first.
pub fn jaro(s1: &str, s2: &str) -> f64 {
    let mut a: Vec<char> = s1.chars().collect();
    let mut b: Vec<char> = s2.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    if (b.len(), &b) < (a.len(), &a) {
        std::mem::swap(&mut a, &mut b);
    }
    let window = (a.len().max(b.len()) / 2) as isize - 1;
    let mut taken = vec![false; b.len()];
    let mut a_hits = Vec::new();
    let mut b_hits = Vec::new();
    for (i, ca) in a.iter().enumerate() {
        let j = (0..b.len()).find(|&j| !taken[j] && (i as isize - j as isize).abs() <= window.max(0) && b[j] == *ca);
        if let Some(j) = j {
            taken[j] = true;
            a_hits.push(*ca);
            b_hits.push(j);
        }
    }
    let m = a_hits.len() as f64;
    if m == 0.0 {
        return 0.0;
    }
    b_hits.sort_unstable();
    let out_of_order = a_hits.iter().zip(&b_hits).filter(|(x, &j)| **x != b[j]).count();
    let t = (out_of_order / 2) as f64;
    jaro_formula(m, t, a.len() as f64, b.len() as f64)
}

/// (m/|a| + m/|b| + (m − t)/m) / 3.
pub fn jaro_formula(m: f64, t: f64, la: f64, lb: f64) -> f64 {
    (m / la + m / lb + (m - t) / m) / 3.0
}

/// Winkler boost with prefix length `l` (already capped) and scale 0.1.
pub fn winkler(jaro: f64, l: usize) -> f64 {
    jaro + l as f64 * 0.1 * (1.0 - jaro)
}

/// |A ∩ B| / |A ∪ B| by enumerating the union.
pub fn jaccard(a: &[&str], b: &[&str]) -> f64 {
    let sa: BTreeSet<&str> = a.iter().copied().collect();
    let sb: BTreeSet<&str> = b.iter().copied().collect();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let union: BTreeSet<&str> = sa.union(&sb).copied().collect();
    let inter = union.iter().filter(|t| sa.contains(*t) && sb.contains(*t)).count();
    inter as f64 / union.len() as f64
}

/// Full-matrix edit distance with symbols within `tolerance` treated as equal.
pub fn levenshtein(a: &[u8], b: &[u8], tolerance: u8) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1].abs_diff(b[j - 1]) > tolerance);
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

/// Noun hypernym graph read straight from a `data.noun` file.
pub struct ToyOntology {
    pub parents: BTreeMap<u64, Vec<u64>>,
    pub lemmas: BTreeMap<u64, Vec<String>>,
}

impl ToyOntology {
    pub fn read(data_noun: &str) -> Self {
        let mut parents = BTreeMap::new();
        let mut lemmas = BTreeMap::new();
        for line in data_noun.lines().filter(|l| !l.starts_with("  ")) {
            let body = line.split(" | ").next().unwrap();
            let f: Vec<&str> = body.split_whitespace().collect();
            let offset: u64 = f[0].parse().unwrap();
            let words = usize::from_str_radix(f[3], 16).unwrap();
            lemmas.insert(offset, (0..words).map(|k| f[4 + 2 * k].to_string()).collect());
            let ptr_at = 4 + 2 * words + 1;
            let ups = f[ptr_at..]
                .chunks(4)
                .filter(|p| p[0] == "@")
                .map(|p| p[1].parse().unwrap())
                .collect();
            parents.insert(offset, ups);
        }
        ToyOntology { parents, lemmas }
    }

    /// Longest chain of hypernym edges up to a top synset, found by a
    /// breadth-first walk over every path.
    fn longest_path(&self, s: u64) -> usize {
        let mut best = 0;
        let mut queue = VecDeque::from([(s, 0usize)]);
        while let Some((n, len)) = queue.pop_front() {
            let ups = &self.parents[&n];
            if ups.is_empty() {
                best = best.max(len);
            }
            for &p in ups {
                queue.push_back((p, len + 1));
            }
        }
        best
    }

    /// Depth counting a virtual root above every top synset as depth 1.
    pub fn depth(&self, s: Option<u64>) -> usize {
        match s {
            None => 1,
            Some(s) => 2 + self.longest_path(s),
        }
    }

    fn ancestors(&self, s: u64) -> BTreeSet<u64> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([s]);
        while let Some(n) = queue.pop_front() {
            if seen.insert(n) {
                queue.extend(self.parents[&n].iter().copied());
            }
        }
        seen
    }

    pub fn wu_palmer(&self, a: u64, b: u64) -> f64 {
        let up_b = self.ancestors(b);
        let lcs_depth = self
            .ancestors(a)
            .into_iter()
            .filter(|n| up_b.contains(n))
            .map(|n| self.depth(Some(n)))
            .max()
            .unwrap_or(self.depth(None));
        2.0 * lcs_depth as f64 / (self.depth(Some(a)) + self.depth(Some(b))) as f64
    }
}

/// Recursive entropy-minimizing discretization with the MDL stopping rule,
/// trying every midpoint between distinct adjacent values.
pub fn exhaustive_cuts(rows: &[(f64, bool)]) -> Vec<f64> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut cuts = Vec::new();
    recurse(&sorted, &mut cuts);
    cuts.sort_by(f64::total_cmp);
    cuts
}

fn ent(rows: &[(f64, bool)]) -> f64 {
    let n = rows.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let pos = rows.iter().filter(|r| r.1).count() as f64;
    [pos, n - pos]
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| -(c / n) * (c / n).log2())
        .sum()
}

fn class_count(rows: &[(f64, bool)]) -> f64 {
    let pos = rows.iter().filter(|r| r.1).count();
    (usize::from(pos > 0) + usize::from(pos < rows.len())) as f64
}

fn recurse(rows: &[(f64, bool)], cuts: &mut Vec<f64>) {
    let n = rows.len() as f64;
    let mut best: Option<(f64, usize)> = None;
    for i in 1..rows.len() {
        if rows[i - 1].0 == rows[i].0 {
            continue;
        }
        let e = (i as f64 * ent(&rows[..i]) + (n - i as f64) * ent(&rows[i..])) / n;
        if best.map_or(true, |(be, _)| e < be) {
            best = Some((e, i));
        }
    }
    let Some((class_info, i)) = best else { return };
    let (l, r) = rows.split_at(i);
    let (e, e1, e2) = (ent(rows), ent(l), ent(r));
    let (k, k1, k2) = (class_count(rows), class_count(l), class_count(r));
    let delta = (3f64.powf(k) - 2.0).log2() - (k * e - k1 * e1 - k2 * e2);
    if e - class_info <= ((n - 1.0).log2() + delta) / n {
        return;
    }
    cuts.push((rows[i - 1].0 + rows[i].0) / 2.0);
    recurse(l, cuts);
    recurse(r, cuts);
}

/// Per-bin class counts for `cuts` (a value goes right of every cut below it).
pub fn bin_counts(rows: &[(f64, bool)], cuts: &[f64]) -> Vec<[u64; 2]> {
    let mut out = vec![[0u64; 2]; cuts.len() + 1];
    for &(v, m) in rows {
        let b = cuts.iter().filter(|&&c| v > c).count();
        out[b][usize::from(m)] += 1;
    }
    out
}

/// Two-class Relief by direct search for each instance's nearest hit and
/// miss (first index wins ties), without missing values.
pub fn relief(rows: &[Vec<f64>], matches: &[bool]) -> Vec<f64> {
    let dims = rows[0].len();
    let n = rows.len();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    let mut w = vec![0.0; dims];
    for i in 0..n {
        let nearest = |same: bool| {
            (0..n)
                .filter(|&j| j != i && (matches[j] == matches[i]) == same)
                .map(|j| (dist(&rows[i], &rows[j]), j))
                .fold(None, |acc: Option<(f64, usize)>, c| match acc {
                    Some(a) if a.0 <= c.0 => Some(a),
                    _ => Some(c),
                })
                .unwrap()
                .1
        };
        let (h, m) = (nearest(true), nearest(false));
        for f in 0..dims {
            w[f] += ((rows[i][f] - rows[m][f]).abs() - (rows[i][f] - rows[h][f]).abs()) / n as f64;
        }
    }
    w
}

/// Rank positions from scores under the "probability desc, then id asc" rule.
pub fn positions(scored: &[(String, f64)]) -> HashMap<String, usize> {
    let mut v = scored.to_vec();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().enumerate().map(|(i, (k, _))| (k, i + 1)).collect()
}
