//! WordNet noun hypernym graph and Wu-Palmer similarity.
//!
//! Reads the `index.noun` / `data.noun` files of a WordNet 3.x database.
//! Only hypernym pointers (`@` and `@i`) are kept. Synsets without a
//! hypernym hang off a virtual root, so the graph always has a single top.
//!
//! Depth counts nodes along the *longest* hypernym path from the virtual root,
//! root included: the root has depth 1, a top-level synset such as `entity`
//! depth 2. Taking the longest path keeps every proper ancestor strictly
//! shallower than its descendants when a synset has several hypernyms.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::text::{Lexicon, TokenSet};
use crate::{Error, Result};

/// Offset reserved for the virtual root. Real offsets are eight decimal digits.
pub const ROOT_OFFSET: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synset {
    pub offset: u64,
    pub lemmas: Vec<String>,
    pub hypernyms: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct HypernymGraph {
    // Index 0 is the virtual root.
    synsets: Vec<Synset>,
    by_offset: HashMap<u64, usize>,
    parents: Vec<Vec<usize>>,
    depth: Vec<u32>,
    word_index: HashMap<String, Vec<u64>>,
}

/// How token-level Wu-Palmer scores are folded into one description score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Aggregation {
    /// Mean over the smaller set of each token's best match in the other set.
    #[default]
    MeanOfMax,
    /// Best single token match.
    MaxOfMax,
}

impl HypernymGraph {
    /// Build a graph from synsets and a lemma index.
    ///
    /// Index entries list offsets in sense order; the first is treated as the
    /// word's primary sense.
    pub fn from_parts(synsets: Vec<Synset>, word_index: HashMap<String, Vec<u64>>) -> Result<Self> {
        let mut all = Vec::with_capacity(synsets.len() + 1);
        all.push(Synset {
            offset: ROOT_OFFSET,
            lemmas: Vec::new(),
            hypernyms: Vec::new(),
        });
        all.extend(synsets);

        let mut by_offset = HashMap::with_capacity(all.len());
        for (i, s) in all.iter().enumerate() {
            if i > 0 && s.offset == ROOT_OFFSET {
                return Err(Error::Invalid("synset uses the reserved root offset".into()));
            }
            if by_offset.insert(s.offset, i).is_some() {
                return Err(Error::Invalid(format!("duplicate synset offset {:08}", s.offset)));
            }
        }

        let mut parents = vec![Vec::new(); all.len()];
        for (i, s) in all.iter().enumerate().skip(1) {
            if s.hypernyms.is_empty() {
                parents[i].push(0);
            }
            for h in &s.hypernyms {
                let p = *by_offset.get(h).ok_or_else(|| {
                    Error::Reference(format!("synset {:08} points to missing hypernym {:08}", s.offset, h))
                })?;
                if !parents[i].contains(&p) {
                    parents[i].push(p);
                }
            }
        }

        for (word, offsets) in &word_index {
            for o in offsets {
                if !by_offset.contains_key(o) {
                    return Err(Error::Reference(format!("index entry '{word}' points to missing synset {o:08}")));
                }
            }
        }

        let depth = longest_depths(&parents)?;
        Ok(HypernymGraph {
            synsets: all,
            by_offset,
            parents,
            depth,
            word_index,
        })
    }

    /// Parse WordNet `index.noun` and `data.noun` files.
    pub fn parse(index_path: &Path, data_path: &Path) -> Result<Self> {
        let data = fs::read_to_string(data_path).map_err(|e| Error::io(data_path, e))?;
        let index = fs::read_to_string(index_path).map_err(|e| Error::io(index_path, e))?;
        if data.trim().is_empty() {
            return Err(Error::parse(data_path, 1, "empty data file (expected license header and synsets)"));
        }
        let synsets = parse_data(&data, data_path)?;
        let word_index = parse_index(&index, index_path)?;
        Self::from_parts(synsets, word_index)
    }

    /// Parse `index.noun` and `data.noun` from a WordNet `dict/` directory.
    pub fn parse_dir(dir: &Path) -> Result<Self> {
        Self::parse(&dir.join("index.noun"), &dir.join("data.noun"))
    }

    /// Number of real synsets (the virtual root is not counted).
    pub fn len(&self) -> usize {
        self.synsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn synset(&self, offset: u64) -> Option<&Synset> {
        self.by_offset.get(&offset).map(|&i| &self.synsets[i])
    }

    /// Real synsets in file order.
    pub fn synsets(&self) -> impl Iterator<Item = &Synset> {
        self.synsets.iter().skip(1)
    }

    pub fn word_index(&self) -> &HashMap<String, Vec<u64>> {
        &self.word_index
    }

    /// Senses of a word, most frequent first.
    pub fn senses(&self, word: &str) -> &[u64] {
        self.word_index.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    /// First listed noun sense of a word. Multi-word tokens may use spaces or
    /// underscores.
    pub fn first_sense(&self, word: &str) -> Option<u64> {
        let key = word.to_lowercase().replace(' ', "_");
        self.senses(&key).first().copied()
    }

    pub fn depth(&self, offset: u64) -> Result<u32> {
        Ok(self.depth[self.node(offset)?])
    }

    fn node(&self, offset: u64) -> Result<usize> {
        self.by_offset
            .get(&offset)
            .copied()
            .ok_or_else(|| Error::Reference(format!("synset {offset:08} not in graph")))
    }

    fn ancestors(&self, start: usize) -> HashSet<usize> {
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            if seen.insert(n) {
                queue.extend(self.parents[n].iter().copied());
            }
        }
        seen
    }

    /// Deepest common hypernym of two synsets (possibly one of them, possibly
    /// the virtual root).
    pub fn lowest_common_subsumer(&self, a: u64, b: u64) -> Result<u64> {
        let (ia, ib) = (self.node(a)?, self.node(b)?);
        let up_a = self.ancestors(ia);
        let best = self
            .ancestors(ib)
            .into_iter()
            .filter(|n| up_a.contains(n))
            .max_by_key(|&n| (self.depth[n], std::cmp::Reverse(n)))
            .unwrap_or(0);
        Ok(self.synsets[best].offset)
    }

    /// 2·depth(LCS) / (depth(a) + depth(b)).
    pub fn wu_palmer(&self, a: u64, b: u64) -> Result<f64> {
        let lcs = self.lowest_common_subsumer(a, b)?;
        let (da, db, dl) = (self.depth(a)?, self.depth(b)?, self.depth(lcs)?);
        Ok(2.0 * dl as f64 / (da + db) as f64)
    }

    /// Similarity of two description token sets over the noun hierarchy.
    ///
    /// Each token maps to its first noun sense. Tokens without a sense only
    /// match an identical token. The smaller set drives the aggregation; for
    /// equal sizes the lexicographically smaller set does, which keeps the
    /// score symmetric.
    pub fn description_score(&self, a: &TokenSet, b: &TokenSet, agg: Aggregation) -> f64 {
        match (a.is_empty(), b.is_empty()) {
            (true, true) => return 1.0,
            (true, false) | (false, true) => return 0.0,
            _ => {}
        }
        let key = |s: &TokenSet| (s.len(), s.iter().map(str::to_owned).collect::<Vec<_>>());
        let (small, large) = if key(a) <= key(b) { (a, b) } else { (b, a) };

        let senses = |s: &TokenSet| -> Vec<(String, Option<u64>)> {
            s.iter().map(|t| (t.to_string(), self.first_sense(t))).collect()
        };
        let small = senses(small);
        let large = senses(large);

        let best: Vec<f64> = small
            .iter()
            .map(|(tok, sense)| {
                large
                    .iter()
                    .map(|(other, other_sense)| match (sense, other_sense) {
                        (Some(x), Some(y)) => self.wu_palmer(*x, *y).unwrap_or(0.0),
                        _ => {
                            if tok == other {
                                1.0
                            } else {
                                0.0
                            }
                        }
                    })
                    .fold(0.0, f64::max)
            })
            .collect();

        match agg {
            Aggregation::MeanOfMax => best.iter().sum::<f64>() / best.len() as f64,
            Aggregation::MaxOfMax => best.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Write the graph back out in WordNet file format.
    ///
    /// The dump is normalized: glosses, lexicographer ids and non-hypernym
    /// pointers are dropped, and index lines are sorted by lemma.
    pub fn write_files(&self, index_path: &Path, data_path: &Path) -> Result<()> {
        let mut data = String::from("  1 normalized noun hypernym dump\n");
        let mut ordered: Vec<&Synset> = self.synsets().collect();
        ordered.sort_by_key(|s| s.offset);
        for s in ordered {
            write!(data, "{:08} 00 n {:02x}", s.offset, s.lemmas.len()).unwrap();
            for l in &s.lemmas {
                write!(data, " {l} 0").unwrap();
            }
            write!(data, " {:03}", s.hypernyms.len()).unwrap();
            for h in &s.hypernyms {
                write!(data, " @ {h:08} n 0000").unwrap();
            }
            data.push_str(" | \n");
        }

        let mut index = String::from("  1 normalized noun hypernym dump\n");
        let sorted: BTreeMap<_, _> = self.word_index.iter().collect();
        for (lemma, offs) in sorted {
            write!(index, "{lemma} n {} 0 {} 0", offs.len(), offs.len()).unwrap();
            for o in offs {
                write!(index, " {o:08}").unwrap();
            }
            index.push_str(" \n");
        }
        fs::write(data_path, data).map_err(|e| Error::io(data_path, e))?;
        fs::write(index_path, index).map_err(|e| Error::io(index_path, e))?;
        Ok(())
    }
}

impl Lexicon for HypernymGraph {
    fn has_lemma(&self, word: &str) -> bool {
        self.word_index.contains_key(word)
    }
}

fn longest_depths(parents: &[Vec<usize>]) -> Result<Vec<u32>> {
    // Iterative DFS with colouring: 0 = unvisited, 1 = on stack, 2 = done.
    let n = parents.len();
    let mut depth = vec![0u32; n];
    let mut state = vec![0u8; n];
    depth[0] = 1;
    state[0] = 2;
    for start in 1..n {
        if state[start] == 2 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        state[start] = 1;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&p) = parents[node].get(*next) {
                *next += 1;
                match state[p] {
                    0 => {
                        state[p] = 1;
                        stack.push((p, 0));
                    }
                    1 => return Err(Error::Invalid("hypernym relation contains a cycle".into())),
                    _ => {}
                }
            } else {
                depth[node] = 1 + parents[node].iter().map(|&p| depth[p]).max().unwrap_or(0);
                state[node] = 2;
                stack.pop();
            }
        }
    }
    Ok(depth)
}

fn is_header(line: &str) -> bool {
    line.starts_with("  ")
}

struct Fields<'a> {
    iter: std::str::SplitWhitespace<'a>,
    path: &'a Path,
    line: usize,
}

impl<'a> Fields<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.iter
            .next()
            .ok_or_else(|| Error::parse(self.path, self.line, format!("missing {what}")))
    }

    fn number(&mut self, what: &str, radix: u32) -> Result<u64> {
        let tok = self.next(what)?;
        u64::from_str_radix(tok, radix)
            .map_err(|_| Error::parse(self.path, self.line, format!("bad {what} '{tok}'")))
    }
}

fn parse_data(text: &str, path: &Path) -> Result<Vec<Synset>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if is_header(line) || line.trim().is_empty() {
            continue;
        }
        let body = line.split(" | ").next().unwrap_or(line);
        let body = body.strip_suffix(" |").unwrap_or(body);
        let mut f = Fields {
            iter: body.split_whitespace(),
            path,
            line: i + 1,
        };
        let offset = f.number("synset offset", 10)?;
        f.number("lexicographer file number", 10)?;
        let ss_type = f.next("synset type")?;
        if ss_type != "n" {
            return Err(Error::parse(path, i + 1, format!("expected noun synset, found type '{ss_type}'")));
        }
        let w_cnt = f.number("word count", 16)?;
        let mut lemmas = Vec::with_capacity(w_cnt as usize);
        for _ in 0..w_cnt {
            lemmas.push(f.next("word")?.to_string());
            f.number("lex id", 16)?;
        }
        let p_cnt = f.number("pointer count", 10)?;
        let mut hypernyms = Vec::new();
        for _ in 0..p_cnt {
            let symbol = f.next("pointer symbol")?;
            let target = f.number("pointer offset", 10)?;
            let pos = f.next("pointer part of speech")?;
            f.number("pointer source/target", 16)?;
            if (symbol == "@" || symbol == "@i") && pos == "n" && !hypernyms.contains(&target) {
                hypernyms.push(target);
            }
        }
        out.push(Synset {
            offset,
            lemmas,
            hypernyms,
        });
    }
    Ok(out)
}

fn parse_index(text: &str, path: &Path) -> Result<HashMap<String, Vec<u64>>> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if is_header(line) || line.trim().is_empty() {
            continue;
        }
        let mut f = Fields {
            iter: line.split_whitespace(),
            path,
            line: i + 1,
        };
        let lemma = f.next("lemma")?.to_lowercase();
        let pos = f.next("part of speech")?;
        if pos != "n" {
            return Err(Error::parse(path, i + 1, format!("expected noun entry, found '{pos}'")));
        }
        let synset_cnt = f.number("synset count", 10)?;
        let p_cnt = f.number("pointer count", 10)?;
        for _ in 0..p_cnt {
            f.next("pointer symbol")?;
        }
        f.number("sense count", 10)?;
        f.number("tagged sense count", 10)?;
        let mut offsets = Vec::with_capacity(synset_cnt as usize);
        for _ in 0..synset_cnt {
            offsets.push(f.number("synset offset", 10)?);
        }
        if f.iter.next().is_some() {
            return Err(Error::parse(path, i + 1, "trailing fields after synset offsets"));
        }
        out.insert(lemma, offsets);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syn(offset: u64, lemma: &str, hypernyms: &[u64]) -> Synset {
        Synset {
            offset,
            lemmas: vec![lemma.to_string()],
            hypernyms: hypernyms.to_vec(),
        }
    }

    fn graph(synsets: Vec<Synset>) -> HypernymGraph {
        let index = synsets
            .iter()
            .map(|s| (s.lemmas[0].clone(), vec![s.offset]))
            .collect();
        HypernymGraph::from_parts(synsets, index).unwrap()
    }

    #[test]
    fn depths_and_self_similarity() {
        let g = graph(vec![syn(1, "entity", &[]), syn(2, "animal", &[1]), syn(3, "dog", &[2])]);
        assert_eq!(g.depth(ROOT_OFFSET).unwrap(), 1);
        assert_eq!(g.depth(1).unwrap(), 2);
        assert_eq!(g.depth(3).unwrap(), 4);
        assert_eq!(g.wu_palmer(3, 3).unwrap(), 1.0);
        // dog under animal: 2*3/(3+4)
        assert!((g.wu_palmer(2, 3).unwrap() - 6.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn two_top_level_synsets_meet_at_root() {
        let g = graph(vec![syn(1, "thing", &[]), syn(2, "idea", &[])]);
        assert_eq!(g.wu_palmer(1, 2).unwrap(), 0.5);
        assert_eq!(g.lowest_common_subsumer(1, 2).unwrap(), ROOT_OFFSET);
    }

    #[test]
    fn longest_path_depth_with_two_parents() {
        // 4 has parents 3 (depth 4) and 1 (depth 2): depth 5.
        let g = graph(vec![
            syn(1, "a", &[]),
            syn(2, "b", &[1]),
            syn(3, "c", &[2]),
            syn(4, "d", &[3, 1]),
        ]);
        assert_eq!(g.depth(4).unwrap(), 5);
        assert!(g.wu_palmer(3, 4).unwrap() < 1.0);
    }

    #[test]
    fn unknown_synset_is_lookup_error() {
        let g = graph(vec![syn(1, "a", &[])]);
        assert!(matches!(g.wu_palmer(1, 99), Err(Error::Reference(_))));
    }

    #[test]
    fn dangling_hypernym_rejected() {
        let err = HypernymGraph::from_parts(vec![syn(1, "a", &[7])], HashMap::new()).unwrap_err();
        assert!(matches!(err, Error::Reference(_)));
    }

    #[test]
    fn cycle_rejected() {
        let err = HypernymGraph::from_parts(vec![syn(1, "a", &[2]), syn(2, "b", &[1])], HashMap::new())
            .unwrap_err();
        assert!(matches!(err, Error::Invalid(_)));
    }

    #[test]
    fn description_score_edges() {
        let g = graph(vec![
            syn(1, "entity", &[]),
            syn(2, "animal", &[1]),
            syn(3, "dog", &[2]),
            syn(4, "cat", &[2]),
        ]);
        let t = |w: &[&str]| TokenSet::from_tokens(w.iter().copied());
        let agg = Aggregation::MeanOfMax;
        assert_eq!(g.description_score(&t(&[]), &t(&[]), agg), 1.0);
        assert_eq!(g.description_score(&t(&["dog"]), &t(&[]), agg), 0.0);
        assert_eq!(g.description_score(&t(&["dog"]), &t(&["dog"]), agg), 1.0);
        assert_eq!(g.description_score(&t(&["zzz"]), &t(&["zzz"]), agg), 1.0);
        assert_eq!(g.description_score(&t(&["zzz"]), &t(&["dog"]), agg), 0.0);
        // dog vs cat: LCS animal (depth 3), both depth 4 -> 0.75
        assert!((g.description_score(&t(&["dog"]), &t(&["cat"]), agg) - 0.75).abs() < 1e-12);
        // {cat} is smaller; best match against {dog, zzz} is 0.75.
        assert!((g.description_score(&t(&["dog", "zzz"]), &t(&["cat"]), agg) - 0.75).abs() < 1e-12);
        let ab = g.description_score(&t(&["dog", "zzz"]), &t(&["cat", "zzz"]), agg);
        let ba = g.description_score(&t(&["cat", "zzz"]), &t(&["dog", "zzz"]), agg);
        assert_eq!(ab, ba);
        assert!((ab - 0.875).abs() < 1e-12);
        assert_eq!(
            g.description_score(&t(&["dog", "zzz"]), &t(&["cat", "qqq"]), Aggregation::MaxOfMax),
            0.75
        );
    }

    #[test]
    fn parse_rejects_malformed_lines() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data.noun");
        let index = dir.path().join("index.noun");
        fs::write(&index, "  1 header\n").unwrap();
        fs::write(&data, "").unwrap();
        assert!(matches!(HypernymGraph::parse(&index, &data), Err(Error::Parse { .. })));

        fs::write(&data, "  1 header\n00000010 03 n 01 thing 0 00x | gloss\n").unwrap();
        match HypernymGraph::parse(&index, &data) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
