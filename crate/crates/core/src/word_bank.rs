//! Banned-word bank: seed list expanded with nearest neighbours in a
//! pretrained word-embedding space.
//!
//! Neighbour search is an exhaustive cosine scan. Ties on similarity are broken
//! by the candidate's code-point order, and a word reached from several seeds
//! keeps its best similarity (ties: smallest seed), so the bank does not depend
//! on seed order.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scalar::Scalar;

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_TAU: f64 = 0.6;

#[derive(Debug, Error)]
pub enum BankError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid bank: {0}")]
    InvalidBank(String),
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cosine undefined for a zero vector")]
    ZeroVector,
    #[error("invalid expansion parameters: {0}")]
    InvalidConfig(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> BankError {
    BankError::Parse {
        line,
        message: message.into(),
    }
}

/// Word vectors of a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    dim: usize,
    words: Vec<String>,
    vectors: Vec<Vec<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            words: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<T>) -> Result<(), BankError> {
        let word = word.into();
        if vector.len() != self.dim {
            return Err(BankError::DimensionMismatch(vector.len(), self.dim));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(BankError::InvalidBank(format!("non-finite component for {word:?}")));
        }
        if self.index.contains_key(&word) {
            return Err(BankError::InvalidBank(format!("duplicate word {word:?}")));
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.vectors.push(vector);
        Ok(())
    }

    /// Parses the text format: a `V d` header, then `V` lines of `word c1 … cd`.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, BankError> {
        let mut lines = reader.lines().enumerate();
        let header = loop {
            match lines.next() {
                None => return Err(parse_err(1, "missing `V d` header")),
                Some((i, line)) => {
                    let line = line.map_err(|e| parse_err(i + 1, e.to_string()))?;
                    if !line.trim().is_empty() {
                        break (i + 1, line);
                    }
                }
            }
        };
        let fields: Vec<&str> = header.1.split_whitespace().collect();
        let [v, d] = fields[..] else {
            return Err(parse_err(header.0, "header must be `V d`"));
        };
        let vocab: usize = v.parse().map_err(|_| parse_err(header.0, "bad vocabulary size"))?;
        let dim: usize = d.parse().map_err(|_| parse_err(header.0, "bad dimension"))?;
        if dim == 0 {
            return Err(parse_err(header.0, "dimension must be positive"));
        }

        let mut table = EmbeddingTable::new(dim);
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-blank line");
            let vector = parts
                .map(|p| {
                    p.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .map(T::of)
                        .ok_or_else(|| parse_err(lineno, format!("bad component {p:?}")))
                })
                .collect::<Result<Vec<T>, _>>()?;
            if vector.len() != dim {
                return Err(parse_err(
                    lineno,
                    format!("{word:?} has {} components, expected {dim}", vector.len()),
                ));
            }
            if table.index.contains_key(word) {
                return Err(parse_err(lineno, format!("duplicate word {word:?}")));
            }
            table.insert(word, vector)?;
        }
        if table.len() != vocab {
            return Err(parse_err(
                header.0,
                format!("header declares {vocab} words, found {}", table.len()),
            ));
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, BankError> {
        let file = std::fs::File::open(path).map_err(|source| BankError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(std::io::BufReader::new(file))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[T]> {
        self.index.get(word).map(|&i| self.vectors[i].as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[T])> {
        self.words
            .iter()
            .zip(&self.vectors)
            .map(|(w, v)| (w.as_str(), v.as_slice()))
    }
}

/// `u·v / (‖u‖‖v‖)`, clamped to `[-1, 1]`.
pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Result<T, BankError> {
    if u.len() != v.len() {
        return Err(BankError::DimensionMismatch(u.len(), v.len()));
    }
    let (mut dot, mut uu, mut vv) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in u.iter().zip(v) {
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == T::zero() || vv == T::zero() {
        return Err(BankError::ZeroVector);
    }
    Ok((dot / (uu.sqrt() * vv.sqrt())).max(-T::one()).min(T::one()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntrySource {
    Seed,
    Expanded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankEntry {
    pub surface: String,
    pub source: EntrySource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_parent: Option<String>,
    pub similarity: f64,
    /// Tone-stripped syllables, one per character; filled by the detector.
    #[serde(default)]
    pub pinyin_key: Vec<String>,
}

impl BankEntry {
    pub fn seed(surface: impl Into<String>) -> Self {
        BankEntry {
            surface: surface.into(),
            source: EntrySource::Seed,
            seed_parent: None,
            similarity: 1.0,
            pinyin_key: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionConfig {
    pub k: usize,
    pub tau: f64,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig {
            k: DEFAULT_K,
            tau: DEFAULT_TAU,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceHash {
    pub name: String,
    pub sha256: String,
}

impl SourceHash {
    pub fn of_file(path: &Path) -> Result<Self, BankError> {
        let bytes = std::fs::read(path).map_err(|source| BankError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let digest = Sha256::digest(&bytes);
        Ok(SourceHash {
            name: path.display().to_string(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        })
    }
}

/// Seeds first (code-point order), then expansions (code-point order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BannedWordBank {
    pub config: ExpansionConfig,
    #[serde(default)]
    pub provenance: Vec<SourceHash>,
    pub entries: Vec<BankEntry>,
}

impl BannedWordBank {
    /// Seed-only bank.
    pub fn from_seeds<I, S>(seeds: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let seeds: BTreeSet<String> = seeds.into_iter().map(Into::into).collect();
        BannedWordBank {
            config: ExpansionConfig { k: 0, tau: 1.0 },
            provenance: Vec::new(),
            entries: seeds.into_iter().map(BankEntry::seed).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, surface: &str) -> Option<&BankEntry> {
        self.entries.iter().find(|e| e.surface == surface)
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.surface.as_str())
    }

    pub fn validate(&self) -> Result<(), BankError> {
        let mut seen = BTreeSet::new();
        let seeds: BTreeSet<&str> = self
            .entries
            .iter()
            .filter(|e| e.source == EntrySource::Seed)
            .map(|e| e.surface.as_str())
            .collect();
        for e in &self.entries {
            if e.surface.is_empty() {
                return Err(BankError::InvalidBank("empty surface".into()));
            }
            if !seen.insert(e.surface.as_str()) {
                return Err(BankError::InvalidBank(format!("duplicate surface {:?}", e.surface)));
            }
            if !(-1.0..=1.0).contains(&e.similarity) {
                return Err(BankError::InvalidBank(format!(
                    "similarity {} of {:?} outside [-1, 1]",
                    e.similarity, e.surface
                )));
            }
            match e.source {
                EntrySource::Seed if e.seed_parent.is_some() => {
                    return Err(BankError::InvalidBank(format!("seed {:?} has a parent", e.surface)))
                }
                EntrySource::Expanded => {
                    let parent_ok = e.seed_parent.as_deref().is_some_and(|p| seeds.contains(p));
                    if !parent_ok {
                        return Err(BankError::InvalidBank(format!(
                            "expanded entry {:?} lacks a seed parent",
                            e.surface
                        )));
                    }
                    if e.similarity < self.config.tau {
                        return Err(BankError::InvalidBank(format!(
                            "expanded entry {:?} below tau",
                            e.surface
                        )));
                    }
                }
                EntrySource::Seed => {}
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bank serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, BankError> {
        let bank: BannedWordBank = serde_json::from_str(text)
            .map_err(|e| parse_err(e.line(), e.to_string()))?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn save(&self, path: &Path) -> Result<(), BankError> {
        std::fs::write(path, self.to_json()).map_err(|source| BankError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, BankError> {
        let text = std::fs::read_to_string(path).map_err(|source| BankError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Candidate ordering: higher similarity first, then code-point order.
fn by_similarity_then_word<T: Scalar>(a: &(T, &str), b: &(T, &str)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.1.cmp(b.1))
}

/// Expands seeds with up to `k` neighbours each whose cosine similarity is at
/// least `tau`. Other seeds are never neighbours; seeds missing from the table
/// stay in the bank unexpanded.
pub fn expand_seeds<T: Scalar, S: AsRef<str>>(
    seeds: &[S],
    table: &EmbeddingTable<T>,
    k: usize,
    tau: f64,
) -> Result<BannedWordBank, BankError> {
    if !(tau > -1.0 && tau <= 1.0) {
        return Err(BankError::InvalidConfig(format!("tau {tau} outside (-1, 1]")));
    }
    let seed_set: BTreeSet<&str> = seeds
        .iter()
        .map(AsRef::as_ref)
        .filter(|s| !s.is_empty())
        .collect();
    let threshold = T::of(tau);

    // word -> (similarity, parent)
    let mut expanded: BTreeMap<&str, (T, &str)> = BTreeMap::new();
    for &seed in &seed_set {
        let Some(seed_vec) = table.get(seed) else {
            log::warn!("seed {seed:?} has no embedding; kept without expansion");
            continue;
        };
        if k == 0 {
            continue;
        }
        let mut candidates: Vec<(T, &str)> = Vec::new();
        for (word, vec) in table.iter() {
            if seed_set.contains(word) {
                continue;
            }
            match cosine(seed_vec, vec) {
                Ok(sim) if sim >= threshold => candidates.push((sim, word)),
                Ok(_) => {}
                Err(BankError::ZeroVector) => {}
                Err(e) => return Err(e),
            }
        }
        candidates.sort_by(by_similarity_then_word);
        for (sim, word) in candidates.into_iter().take(k) {
            expanded
                .entry(word)
                .and_modify(|cur| {
                    // BTreeSet iteration visits seeds in increasing order, so on a
                    // similarity tie the earlier (smaller) parent is kept.
                    if sim > cur.0 {
                        *cur = (sim, seed);
                    }
                })
                .or_insert((sim, seed));
        }
    }

    let mut entries: Vec<BankEntry> = seed_set.iter().map(|&s| BankEntry::seed(s)).collect();
    entries.extend(expanded.into_iter().map(|(word, (sim, parent))| BankEntry {
        surface: word.to_string(),
        source: EntrySource::Expanded,
        seed_parent: Some(parent.to_string()),
        similarity: sim.as_f64(),
        pinyin_key: Vec::new(),
    }));
    Ok(BannedWordBank {
        config: ExpansionConfig { k, tau },
        provenance: Vec::new(),
        entries,
    })
}
