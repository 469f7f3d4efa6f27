//! Banned-word detection over noisy ASR transcripts.
//!
//! Each bank entry compiles to a [`FuzzyPattern`]: one unit per character,
//! where a unit accepts the character itself or any character sharing a
//! tone-stripped syllable with it, and up to `max_gap` foreign characters may
//! sit between consecutive units. Candidates found by [`scan`] are then
//! segmented in sentence context; a candidate strictly inside a benign
//! lexicon word is suppressed.
//!
//! For a start position the reported match is the one ending earliest; among
//! those, an all-identity path makes it a surface hit.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linguistic::{SegmentationLexicon, SENTENCE_TERMINATORS};
use crate::session::{Role, SessionRecord};
use crate::word_bank::{BankEntry, BannedWordBank};

/// One ASR noise character tolerated between pattern characters.
pub const DEFAULT_MAX_GAP: usize = 1;

#[derive(Debug, Error)]
pub enum PinyinError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Character → tone-stripped syllables (polyphones allowed).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PinyinTable {
    readings: HashMap<char, Vec<String>>,
    homophones: HashMap<String, BTreeSet<char>>,
}

/// Lowercases, drops tone digits and tone marks; `ü` becomes `v`.
pub fn strip_tone(syllable: &str) -> String {
    syllable
        .chars()
        .filter(|c| !c.is_ascii_digit())
        .flat_map(char::to_lowercase)
        .map(|c| match c {
            'ā' | 'á' | 'ǎ' | 'à' => 'a',
            'ē' | 'é' | 'ě' | 'è' => 'e',
            'ī' | 'í' | 'ǐ' | 'ì' => 'i',
            'ō' | 'ó' | 'ǒ' | 'ò' => 'o',
            'ū' | 'ú' | 'ǔ' | 'ù' => 'u',
            'ü' | 'ǖ' | 'ǘ' | 'ǚ' | 'ǜ' => 'v',
            other => other,
        })
        .collect()
}

impl PinyinTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds readings for a character; syllables are tone-stripped and must
    /// reduce to lowercase ASCII letters.
    pub fn insert<I, S>(&mut self, c: char, syllables: I) -> Result<(), String>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for raw in syllables {
            let s = strip_tone(raw.as_ref().trim());
            if s.is_empty() || !s.chars().all(|c| c.is_ascii_lowercase()) {
                return Err(format!("invalid syllable {:?} for {c:?}", raw.as_ref()));
            }
            let readings = self.readings.entry(c).or_default();
            if !readings.contains(&s) {
                readings.push(s.clone());
            }
            self.homophones.entry(s).or_default().insert(c);
        }
        Ok(())
    }

    /// Parses `char syllable[,syllable...]` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, PinyinError> {
        let mut table = PinyinTable::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| PinyinError::Parse {
                line: i + 1,
                message,
            };
            let (head, rest) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| err("expected `char syllable[,syllable...]`".into()))?;
            let mut chars = head.chars();
            let (Some(c), None) = (chars.next(), chars.next()) else {
                return Err(err(format!("{head:?} is not a single character")));
            };
            table.insert(c, rest.trim().split(',')).map_err(err)?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, PinyinError> {
        let text = std::fs::read_to_string(path).map_err(|source| PinyinError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn readings(&self, c: char) -> Option<&[String]> {
        self.readings.get(&c).map(Vec::as_slice)
    }

    /// Syllable set of a character; unknown characters map to themselves.
    pub fn syllables(&self, c: char) -> BTreeSet<String> {
        match self.readings.get(&c) {
            Some(r) => r.iter().cloned().collect(),
            None => BTreeSet::from([c.to_string()]),
        }
    }

    pub fn homophones(&self, syllable: &str) -> impl Iterator<Item = char> + '_ {
        self.homophones.get(syllable).into_iter().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }
}

/// Per-character syllable sets; length always equals the character count.
pub fn to_pinyin(text: &str, table: &PinyinTable) -> Vec<BTreeSet<String>> {
    text.chars().map(|c| table.syllables(c)).collect()
}

/// Fills each entry's `pinyin_key` with the primary reading of every character.
pub fn annotate_bank(bank: &mut BannedWordBank, table: &PinyinTable) {
    for entry in &mut bank.entries {
        entry.pinyin_key = entry
            .surface
            .chars()
            .map(|c| {
                table
                    .readings(c)
                    .and_then(|r| r.first().cloned())
                    .unwrap_or_else(|| c.to_string())
            })
            .collect();
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchUnit {
    pub surface: char,
    /// Every character the unit accepts, `surface` included.
    pub chars: BTreeSet<char>,
    pub syllables: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Surface,
    Phonetic,
}

impl MatchUnit {
    /// `Some(true)` on identity, `Some(false)` on a homophone.
    fn accepts(&self, c: char, syllables: &BTreeSet<String>) -> Option<bool> {
        if c == self.surface {
            Some(true)
        } else if !self.syllables.is_disjoint(syllables) {
            Some(false)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyPattern {
    pub entry: BankEntry,
    pub units: Vec<MatchUnit>,
    pub max_gap: usize,
}

pub fn compile_pattern(entry: &BankEntry, table: &PinyinTable, max_gap: usize) -> FuzzyPattern {
    let units = entry
        .surface
        .chars()
        .map(|c| {
            let syllables = table.syllables(c);
            let mut chars: BTreeSet<char> =
                syllables.iter().flat_map(|s| table.homophones(s)).collect();
            chars.insert(c);
            MatchUnit {
                surface: c,
                chars,
                syllables,
            }
        })
        .collect();
    FuzzyPattern {
        entry: entry.clone(),
        units,
        max_gap,
    }
}

/// Half-open character span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// A match produced by [`scan`], before disambiguation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Candidate {
    /// Index into the pattern list passed to [`scan`].
    pub pattern: usize,
    pub span: Span,
    pub matched_text: String,
    pub channel: Channel,
}

/// Earliest-ending match of `units` beginning at `start`, if any.
fn match_at(
    units: &[MatchUnit],
    max_gap: usize,
    chars: &[char],
    syllables: &[BTreeSet<String>],
    start: usize,
) -> Option<(usize, bool)> {
    let first = units[0].accepts(chars[start], &syllables[start])?;
    // reach[i] = identity flag for unit j matched at position base + i
    let mut base = start;
    let mut reach: Vec<Option<bool>> = vec![Some(first)];
    for unit in &units[1..] {
        let lo = base + 1;
        let hi = (base + reach.len() + max_gap + 1).min(chars.len());
        if lo >= hi {
            return None;
        }
        let mut next = vec![None; hi - lo];
        for (i, prev) in reach.iter().enumerate() {
            let Some(prev_identity) = *prev else { continue };
            let from = base + i + 1;
            let to = (from + max_gap + 1).min(chars.len());
            for q in from..to {
                if let Some(identity) = unit.accepts(chars[q], &syllables[q]) {
                    let slot = &mut next[q - lo];
                    let flag = identity && prev_identity;
                    *slot = Some(slot.unwrap_or(false) || flag);
                }
            }
        }
        let first_hit = next.iter().position(Option::is_some)?;
        let last_hit = next.iter().rposition(Option::is_some)?;
        base = lo + first_hit;
        reach = next[first_hit..=last_hit].to_vec();
    }
    // The earliest reachable end is the first slot.
    Some((base + 1, reach[0].expect("first slot is reachable")))
}

/// All candidates of every pattern, in (pattern, start) order. Every start
/// position where a pattern matches yields one candidate.
pub fn scan(text: &str, patterns: &[FuzzyPattern], table: &PinyinTable) -> Vec<Candidate> {
    let chars: Vec<char> = text.chars().collect();
    let syllables = to_pinyin(text, table);
    let mut out = Vec::new();
    for (pi, pattern) in patterns.iter().enumerate() {
        if pattern.units.is_empty() {
            continue;
        }
        for start in 0..chars.len() {
            if let Some((end, identity)) =
                match_at(&pattern.units, pattern.max_gap, &chars, &syllables, start)
            {
                out.push(Candidate {
                    pattern: pi,
                    span: Span { start, end },
                    matched_text: chars[start..end].iter().collect(),
                    channel: if identity {
                        Channel::Surface
                    } else {
                        Channel::Phonetic
                    },
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pending,
    Confirmed,
    Suppressed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionHit {
    pub session_id: String,
    pub segment_index: usize,
    pub role: Role,
    pub span: Span,
    pub matched_text: String,
    pub entry: BankEntry,
    pub channel: Channel,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suppression_reason: Option<String>,
}

impl Candidate {
    pub fn into_hit(
        self,
        session_id: &str,
        segment_index: usize,
        role: Role,
        patterns: &[FuzzyPattern],
    ) -> DetectionHit {
        DetectionHit {
            session_id: session_id.to_string(),
            segment_index,
            role,
            span: self.span,
            matched_text: self.matched_text,
            entry: patterns[self.pattern].entry.clone(),
            channel: self.channel,
            verdict: Verdict::Pending,
            suppression_reason: None,
        }
    }
}

/// Segments the sentence around the hit; suppresses the hit when a single
/// benign token strictly contains its span and that token is not itself a
/// banned surface. Span and channel are never changed.
pub fn disambiguate(
    mut hit: DetectionHit,
    segment_text: &str,
    seg: &SegmentationLexicon,
    banned: &HashSet<&str>,
) -> DetectionHit {
    let chars: Vec<char> = segment_text.chars().collect();
    let Span { start, end } = hit.span;
    debug_assert!(start < end && end <= chars.len());
    let is_term = |c: &char| SENTENCE_TERMINATORS.contains(c);
    let sentence_start = chars[..start].iter().rposition(is_term).map_or(0, |i| i + 1);
    let sentence_end = chars[end..]
        .iter()
        .position(is_term)
        .map_or(chars.len(), |i| end + i + 1);
    let sentence: String = chars[sentence_start..sentence_end].iter().collect();

    let covering = seg.segment_spans(&sentence).into_iter().find(|t| {
        let (ts, te) = (t.char_start + sentence_start, t.char_end + sentence_start);
        ts <= start && end <= te && te - ts > end - start
    });
    match covering {
        Some(token) if !banned.contains(token.text) => {
            hit.verdict = Verdict::Suppressed;
            hit.suppression_reason = Some(format!("inside benign word {}", token.text));
        }
        _ => {
            hit.verdict = Verdict::Confirmed;
            hit.suppression_reason = None;
        }
    }
    hit
}

/// Compiled detector for one bank.
#[derive(Debug, Clone)]
pub struct Detector {
    patterns: Vec<FuzzyPattern>,
    table: PinyinTable,
    seg: SegmentationLexicon,
    banned: HashSet<String>,
}

impl Detector {
    pub fn new(
        bank: &BannedWordBank,
        table: PinyinTable,
        seg: SegmentationLexicon,
        max_gap: usize,
    ) -> Self {
        Detector {
            patterns: bank
                .entries
                .iter()
                .filter(|e| !e.surface.is_empty())
                .map(|e| compile_pattern(e, &table, max_gap))
                .collect(),
            banned: bank.surfaces().map(str::to_string).collect(),
            table,
            seg,
        }
    }

    pub fn patterns(&self) -> &[FuzzyPattern] {
        &self.patterns
    }

    /// Every candidate with its verdict, suppressed ones included.
    pub fn judge_segment(
        &self,
        session_id: &str,
        segment_index: usize,
        role: Role,
        text: &str,
    ) -> Vec<DetectionHit> {
        let banned: HashSet<&str> = self.banned.iter().map(String::as_str).collect();
        scan(text, &self.patterns, &self.table)
            .into_iter()
            .map(|c| {
                let hit = c.into_hit(session_id, segment_index, role, &self.patterns);
                disambiguate(hit, text, &self.seg, &banned)
            })
            .collect()
    }

    /// Confirmed hits sorted by (segment, span start, surface). A confirmed
    /// hit overlapping an earlier confirmed hit of the same entry in the same
    /// segment is dropped.
    pub fn detect(&self, record: &SessionRecord) -> Vec<DetectionHit> {
        let mut out = Vec::new();
        for (i, segment) in record.segments.iter().enumerate() {
            let mut confirmed: Vec<DetectionHit> = self
                .judge_segment(&record.session_id, i, segment.role, &segment.text)
                .into_iter()
                .filter(|h| h.verdict == Verdict::Confirmed)
                .collect();
            confirmed.sort_by(|a, b| {
                (a.span.start, &a.entry.surface, a.span.end)
                    .cmp(&(b.span.start, &b.entry.surface, b.span.end))
            });
            let mut kept: BTreeMap<String, Vec<Span>> = BTreeMap::new();
            for hit in confirmed {
                let spans = kept.entry(hit.entry.surface.clone()).or_default();
                if spans.iter().any(|s| s.overlaps(&hit.span)) {
                    continue;
                }
                spans.push(hit.span);
                out.push(hit);
            }
        }
        out
    }
}

/// One-shot detection; compiles the bank on every call.
pub fn detect(
    record: &SessionRecord,
    bank: &BannedWordBank,
    table: &PinyinTable,
    seg: &SegmentationLexicon,
    max_gap: usize,
) -> Vec<DetectionHit> {
    Detector::new(bank, table.clone(), seg.clone(), max_gap).detect(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::TranscriptSegment;
    use proptest::prelude::*;

    fn fixture_table() -> PinyinTable {
        PinyinTable::parse("# fixture\n傻 sha3\n沙 sha1\n逼 bi1\n比 bi3\n").unwrap()
    }

    fn pattern(surface: &str, g: usize) -> FuzzyPattern {
        compile_pattern(&BankEntry::seed(surface), &fixture_table(), g)
    }

    fn banned(list: &[&'static str]) -> HashSet<&'static str> {
        list.iter().copied().collect()
    }

    #[test]
    fn tone_stripping() {
        assert_eq!(strip_tone("Shǎ"), "sha");
        assert_eq!(strip_tone("lv4"), "lv");
        assert_eq!(strip_tone("nǚ"), "nv");
    }

    #[test]
    fn pinyin_file_errors_name_the_line() {
        let err = PinyinTable::parse("傻 sha\n沙比 sha\n").unwrap_err();
        assert!(matches!(err, PinyinError::Parse { line: 2, .. }), "{err}");
        let err = PinyinTable::parse("傻 \n").unwrap_err();
        assert!(matches!(err, PinyinError::Parse { line: 1, .. }));
        let err = PinyinTable::parse("傻 sh-a\n").unwrap_err();
        assert!(matches!(err, PinyinError::Parse { line: 1, .. }));
    }

    #[test]
    fn polyphones_are_kept() {
        let t = PinyinTable::parse("长 chang2,zhang3\n").unwrap();
        assert_eq!(t.readings('长').unwrap(), ["chang", "zhang"]);
    }

    #[test]
    fn to_pinyin_examples() {
        let t = fixture_table();
        assert!(to_pinyin("", &t).is_empty());
        let p = to_pinyin("沙比", &t);
        assert_eq!(p, vec![BTreeSet::from(["sha".to_string()]), BTreeSet::from(["bi".to_string()])]);
        let p = to_pinyin("ok", &PinyinTable::new());
        assert_eq!(p, vec![BTreeSet::from(["o".to_string()]), BTreeSet::from(["k".to_string()])]);
    }

    #[test]
    fn compile_examples() {
        assert_eq!(pattern("傻", 1).units.len(), 1);
        let p = pattern("傻逼", 1);
        assert_eq!(p.units[0].chars, BTreeSet::from(['傻', '沙']));
        assert_eq!(p.units[1].chars, BTreeSet::from(['逼', '比']));
        assert_eq!(p.max_gap, 1);
    }

    #[test]
    fn scan_examples() {
        let t = fixture_table();
        let p = [pattern("傻逼", 1)];
        assert!(scan("", &p, &t).is_empty());

        let hits = scan("沙X比", &p, &t);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].span, Span { start: 0, end: 3 });
        assert_eq!(hits[0].channel, Channel::Phonetic);
        assert_eq!(hits[0].matched_text, "沙X比");

        let hits = scan("傻逼", &p, &t);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].span, Span { start: 0, end: 2 });
        assert_eq!(hits[0].channel, Channel::Surface);
    }

    #[test]
    fn zero_gap_requires_contiguity() {
        let t = fixture_table();
        assert!(scan("傻X逼", &[pattern("傻逼", 0)], &t).is_empty());
        assert_eq!(scan("傻X逼", &[pattern("傻逼", 1)], &t).len(), 1);
    }

    #[test]
    fn earliest_end_prefers_surface_on_tie() {
        let t = fixture_table();
        // 傻 then either 比 (phonetic) at 1 or 逼 (identity) at 2: earliest end wins.
        let hits = scan("傻比逼", &[pattern("傻逼", 1)], &t);
        assert_eq!(hits[0].span, Span { start: 0, end: 2 });
        assert_eq!(hits[0].channel, Channel::Phonetic);
        // 傻(0) 沙(1) 逼(3) and 傻(0) 傻(2) 逼(3) end together; the identity path wins.
        let p = [pattern("傻傻逼", 1)];
        let hits = scan("傻沙傻逼", &p, &t);
        let first = hits.iter().find(|h| h.span.start == 0).unwrap();
        assert_eq!(first.span, Span { start: 0, end: 4 });
        assert_eq!(first.channel, Channel::Surface);
    }

    fn hit_for(text: &str, start: usize, end: usize) -> DetectionHit {
        DetectionHit {
            session_id: "s".into(),
            segment_index: 0,
            role: Role::Instructor,
            span: Span { start, end },
            matched_text: text.chars().skip(start).take(end - start).collect(),
            entry: BankEntry::seed("比"),
            channel: Channel::Surface,
            verdict: Verdict::Pending,
            suppression_reason: None,
        }
    }

    #[test]
    fn disambiguation_examples() {
        let seg = SegmentationLexicon::from_words(["比如"]);
        let text = "我说比如这个";
        let h = disambiguate(hit_for(text, 2, 3), text, &seg, &banned(&["比"]));
        assert_eq!(h.verdict, Verdict::Suppressed);
        assert_eq!(h.suppression_reason.as_deref(), Some("inside benign word 比如"));
        assert_eq!(h.span, Span { start: 2, end: 3 });

        let text = "你这个比啊";
        let h = disambiguate(hit_for(text, 3, 4), text, &seg, &banned(&["比"]));
        assert_eq!(h.verdict, Verdict::Confirmed);
        assert!(h.suppression_reason.is_none());

        // span covering the tail of one token and the head of the next
        let seg = SegmentationLexicon::from_words(["好比", "如何"]);
        let text = "好比如何";
        let h = disambiguate(hit_for(text, 1, 3), text, &seg, &banned(&["比如"]));
        assert_eq!(h.verdict, Verdict::Confirmed);
    }

    #[test]
    fn benign_word_that_is_banned_does_not_suppress() {
        let seg = SegmentationLexicon::from_words(["傻逼"]);
        let text = "傻逼";
        let h = disambiguate(hit_for(text, 0, 1), text, &seg, &banned(&["傻", "傻逼"]));
        assert_eq!(h.verdict, Verdict::Confirmed);
    }

    #[test]
    fn disambiguation_stays_within_the_sentence() {
        // "比如" only forms across the terminator, so it must not veto.
        let seg = SegmentationLexicon::from_words(["比。如", "比如"]);
        let text = "就比。如果";
        let h = disambiguate(hit_for(text, 1, 2), text, &seg, &banned(&["比"]));
        assert_eq!(h.verdict, Verdict::Confirmed);
    }

    fn record(texts: &[&str]) -> SessionRecord {
        let segs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| TranscriptSegment {
                role: if i % 2 == 0 { Role::Instructor } else { Role::Student },
                start_s: i as f64,
                end_s: i as f64 + 1.0,
                text: t.to_string(),
                asr_confidence: 0.9,
            })
            .collect();
        SessionRecord::new("s1", "math", "t", "p", 100.0, vec![], segs).unwrap()
    }

    #[test]
    fn detect_on_clean_session_is_empty() {
        let bank = BannedWordBank::from_seeds(["傻逼"]);
        let hits = detect(
            &record(&["今天我们学习分数", "好的老师"]),
            &bank,
            &fixture_table(),
            &SegmentationLexicon::default(),
            1,
        );
        assert!(hits.is_empty());
    }

    #[test]
    fn detect_reports_one_hit_per_occurrence() {
        let bank = BannedWordBank::from_seeds(["傻逼", "逼"]);
        let hits = detect(
            &record(&["再读一遍，傻傻逼，你记不住吗？"]),
            &bank,
            &fixture_table(),
            &SegmentationLexicon::default(),
            1,
        );
        let summary: Vec<(&str, Span)> =
            hits.iter().map(|h| (h.entry.surface.as_str(), h.span)).collect();
        assert_eq!(
            summary,
            vec![
                ("傻逼", Span { start: 5, end: 8 }),
                ("逼", Span { start: 7, end: 8 }),
            ]
        );
    }

    #[test]
    fn annotate_fills_keys() {
        let mut bank = BannedWordBank::from_seeds(["傻逼", "ok"]);
        annotate_bank(&mut bank, &fixture_table());
        assert_eq!(bank.get("傻逼").unwrap().pinyin_key, ["sha", "bi"]);
        assert_eq!(bank.get("ok").unwrap().pinyin_key, ["o", "k"]);
    }

    /// Enumerates every increasing position tuple with bounded gaps.
    fn brute_force(text: &str, p: &FuzzyPattern, t: &PinyinTable) -> Vec<(usize, usize, bool)> {
        fn extend(
            chars: &[char],
            t: &PinyinTable,
            units: &[MatchUnit],
            g: usize,
            pos: usize,
            identity: bool,
            out: &mut Vec<(usize, bool)>,
        ) {
            let Some((unit, rest)) = units.split_first() else {
                out.push((pos, identity));
                return;
            };
            for q in pos + 1..=(pos + 1 + g).min(chars.len().saturating_sub(1)) {
                if q >= chars.len() {
                    break;
                }
                let c = chars[q];
                let ok_id = c == unit.surface;
                let ok_ph = !t.syllables(c).is_disjoint(&unit.syllables);
                if ok_id || ok_ph {
                    extend(chars, t, rest, g, q, identity && ok_id, out);
                }
            }
        }
        let chars: Vec<char> = text.chars().collect();
        let mut found = Vec::new();
        for start in 0..chars.len() {
            let u0 = &p.units[0];
            let c = chars[start];
            let id = c == u0.surface;
            if !(id || !t.syllables(c).is_disjoint(&u0.syllables)) {
                continue;
            }
            let mut ends = Vec::new();
            extend(&chars, t, &p.units[1..], p.max_gap, start, id, &mut ends);
            if let Some(min_end) = ends.iter().map(|e| e.0).min() {
                let surface = ends.iter().any(|&(e, i)| e == min_end && i);
                found.push((start, min_end + 1, surface));
            }
        }
        found
    }

    fn summary(cands: &[Candidate]) -> Vec<(usize, usize, bool)> {
        cands
            .iter()
            .map(|c| (c.span.start, c.span.end, c.channel == Channel::Surface))
            .collect()
    }

    proptest! {
        #[test]
        fn scan_matches_brute_force(
            text in "[傻沙逼比X ]{0,14}",
            surface in "[傻沙逼比X]{1,3}",
            g in 0usize..3,
        ) {
            let t = fixture_table();
            let p = compile_pattern(&BankEntry::seed(surface), &t, g);
            prop_assert_eq!(summary(&scan(&text, std::slice::from_ref(&p), &t)), brute_force(&text, &p, &t));
        }

        #[test]
        fn surface_only_zero_gap_is_substring_search(
            text in "[abc]{0,20}",
            needle in "[abc]{1,4}",
        ) {
            let t = PinyinTable::new();
            let p = compile_pattern(&BankEntry::seed(needle.clone()), &t, 0);
            let got: Vec<usize> = scan(&text, &[p], &t).iter().map(|c| c.span.start).collect();
            let n = needle.len();
            let expected: Vec<usize> = (0..text.len().saturating_sub(n - 1))
                .filter(|&i| i + n <= text.len() && text[i..i + n] == needle)
                .collect();
            prop_assert_eq!(got, expected);
        }

        #[test]
        fn widening_gap_never_loses_matches(
            text in "[傻沙逼比XY]{0,16}",
            surface in "[傻逼比]{1,3}",
            g in 0usize..3,
        ) {
            let t = fixture_table();
            let narrow = compile_pattern(&BankEntry::seed(surface.clone()), &t, g);
            let wide = compile_pattern(&BankEntry::seed(surface), &t, g + 1);
            let starts = |p: &FuzzyPattern| -> BTreeSet<usize> {
                scan(&text, std::slice::from_ref(p), &t).iter().map(|c| c.span.start).collect()
            };
            prop_assert!(starts(&narrow).is_subset(&starts(&wide)));
        }

        #[test]
        fn pinyin_preserves_length(text in "\\PC{0,24}") {
            prop_assert_eq!(to_pinyin(&text, &fixture_table()).len(), text.chars().count());
        }

        #[test]
        fn disambiguation_only_touches_verdict(
            text in "[傻沙逼比如好。]{1,12}",
            a in 0usize..12,
            len in 1usize..4,
        ) {
            let n = text.chars().count();
            let start = a % n;
            let end = (start + len).min(n);
            let seg = SegmentationLexicon::from_words(["比如", "好比", "沙比"]);
            let before = hit_for(&text, start, end);
            let after = disambiguate(before.clone(), &text, &seg, &banned(&["傻逼"]));
            prop_assert_eq!(after.span, before.span);
            prop_assert_eq!(after.channel, before.channel);
            prop_assert!(after.verdict != Verdict::Pending);
            prop_assert_eq!(after.verdict == Verdict::Confirmed, after.suppression_reason.is_none());
        }

        #[test]
        fn detection_ignores_bank_order(
            texts in prop::collection::vec("[傻沙逼比如好X]{0,10}", 1..5),
            seeds in prop::collection::vec("[傻逼比沙]{1,2}", 1..4),
        ) {
            let mut seeds = seeds;
            let rec = record(&texts.iter().map(String::as_str).collect::<Vec<_>>());
            let seg = SegmentationLexicon::from_words(["比如"]);
            let t = fixture_table();
            let forward = BannedWordBank {
                config: Default::default(),
                provenance: vec![],
                entries: { seeds.sort(); seeds.dedup(); seeds.iter().cloned().map(BankEntry::seed).collect() },
            };
            let mut reversed = forward.clone();
            reversed.entries.reverse();
            prop_assert_eq!(detect(&rec, &forward, &t, &seg, 1), detect(&rec, &reversed, &t, &seg, 1));
        }
    }
}
