//! Transcript-derived session features.
//!
//! Word segmentation is dictionary-driven forward maximum matching; the same
//! [`SegmentationLexicon`] is reused by the detector to veto candidates that
//! sit inside benign words.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{Role, SessionRecord};

/// Characters that end a sentence.
pub const SENTENCE_TERMINATORS: &[char] = &['。', '！', '？', '!', '?', '.', ';', '；', '…'];
pub const QUESTION_MARKS: &[char] = &['？', '?'];
/// Sentence-final particles that mark a question without a question mark.
pub const QUESTION_PARTICLES: &[char] = &['吗', '呢'];

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid subject lexicon: {0}")]
    Json(#[from] serde_json::Error),
    #[error("empty word in subject lexicon for {0:?}")]
    EmptyWord(String),
}

fn read_to_string(path: &Path) -> Result<String, LexiconError> {
    std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Dictionary for forward maximum matching.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SegmentationLexicon {
    words: HashSet<String>,
    max_word_len: usize,
}

impl SegmentationLexicon {
    /// Empty strings are dropped.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: HashSet<String> = words
            .into_iter()
            .map(Into::into)
            .filter(|w: &String| !w.is_empty())
            .collect();
        let max_word_len = words.iter().map(|w| w.chars().count()).max().unwrap_or(0);
        SegmentationLexicon {
            words,
            max_word_len,
        }
    }

    /// One word per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        Self::from_words(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Ok(Self::parse(&read_to_string(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn max_word_len(&self) -> usize {
        self.max_word_len
    }

    /// Tokens with their character spans.
    pub fn segment_spans<'a>(&self, text: &'a str) -> Vec<Token<'a>> {
        let bounds: Vec<usize> = text
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(text.len()))
            .collect();
        let n_chars = bounds.len() - 1;
        let mut tokens = Vec::new();
        let mut pos = 0;
        while pos < n_chars {
            let longest = self.max_word_len.min(n_chars - pos);
            let len = (2..=longest)
                .rev()
                .find(|&len| self.words.contains(&text[bounds[pos]..bounds[pos + len]]))
                .unwrap_or(1);
            tokens.push(Token {
                text: &text[bounds[pos]..bounds[pos + len]],
                char_start: pos,
                char_end: pos + len,
            });
            pos += len;
        }
        tokens
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub char_start: usize,
    pub char_end: usize,
}

/// Forward maximum matching: the longest lexicon word at each position, or a
/// single character when none starts there. Tokens concatenate to `text`.
pub fn segment_words<'a>(text: &'a str, lexicon: &SegmentationLexicon) -> Vec<&'a str> {
    lexicon.segment_spans(text).into_iter().map(|t| t.text).collect()
}

/// Subject tag → subject-related words.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubjectLexicon {
    subjects: HashMap<String, HashSet<String>>,
}

impl SubjectLexicon {
    pub fn from_json(text: &str) -> Result<Self, LexiconError> {
        let lex: SubjectLexicon = serde_json::from_str(text)?;
        for (subject, words) in &lex.subjects {
            if words.iter().any(String::is_empty) {
                return Err(LexiconError::EmptyWord(subject.clone()));
            }
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::from_json(&read_to_string(path)?)
    }

    pub fn insert<I, S>(&mut self, subject: impl Into<String>, words: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.subjects
            .entry(subject.into())
            .or_default()
            .extend(words.into_iter().map(Into::into).filter(|w: &String| !w.is_empty()));
    }

    pub fn words(&self, subject: &str) -> Option<&HashSet<String>> {
        self.subjects.get(subject)
    }
}

/// Transcript statistics for one session; see [`LinguisticFeatures::SCHEMA`]
/// for the feature order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinguisticFeatures {
    pub n_chars: usize,
    pub n_words: usize,
    pub n_sentences: usize,
    pub n_subject_words: usize,
    pub instructor_char_share: f64,
    pub turn_count: usize,
    pub mean_utterance_chars: f64,
    pub question_count: usize,
    /// The session's subject tag had no entry in the subject lexicon.
    #[serde(default)]
    pub unknown_subject: bool,
}

impl LinguisticFeatures {
    pub const SCHEMA: [&'static str; 8] = [
        "n_chars",
        "n_words",
        "n_sentences",
        "n_subject_words",
        "instructor_char_share",
        "turn_count",
        "mean_utterance_chars",
        "question_count",
    ];

    pub fn values(&self) -> [f64; 8] {
        [
            self.n_chars as f64,
            self.n_words as f64,
            self.n_sentences as f64,
            self.n_subject_words as f64,
            self.instructor_char_share,
            self.turn_count as f64,
            self.mean_utterance_chars,
            self.question_count as f64,
        ]
    }
}

/// Number of maximal terminator runs that follow some sentence content.
pub fn count_sentences(text: &str) -> usize {
    let mut count = 0;
    let mut in_content = false;
    for c in text.chars() {
        if SENTENCE_TERMINATORS.contains(&c) {
            if in_content {
                count += 1;
            }
            in_content = false;
        } else if !c.is_whitespace() {
            in_content = true;
        }
    }
    count
}

/// True if the text contains a question mark or a question particle that ends
/// a sentence.
pub fn is_question(text: &str) -> bool {
    if text.contains(QUESTION_MARKS) {
        return true;
    }
    let chars: Vec<char> = text.chars().collect();
    chars.iter().enumerate().any(|(i, c)| {
        QUESTION_PARTICLES.contains(c)
            && chars[i + 1..]
                .iter()
                .find(|c| !c.is_whitespace())
                .is_none_or(|next| SENTENCE_TERMINATORS.contains(next))
    })
}

fn non_whitespace_chars(text: &str) -> usize {
    text.chars().filter(|c| !c.is_whitespace()).count()
}

pub fn extract_linguistic(
    record: &SessionRecord,
    seg: &SegmentationLexicon,
    subj: &SubjectLexicon,
) -> LinguisticFeatures {
    let mut segments: Vec<_> = record.segments.iter().collect();
    segments.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));

    let subject_words = subj.words(&record.subject);
    let mut f = LinguisticFeatures {
        unknown_subject: subject_words.is_none(),
        ..Default::default()
    };
    let mut instructor_chars = 0;
    let mut utterances = 0;
    let mut prev_role: Option<Role> = None;

    for s in segments {
        let chars = non_whitespace_chars(&s.text);
        f.n_chars += chars;
        if s.role == Role::Instructor {
            instructor_chars += chars;
        }
        if chars > 0 {
            utterances += 1;
        }
        for token in segment_words(&s.text, seg) {
            if token.chars().all(char::is_whitespace) {
                continue;
            }
            f.n_words += 1;
            if subject_words.is_some_and(|w| w.contains(token)) {
                f.n_subject_words += 1;
            }
        }
        f.n_sentences += count_sentences(&s.text);
        if is_question(&s.text) {
            f.question_count += 1;
        }
        if prev_role.is_some_and(|r| r != s.role) {
            f.turn_count += 1;
        }
        prev_role = Some(s.role);
    }

    f.instructor_char_share = instructor_chars as f64 / f.n_chars.max(1) as f64;
    f.mean_utterance_chars = if utterances == 0 {
        0.0
    } else {
        f.n_chars as f64 / utterances as f64
    };
    f
}
