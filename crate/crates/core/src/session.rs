//! Session ingestion: PCM16 WAV decoding and manifest loading.
//!
//! A session manifest is a JSON document referencing one WAV file per speaker
//! role plus the ASR transcript segments inline:
//!
//! ```json
//! {"session_id": "s1", "subject": "math", "instructor_id": "t1", "student_id": "p1",
//!  "duration_s": 60.0,
//!  "tracks": [{"role": "instructor", "wav_path": "s1_teacher.wav"}],
//!  "segments": [{"role": "instructor", "start_s": 0.0, "end_s": 2.5,
//!                "text": "...", "asr_confidence": 0.93}]}
//! ```
//!
//! Relative `wav_path`s resolve against the manifest's directory.

use std::fmt;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sample rates accepted by [`decode_wav`].
pub const SUPPORTED_SAMPLE_RATES: [u32; 4] = [8000, 16000, 44100, 48000];

const PCM16_SCALE: f64 = 32768.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed wav: {0}")]
    Decode(String),
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Instructor,
    Student,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Instructor => "instructor",
            Role::Student => "student",
        })
    }
}

/// Decoded mono audio for one speaker role, amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioTrack {
    pub role: Role,
    pub sample_rate_hz: u32,
    pub samples: Vec<f64>,
}

impl AudioTrack {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptSegment {
    pub role: Role,
    pub start_s: f64,
    pub end_s: f64,
    #[serde(default)]
    pub text: String,
    pub asr_confidence: f64,
}

/// One recorded class session, validated.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub session_id: String,
    pub subject: String,
    pub instructor_id: String,
    pub student_id: String,
    pub duration_s: f64,
    pub tracks: Vec<AudioTrack>,
    /// Sorted by `start_s`.
    pub segments: Vec<TranscriptSegment>,
}

impl SessionRecord {
    pub fn track(&self, role: Role) -> Option<&AudioTrack> {
        self.tracks.iter().find(|t| t.role == role)
    }

    /// Builds a record from parts, re-sorting segments and checking every invariant.
    pub fn new(
        session_id: impl Into<String>,
        subject: impl Into<String>,
        instructor_id: impl Into<String>,
        student_id: impl Into<String>,
        duration_s: f64,
        tracks: Vec<AudioTrack>,
        segments: Vec<TranscriptSegment>,
    ) -> Result<Self, IngestError> {
        let mut record = SessionRecord {
            session_id: session_id.into(),
            subject: subject.into(),
            instructor_id: instructor_id.into(),
            student_id: student_id.into(),
            duration_s,
            tracks,
            segments,
        };
        record.validate_and_sort()?;
        Ok(record)
    }

    fn validate_and_sort(&mut self) -> Result<(), IngestError> {
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return Err(IngestError::Validation(format!(
                "duration_s must be a finite value >= 0, got {}",
                self.duration_s
            )));
        }
        for (i, track) in self.tracks.iter().enumerate() {
            if self.tracks[..i].iter().any(|t| t.role == track.role) {
                return Err(IngestError::Validation(format!(
                    "more than one {} track",
                    track.role
                )));
            }
            if let Some(bad) = track
                .samples
                .iter()
                .position(|s| !s.is_finite() || s.abs() > 1.0)
            {
                return Err(IngestError::Validation(format!(
                    "{} track sample {bad} outside [-1, 1]",
                    track.role
                )));
            }
        }

        // Original manifest positions are kept so errors can name the segment the
        // operator wrote, not its sorted position.
        let mut indexed: Vec<(usize, TranscriptSegment)> =
            std::mem::take(&mut self.segments).into_iter().enumerate().collect();
        for (i, seg) in &indexed {
            let bounds_ok = seg.start_s.is_finite()
                && seg.end_s.is_finite()
                && seg.start_s >= 0.0
                && seg.start_s < seg.end_s;
            if !bounds_ok {
                return Err(IngestError::Validation(format!(
                    "segment {i}: requires 0 <= start_s < end_s, got [{}, {}]",
                    seg.start_s, seg.end_s
                )));
            }
            if seg.end_s > self.duration_s {
                return Err(IngestError::Validation(format!(
                    "segment {i}: end_s {} exceeds duration_s {}",
                    seg.end_s, self.duration_s
                )));
            }
            if !(0.0..=1.0).contains(&seg.asr_confidence) {
                return Err(IngestError::Validation(format!(
                    "segment {i}: asr_confidence {} outside [0, 1]",
                    seg.asr_confidence
                )));
            }
        }
        indexed.sort_by(|a, b| a.1.start_s.total_cmp(&b.1.start_s));

        for role in [Role::Instructor, Role::Student] {
            let mut prev: Option<&(usize, TranscriptSegment)> = None;
            for cur in indexed.iter().filter(|(_, s)| s.role == role) {
                if let Some(p) = prev {
                    if cur.1.start_s < p.1.end_s {
                        return Err(IngestError::Validation(format!(
                            "segment {} ({role} [{}, {}]) overlaps segment {} ([{}, {}])",
                            cur.0, cur.1.start_s, cur.1.end_s, p.0, p.1.start_s, p.1.end_s
                        )));
                    }
                }
                prev = Some(cur);
            }
        }
        self.segments = indexed.into_iter().map(|(_, s)| s).collect();
        Ok(())
    }
}

/// Decodes a mono PCM16 little-endian RIFF/WAVE container.
pub fn decode_wav(bytes: &[u8], role: Role) -> Result<AudioTrack, IngestError> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(map_hound_error)?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(IngestError::UnsupportedFormat(format!(
            "{:?} {}-bit samples (only PCM16 is supported)",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.channels != 1 {
        return Err(IngestError::UnsupportedFormat(format!(
            "{} channels (only mono is supported)",
            spec.channels
        )));
    }
    if !SUPPORTED_SAMPLE_RATES.contains(&spec.sample_rate) {
        return Err(IngestError::UnsupportedFormat(format!(
            "sample rate {} Hz",
            spec.sample_rate
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / PCM16_SCALE))
        .collect::<Result<Vec<_>, _>>()
        .map_err(map_hound_error)?;
    Ok(AudioTrack {
        role,
        sample_rate_hz: spec.sample_rate,
        samples,
    })
}

/// Encodes amplitudes as mono PCM16; values are clamped to the representable range.
pub fn encode_wav(samples: &[f64], sample_rate_hz: u32) -> Result<Vec<u8>, IngestError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut out = Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut out, spec).map_err(map_hound_error)?;
        for &s in samples {
            let q = (s * PCM16_SCALE).round().clamp(-PCM16_SCALE, PCM16_SCALE - 1.0) as i16;
            writer.write_sample(q).map_err(map_hound_error)?;
        }
        writer.finalize().map_err(map_hound_error)?;
    }
    Ok(out.into_inner())
}

fn map_hound_error(err: hound::Error) -> IngestError {
    match err {
        hound::Error::Unsupported => IngestError::UnsupportedFormat("codec".into()),
        hound::Error::FormatError(msg) => IngestError::Decode(msg.to_string()),
        hound::Error::IoError(e) => IngestError::Decode(e.to_string()),
        other => IngestError::Decode(other.to_string()),
    }
}

/// Wire form of a session manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub session_id: String,
    pub subject: String,
    pub instructor_id: String,
    pub student_id: String,
    pub duration_s: f64,
    #[serde(default)]
    pub tracks: Vec<TrackRef>,
    #[serde(default)]
    pub segments: Vec<TranscriptSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackRef {
    pub role: Role,
    pub wav_path: PathBuf,
}

impl Manifest {
    pub fn from_json(bytes: &[u8]) -> Result<Self, IngestError> {
        serde_json::from_slice(bytes).map_err(|e| IngestError::Manifest(e.to_string()))
    }

    /// Reads the referenced audio and validates the result.
    pub fn resolve(self, base_dir: &Path) -> Result<SessionRecord, IngestError> {
        let mut tracks = Vec::with_capacity(self.tracks.len());
        for t in &self.tracks {
            let path = base_dir.join(&t.wav_path);
            let bytes = std::fs::read(&path).map_err(|source| IngestError::Io {
                path: path.clone(),
                source,
            })?;
            tracks.push(decode_wav(&bytes, t.role)?);
        }
        SessionRecord::new(
            self.session_id,
            self.subject,
            self.instructor_id,
            self.student_id,
            self.duration_s,
            tracks,
            self.segments,
        )
    }
}

/// Loads and validates the session described by a manifest file.
pub fn load_session(manifest_path: &Path) -> Result<SessionRecord, IngestError> {
    let bytes = std::fs::read(manifest_path).map_err(|source| IngestError::Io {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    Manifest::from_json(&bytes)?.resolve(base)
}
