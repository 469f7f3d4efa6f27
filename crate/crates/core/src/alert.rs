//! Alerts, reviewer verdicts and the append-only event log behind them.
//!
//! Every state change is an [`Event`] written as one JSON line. The in-memory
//! [`StoreState`] is a fold over those events, so reopening a log reproduces
//! exactly the state that wrote it. A torn final line (crash mid-append) is
//! dropped on open.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{DetectionHit, Detector};
use crate::linguistic::{extract_linguistic, LinguisticFeatures, SegmentationLexicon, SubjectLexicon};
use crate::prosodic::{extract_prosodic, ProsodicConfig};
use crate::quality::{assemble_features, predict_proba, FeatureBlock, FeatureMode, FeatureVector, LogisticModel};
use crate::session::{load_session, Role, SessionRecord};

pub const SUPERSEDED_REASON: &str = "superseded";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("event log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("alert {0} not found")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("no judged alerts yet")]
    InsufficientData,
    #[error("invalid alert rule: {0}")]
    InvalidRule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlertRule {
    pub quality_threshold: f64,
    pub fire_on_banned: bool,
}

impl Default for AlertRule {
    fn default() -> Self {
        AlertRule {
            quality_threshold: 0.5,
            fire_on_banned: true,
        }
    }
}

impl AlertRule {
    pub fn validate(&self) -> Result<(), StoreError> {
        if self.quality_threshold > 0.0 && self.quality_threshold < 1.0 {
            Ok(())
        } else {
            Err(StoreError::InvalidRule(format!(
                "quality threshold {} outside (0, 1)",
                self.quality_threshold
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertKind {
    BannedWord,
    LowQuality,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlertState {
    Open,
    Confirmed,
    Dismissed,
}

impl std::str::FromStr for AlertState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "open" => Ok(AlertState::Open),
            "confirmed" => Ok(AlertState::Confirmed),
            "dismissed" => Ok(AlertState::Dismissed),
            other => Err(format!("unknown alert state {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Judgment {
    TruePositive,
    FalsePositive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewVerdict {
    pub alert_id: String,
    pub reviewer_id: String,
    pub judgment: Judgment,
    #[serde(default)]
    pub note: String,
    pub reviewed_at: DateTime<Utc>,
}

/// Transcript segment quoted as context for a hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Excerpt {
    pub segment_index: usize,
    pub role: Role,
    pub start_s: f64,
    pub end_s: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evidence {
    /// Confirmed detector hits only.
    pub hits: Vec<DetectionHit>,
    pub quality_proba: f64,
    pub features: FeatureVector<f64>,
    pub excerpts: Vec<Excerpt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Alert {
    /// `{session_id}-v{version}`.
    pub alert_id: String,
    pub session_id: String,
    pub version: u32,
    pub kind: AlertKind,
    pub evidence: Evidence,
    pub state: AlertState,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub verdict: Option<ReviewVerdict>,
    /// Set when the alert was closed without a verdict.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dismissal_reason: Option<String>,
}

impl Alert {
    pub fn is_superseded(&self) -> bool {
        self.dismissal_reason.as_deref() == Some(SUPERSEDED_REASON)
    }
}

/// Which rule conditions hold. Fires on a confirmed hit (when enabled) or a
/// quality probability strictly below the threshold.
pub fn assess(hits: &[DetectionHit], quality_proba: f64, rule: &AlertRule) -> Option<AlertKind> {
    debug_assert!((0.0..=1.0).contains(&quality_proba));
    let banned = rule.fire_on_banned && !hits.is_empty();
    let low = quality_proba < rule.quality_threshold;
    match (banned, low) {
        (true, true) => Some(AlertKind::Both),
        (true, false) => Some(AlertKind::BannedWord),
        (false, true) => Some(AlertKind::LowQuality),
        (false, false) => None,
    }
}

/// Derived per-session results kept alongside alerts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionArtifact {
    pub session_id: String,
    pub features: FeatureVector<f64>,
    pub hits: Vec<DetectionHit>,
    pub quality_proba: f64,
    pub assessment: Option<AlertKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    AlertCreated {
        at: DateTime<Utc>,
        alert: Alert,
    },
    VerdictRecorded {
        at: DateTime<Utc>,
        verdict: ReviewVerdict,
    },
    AlertSuperseded {
        at: DateTime<Utc>,
        alert_id: String,
        superseded_by: Option<String>,
    },
    ArtifactStored {
        at: DateTime<Utc>,
        artifact: SessionArtifact,
    },
}

/// Alerts and artifacts rebuilt from the event log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StoreState {
    alerts: IndexMap<String, Alert>,
    artifacts: BTreeMap<String, SessionArtifact>,
    versions: BTreeMap<String, u32>,
    events: usize,
}

impl StoreState {
    pub fn fold<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<Self, StoreError> {
        let mut state = StoreState::default();
        for (i, e) in events.into_iter().enumerate() {
            state.apply(e.clone()).map_err(|err| StoreError::Corrupt {
                line: i + 1,
                message: err.to_string(),
            })?;
        }
        Ok(state)
    }

    /// Rejects events that would break an alert invariant.
    pub fn check(&self, event: &Event) -> Result<(), StoreError> {
        match event {
            Event::AlertCreated { alert, .. } => {
                if self.alerts.contains_key(&alert.alert_id) {
                    return Err(StoreError::Conflict(format!("alert {} already exists", alert.alert_id)));
                }
                if alert.state != AlertState::Open || alert.verdict.is_some() {
                    return Err(StoreError::Conflict(format!("alert {} must be created open", alert.alert_id)));
                }
                let consistent = match alert.kind {
                    AlertKind::BannedWord => !alert.evidence.hits.is_empty(),
                    AlertKind::LowQuality => true,
                    AlertKind::Both => !alert.evidence.hits.is_empty(),
                };
                if !consistent {
                    return Err(StoreError::Conflict(format!(
                        "alert {} kind disagrees with its evidence",
                        alert.alert_id
                    )));
                }
                Ok(())
            }
            Event::VerdictRecorded { verdict, .. } => self.require_open(&verdict.alert_id),
            Event::AlertSuperseded { alert_id, .. } => self.require_open(alert_id),
            Event::ArtifactStored { .. } => Ok(()),
        }
    }

    fn require_open(&self, alert_id: &str) -> Result<(), StoreError> {
        match self.alerts.get(alert_id) {
            None => Err(StoreError::NotFound(alert_id.to_string())),
            Some(a) if a.state != AlertState::Open => Err(StoreError::Conflict(format!(
                "alert {alert_id} is already {}",
                serde_json::to_value(a.state).expect("state serializes").as_str().unwrap_or("closed")
            ))),
            Some(_) => Ok(()),
        }
    }

    pub fn apply(&mut self, event: Event) -> Result<(), StoreError> {
        self.check(&event)?;
        match event {
            Event::AlertCreated { alert, .. } => {
                let v = self.versions.entry(alert.session_id.clone()).or_insert(0);
                *v = (*v).max(alert.version);
                self.alerts.insert(alert.alert_id.clone(), alert);
            }
            Event::VerdictRecorded { verdict, .. } => {
                let alert = self.alerts.get_mut(&verdict.alert_id).expect("checked");
                alert.state = match verdict.judgment {
                    Judgment::TruePositive => AlertState::Confirmed,
                    Judgment::FalsePositive => AlertState::Dismissed,
                };
                alert.verdict = Some(verdict);
            }
            Event::AlertSuperseded { alert_id, .. } => {
                let alert = self.alerts.get_mut(&alert_id).expect("checked");
                alert.state = AlertState::Dismissed;
                alert.dismissal_reason = Some(SUPERSEDED_REASON.to_string());
            }
            Event::ArtifactStored { artifact, .. } => {
                self.artifacts.insert(artifact.session_id.clone(), artifact);
            }
        }
        self.events += 1;
        Ok(())
    }

    pub fn event_count(&self) -> usize {
        self.events
    }

    pub fn alert(&self, alert_id: &str) -> Option<&Alert> {
        self.alerts.get(alert_id)
    }

    /// Alerts ordered by creation time (ties keep log order), optionally filtered.
    pub fn alerts(&self, state: Option<AlertState>) -> Vec<&Alert> {
        let mut out: Vec<&Alert> = self
            .alerts
            .values()
            .filter(|a| state.is_none_or(|s| a.state == s))
            .collect();
        out.sort_by_key(|a| a.created_at);
        out
    }

    pub fn artifact(&self, session_id: &str) -> Option<&SessionArtifact> {
        self.artifacts.get(session_id)
    }

    pub fn artifacts(&self) -> impl Iterator<Item = &SessionArtifact> {
        self.artifacts.values()
    }

    /// The session's most recent alert that has not been superseded.
    pub fn current_alert(&self, session_id: &str) -> Option<&Alert> {
        self.alerts
            .values()
            .rev()
            .find(|a| a.session_id == session_id && !a.is_superseded())
    }

    pub fn next_version(&self, session_id: &str) -> u32 {
        self.versions.get(session_id).copied().unwrap_or(0) + 1
    }

    pub fn alerting_accuracy(&self) -> Result<AccuracyReport, StoreError> {
        let (confirmed, dismissed) = self.judged_counts();
        if confirmed + dismissed == 0 {
            return Err(StoreError::InsufficientData);
        }
        Ok(AccuracyReport {
            accuracy: confirmed as f64 / (confirmed + dismissed) as f64,
            confirmed,
            dismissed,
        })
    }

    fn judged_counts(&self) -> (usize, usize) {
        let mut confirmed = 0;
        let mut dismissed = 0;
        for a in self.alerts.values() {
            match a.verdict.as_ref().map(|v| v.judgment) {
                Some(Judgment::TruePositive) => confirmed += 1,
                Some(Judgment::FalsePositive) => dismissed += 1,
                None => {}
            }
        }
        (confirmed, dismissed)
    }

    /// Among sessions with a judged alert, the share whose latest judged
    /// alert was confirmed.
    pub fn session_accuracy(&self) -> Option<f64> {
        let mut latest: BTreeMap<&str, &Alert> = BTreeMap::new();
        for a in self.alerts.values().filter(|a| a.verdict.is_some()) {
            let slot = latest.entry(a.session_id.as_str()).or_insert(a);
            if a.version > slot.version {
                *slot = a;
            }
        }
        if latest.is_empty() {
            return None;
        }
        let good = latest.values().filter(|a| a.state == AlertState::Confirmed).count();
        Some(good as f64 / latest.len() as f64)
    }

    pub fn metrics(&self) -> Metrics {
        let (confirmed, dismissed) = self.judged_counts();
        Metrics {
            alerting_accuracy: self.alerting_accuracy().ok().map(|r| r.accuracy),
            confirmed,
            dismissed,
            open: self.alerts.values().filter(|a| a.state == AlertState::Open).count(),
            sessions_processed: self.artifacts.len(),
            session_accuracy: self.session_accuracy(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub accuracy: f64,
    pub confirmed: usize,
    pub dismissed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    /// Per alert; `None` until an alert is judged.
    pub alerting_accuracy: Option<f64>,
    pub confirmed: usize,
    pub dismissed: usize,
    pub open: usize,
    pub sessions_processed: usize,
    /// Per session roll-up of the same judgments.
    pub session_accuracy: Option<f64>,
}

type Clock = Box<dyn Fn() -> DateTime<Utc> + Send + Sync>;

/// Single-writer event store, optionally backed by a JSONL file.
pub struct AlertStore {
    path: Option<PathBuf>,
    file: Option<File>,
    state: StoreState,
    clock: Clock,
}

impl std::fmt::Debug for AlertStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AlertStore")
            .field("path", &self.path)
            .field("state", &self.state)
            .finish_non_exhaustive()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Parses a log, returning the events and the byte length of the valid
/// prefix. Only an unterminated final line may fail to parse.
pub fn parse_log(text: &str) -> Result<(Vec<Event>, usize), StoreError> {
    let mut events = Vec::new();
    let mut offset = 0;
    let mut valid = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        offset += line.len();
        let terminated = line.ends_with('\n');
        let body = line.trim_end_matches(['\n', '\r']);
        if body.trim().is_empty() {
            if terminated {
                valid = offset;
            }
            continue;
        }
        match serde_json::from_str::<Event>(body) {
            Ok(e) if terminated => {
                events.push(e);
                valid = offset;
            }
            Ok(_) | Err(_) if !terminated => {
                log::warn!("dropping torn trailing event on line {}", i + 1);
            }
            Err(e) => {
                return Err(StoreError::Corrupt {
                    line: i + 1,
                    message: e.to_string(),
                })
            }
            Ok(_) => unreachable!(),
        }
    }
    Ok((events, valid))
}

impl AlertStore {
    pub fn in_memory() -> Self {
        AlertStore {
            path: None,
            file: None,
            state: StoreState::default(),
            clock: Box::new(Utc::now),
        }
    }

    /// Opens (creating if needed) and replays a log. A torn final line is
    /// truncated away.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let text = match std::fs::read(&path) {
            Ok(bytes) => String::from_utf8_lossy(&bytes).into_owned(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let (events, valid) = parse_log(&text)?;
        let state = StoreState::fold(&events)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        if valid < text.len() {
            file.set_len(valid as u64).map_err(io_err(&path))?;
        }
        Ok(AlertStore {
            path: Some(path),
            file: Some(file),
            state,
            clock: Box::new(Utc::now),
        })
    }

    pub fn with_clock(mut self, clock: impl Fn() -> DateTime<Utc> + Send + Sync + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    pub fn now(&self) -> DateTime<Utc> {
        (self.clock)()
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn state(&self) -> &StoreState {
        &self.state
    }

    /// Validates, persists in one write, then applies. Either every event
    /// lands or none does.
    pub fn append(&mut self, events: Vec<Event>) -> Result<(), StoreError> {
        let mut next = self.state.clone();
        for e in &events {
            next.apply(e.clone())?;
        }
        if let (Some(file), Some(path)) = (self.file.as_mut(), self.path.as_ref()) {
            let mut buf = Vec::new();
            for e in &events {
                serde_json::to_writer(&mut buf, e).expect("event serializes");
                buf.push(b'\n');
            }
            file.write_all(&buf).map_err(io_err(path))?;
            file.sync_data().map_err(io_err(path))?;
        }
        self.state = next;
        Ok(())
    }

    pub fn record_verdict(&mut self, verdict: ReviewVerdict) -> Result<Alert, StoreError> {
        let alert_id = verdict.alert_id.clone();
        self.state.require_open(&alert_id)?;
        self.append(vec![Event::VerdictRecorded {
            at: self.now(),
            verdict,
        }])?;
        Ok(self.state.alert(&alert_id).expect("just judged").clone())
    }

    pub fn alerting_accuracy(&self) -> Result<AccuracyReport, StoreError> {
        self.state.alerting_accuracy()
    }

    pub fn metrics(&self) -> Metrics {
        self.state.metrics()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Features,
    Detect,
    Predict,
    Persist,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        f.write_str(s.as_str().unwrap_or("unknown"))
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

impl PipelineError {
    fn at(stage: Stage) -> impl FnOnce(String) -> PipelineError {
        move |message| PipelineError { stage, message }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub session_id: String,
    /// The session's current alert, fresh or carried over.
    pub alert: Option<Alert>,
    pub artifact: SessionArtifact,
    /// False when the stored artifact already matched and nothing was written.
    pub changed: bool,
}

/// Everything needed to turn a session into an optional alert.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub detector: Detector,
    pub segmentation: SegmentationLexicon,
    pub subjects: SubjectLexicon,
    pub model: LogisticModel<f64>,
    pub rule: AlertRule,
    pub prosodic: ProsodicConfig,
}

impl Pipeline {
    /// Features in the model's schema; audio is only read when the model
    /// uses prosodic features.
    pub fn features(&self, record: &SessionRecord) -> Result<FeatureVector<f64>, PipelineError> {
        let features = PipelineError::at(Stage::Features);
        let ling = extract_linguistic(record, &self.segmentation, &self.subjects);
        if ling.unknown_subject {
            log::warn!("session {}: subject {:?} not in lexicon", record.session_id, record.subject);
        }
        let mode = self.model.mode();
        let full = if mode.includes(FeatureBlock::Prosodic) {
            let pros = extract_prosodic::<f64>(record, &self.prosodic).map_err(|e| features(e.to_string()))?;
            assemble_features(&record.session_id, &ling, &pros, FeatureMode::Combined)
        } else {
            FeatureVector::new(
                record.session_id.clone(),
                LinguisticFeatures::SCHEMA.iter().map(|s| s.to_string()).collect(),
                ling.values().to_vec(),
            )
        };
        let full = full.map_err(|e| PipelineError::at(Stage::Features)(e.to_string()))?;
        full.select(&self.model.schema)
            .map_err(|e| PipelineError::at(Stage::Features)(e.to_string()))
    }

    /// Pure analysis: nothing is written.
    pub fn analyze(&self, record: &SessionRecord) -> Result<SessionArtifact, PipelineError> {
        self.rule
            .validate()
            .map_err(|e| PipelineError::at(Stage::Predict)(e.to_string()))?;
        let features = self.features(record)?;
        let hits = self.detector.detect(record);
        let quality_proba = predict_proba(&self.model, &features)
            .map_err(|e| PipelineError::at(Stage::Predict)(e.to_string()))?;
        let assessment = assess(&hits, quality_proba, &self.rule);
        Ok(SessionArtifact {
            session_id: record.session_id.clone(),
            features,
            hits,
            quality_proba,
            assessment,
        })
    }

    /// Analyzes and persists. Re-running on unchanged inputs writes nothing;
    /// changed results replace the artifact and supersede the open alert.
    pub fn run_record(
        &self,
        store: &mut AlertStore,
        record: &SessionRecord,
    ) -> Result<RunOutcome, PipelineError> {
        let artifact = self.analyze(record)?;
        commit(store, record, artifact)
    }

    pub fn run_manifest(&self, store: &mut AlertStore, manifest: &Path) -> Result<RunOutcome, PipelineError> {
        let record = load_session(manifest).map_err(|e| PipelineError::at(Stage::Ingest)(e.to_string()))?;
        self.run_record(store, &record)
    }
}

/// Persists an artifact from [`Pipeline::analyze`]. Kept separate so callers
/// can analyze without holding the store.
pub fn commit(
    store: &mut AlertStore,
    record: &SessionRecord,
    artifact: SessionArtifact,
) -> Result<RunOutcome, PipelineError> {
    let session_id = record.session_id.clone();
    if store.state().artifact(&session_id) == Some(&artifact) {
        return Ok(RunOutcome {
            alert: store.state().current_alert(&session_id).cloned(),
            session_id,
            artifact,
            changed: false,
        });
    }

    let now = store.now();
    let new_alert = artifact.assessment.map(|kind| {
        let version = store.state().next_version(&session_id);
        Alert {
            alert_id: format!("{session_id}-v{version}"),
            session_id: session_id.clone(),
            version,
            kind,
            evidence: Evidence {
                hits: artifact.hits.clone(),
                quality_proba: artifact.quality_proba,
                features: artifact.features.clone(),
                excerpts: excerpts(record, &artifact.hits),
            },
            state: AlertState::Open,
            created_at: now,
            verdict: None,
            dismissal_reason: None,
        }
    });

    let mut events = vec![Event::ArtifactStored {
        at: now,
        artifact: artifact.clone(),
    }];
    let open_ids: Vec<String> = store
        .state()
        .alerts(Some(AlertState::Open))
        .into_iter()
        .filter(|a| a.session_id == session_id)
        .map(|a| a.alert_id.clone())
        .collect();
    for alert_id in open_ids {
        events.push(Event::AlertSuperseded {
            at: now,
            alert_id,
            superseded_by: new_alert.as_ref().map(|a| a.alert_id.clone()),
        });
    }
    if let Some(alert) = &new_alert {
        events.push(Event::AlertCreated {
            at: now,
            alert: alert.clone(),
        });
    }
    store
        .append(events)
        .map_err(|e| PipelineError::at(Stage::Persist)(e.to_string()))?;
    Ok(RunOutcome {
        alert: new_alert.or_else(|| store.state().current_alert(&session_id).cloned()),
        session_id,
        artifact,
        changed: true,
    })
}

fn excerpts(record: &SessionRecord, hits: &[DetectionHit]) -> Vec<Excerpt> {
    let indices: BTreeSet<usize> = hits.iter().map(|h| h.segment_index).collect();
    indices
        .into_iter()
        .filter_map(|i| record.segments.get(i).map(|s| (i, s)))
        .map(|(i, s)| Excerpt {
            segment_index: i,
            role: s.role,
            start_s: s.start_s,
            end_s: s.end_s,
            text: s.text.clone(),
        })
        .collect()
}
