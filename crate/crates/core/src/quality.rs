//! Logistic-regression class quality model.
//!
//! Features are standardized, then the weighted, L2-regularized logistic loss
//!
//! ```text
//! L(w, b) = -(1/N) Σ cᵢ [yᵢ log pᵢ + (1 - yᵢ) log(1 - pᵢ)] + λ‖w‖²,   pᵢ = σ(wᵀx̃ᵢ + b)
//! ```
//!
//! is minimized by full-batch gradient descent from `w = 0, b = 0`. A step that
//! would raise the loss is halved until it does not. `cᵢ` is `N / (2·N_c)` for
//! the example's class when class weighting is on, 1 otherwise.
//!
//! The positive class is "good" (label 1).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linguistic::LinguisticFeatures;
use crate::prosodic::ProsodicFeatures;
use crate::scalar::{mean, population_std, Scalar};

const MAX_HALVINGS: usize = 60;

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("cannot split: {0}")]
    Split(String),
    #[error("cannot evaluate: {0}")]
    Eval(String),
    #[error("insufficient training data: {0}")]
    InsufficientData(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    LinguisticOnly,
    ProsodicOnly,
    Combined,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 3] = [
        FeatureMode::LinguisticOnly,
        FeatureMode::ProsodicOnly,
        FeatureMode::Combined,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FeatureMode::LinguisticOnly => "Linguistic Only",
            FeatureMode::ProsodicOnly => "Prosodic Only",
            FeatureMode::Combined => "Linguistic + Prosodic",
        }
    }

    pub fn includes(self, block: FeatureBlock) -> bool {
        matches!(
            (self, block),
            (FeatureMode::Combined, _)
                | (FeatureMode::LinguisticOnly, FeatureBlock::Linguistic)
                | (FeatureMode::ProsodicOnly, FeatureBlock::Prosodic)
        )
    }
}

impl FromStr for FeatureMode {
    type Err = QualityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linguistic_only" | "linguistic" => Ok(FeatureMode::LinguisticOnly),
            "prosodic_only" | "prosodic" => Ok(FeatureMode::ProsodicOnly),
            "combined" => Ok(FeatureMode::Combined),
            other => Err(QualityError::Config(format!("unknown feature mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureBlock {
    Linguistic,
    Prosodic,
}

/// Sort key placing a feature name in canonical schema order.
fn canonical_key(name: &str) -> Result<(FeatureBlock, usize), QualityError> {
    if let Some(i) = LinguisticFeatures::SCHEMA.iter().position(|&n| n == name) {
        return Ok((FeatureBlock::Linguistic, i));
    }
    let key = match name {
        "energy_mean" => Some(0),
        "energy_std" => Some(1),
        "loudness_mean" => Some(2),
        "loudness_std" => Some(3),
        "talk_ratio" => Some(usize::MAX - 1),
        "n_frames" => Some(usize::MAX),
        _ => name.strip_prefix("mfcc_").and_then(|rest| {
            let (k, stat) = rest.split_once('_')?;
            let k: usize = k.parse().ok().filter(|&k| k >= 1)?;
            let offset = match stat {
                "mean" => 0,
                "std" => 1,
                _ => return None,
            };
            Some(2 + 2 * k + offset)
        }),
    };
    key.map(|k| (FeatureBlock::Prosodic, k))
        .ok_or_else(|| QualityError::Schema(format!("unknown feature {name:?}")))
}

pub fn feature_block(name: &str) -> Result<FeatureBlock, QualityError> {
    canonical_key(name).map(|(b, _)| b)
}

/// Named, ordered session features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FeatureVector<T> {
    pub session_id: String,
    pub schema: Vec<String>,
    pub values: Vec<T>,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn new(
        session_id: impl Into<String>,
        schema: Vec<String>,
        values: Vec<T>,
    ) -> Result<Self, QualityError> {
        if schema.len() != values.len() {
            return Err(QualityError::Schema(format!(
                "{} names for {} values",
                schema.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(QualityError::Schema(format!("non-finite value for {}", schema[i])));
        }
        Ok(FeatureVector {
            session_id: session_id.into(),
            schema,
            values,
        })
    }

    /// Builds a vector from unordered name/value pairs, in canonical order.
    pub fn from_map(
        session_id: impl Into<String>,
        features: BTreeMap<String, f64>,
    ) -> Result<Self, QualityError> {
        let mut keyed = features
            .into_iter()
            .map(|(name, v)| Ok((canonical_key(&name)?, name, T::of(v))))
            .collect::<Result<Vec<_>, QualityError>>()?;
        keyed.sort_by_key(|(k, _, _)| (k.0 == FeatureBlock::Prosodic, k.1));
        let (schema, values) = keyed.into_iter().map(|(_, n, v)| (n, v)).unzip();
        Self::new(session_id, schema, values)
    }

    pub fn get(&self, name: &str) -> Option<T> {
        self.schema.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reorders/filters to `schema`; every name must be present.
    pub fn select(&self, schema: &[String]) -> Result<Self, QualityError> {
        let values = schema
            .iter()
            .map(|name| {
                self.get(name).ok_or_else(|| {
                    QualityError::Schema(format!("{} lacks feature {name:?}", self.session_id))
                })
            })
            .collect::<Result<Vec<T>, _>>()?;
        Ok(FeatureVector {
            session_id: self.session_id.clone(),
            schema: schema.to_vec(),
            values,
        })
    }

    pub fn project(&self, mode: FeatureMode) -> Result<Self, QualityError> {
        let mut schema = Vec::new();
        let mut values = Vec::new();
        for (name, &v) in self.schema.iter().zip(&self.values) {
            if mode.includes(feature_block(name)?) {
                schema.push(name.clone());
                values.push(v);
            }
        }
        Ok(FeatureVector {
            session_id: self.session_id.clone(),
            schema,
            values,
        })
    }
}

/// Linguistic block then prosodic block, filtered by `mode`.
pub fn assemble_features<T: Scalar>(
    session_id: &str,
    ling: &LinguisticFeatures,
    pros: &ProsodicFeatures<T>,
    mode: FeatureMode,
) -> Result<FeatureVector<T>, QualityError> {
    let mut schema = Vec::new();
    let mut values = Vec::new();
    if mode.includes(FeatureBlock::Linguistic) {
        schema.extend(LinguisticFeatures::SCHEMA.iter().map(|s| s.to_string()));
        values.extend(ling.values().into_iter().map(T::of));
    }
    if mode.includes(FeatureBlock::Prosodic) {
        schema.extend(pros.names());
        values.extend(pros.values());
    }
    FeatureVector::new(session_id, schema, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LabeledExample<T> {
    pub features: FeatureVector<T>,
    /// `true` = good class.
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset<T> {
    pub rows: Vec<LabeledExample<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetLine {
    session_id: String,
    label: u8,
    features: BTreeMap<String, f64>,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(rows: Vec<LabeledExample<T>>) -> Result<Self, QualityError> {
        if let Some(first) = rows.first() {
            if let Some(bad) = rows.iter().find(|r| r.features.schema != first.features.schema) {
                return Err(QualityError::Schema(format!(
                    "row {} schema differs from row {}",
                    bad.features.session_id, first.features.session_id
                )));
            }
        }
        Ok(LabeledDataset { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn schema(&self) -> &[String] {
        self.rows.first().map_or(&[], |r| r.features.schema.as_slice())
    }

    pub fn count(&self, label: bool) -> usize {
        self.rows.iter().filter(|r| r.label == label).count()
    }

    pub fn project(&self, mode: FeatureMode) -> Result<Self, QualityError> {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                Ok(LabeledExample {
                    features: r.features.project(mode)?,
                    label: r.label,
                })
            })
            .collect::<Result<_, QualityError>>()?;
        Ok(LabeledDataset { rows })
    }

    /// JSON lines: `{"session_id", "label": 0|1, "features": {name: value}}`.
    pub fn from_jsonl(text: &str) -> Result<Self, QualityError> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| QualityError::Parse {
                line: i + 1,
                message,
            };
            let parsed: DatasetLine = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            let label = match parsed.label {
                0 => false,
                1 => true,
                other => return Err(err(format!("label must be 0 or 1, got {other}"))),
            };
            let features = FeatureVector::from_map(parsed.session_id, parsed.features)
                .map_err(|e| err(e.to_string()))?;
            rows.push(LabeledExample { features, label });
        }
        Self::new(rows)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let line = DatasetLine {
                session_id: r.features.session_id.clone(),
                label: u8::from(r.label),
                features: r
                    .features
                    .schema
                    .iter()
                    .cloned()
                    .zip(r.features.values.iter().map(|v| v.as_f64()))
                    .collect(),
            };
            out.push_str(&serde_json::to_string(&line).expect("dataset line serializes"));
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self, QualityError> {
        let text = std::fs::read_to_string(path).map_err(|source| QualityError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_jsonl(&text)
    }
}

/// Stratified split: each class is shuffled with `seed` and
/// `round(train_fraction · N_c)` of its rows go to training. Both halves keep
/// the original row order.
pub fn split<T: Scalar>(
    data: &LabeledDataset<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset<T>, LabeledDataset<T>), QualityError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(QualityError::Split(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; data.len()];
    for label in [true, false] {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.rows[i].label == label).collect();
        if idx.len() < 2 {
            return Err(QualityError::Split(format!(
                "class {} has {} member(s); need at least 2",
                u8::from(label),
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n_train = (train_fraction * idx.len() as f64).round() as usize;
        for &i in &idx[..n_train] {
            in_train[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (row, &t) in data.rows.iter().zip(&in_train) {
        if t {
            train.push(row.clone());
        } else {
            test.push(row.clone());
        }
    }
    Ok((LabeledDataset { rows: train }, LabeledDataset { rows: test }))
}

/// Per-feature centering and scaling fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    /// Scale is the population standard deviation; degenerate features get 1.
    pub fn fit(rows: &[Vec<T>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let mut mean_v = Vec::with_capacity(dim);
        let mut scale = Vec::with_capacity(dim);
        for j in 0..dim {
            let column: Vec<T> = rows.iter().map(|r| r[j]).collect();
            let m = mean(&column);
            let s = population_std(&column);
            let degenerate = s <= T::epsilon() * T::of(16.0) * m.abs() || s == T::zero();
            mean_v.push(m);
            scale.push(if degenerate { T::one() } else { s });
        }
        Standardizer {
            mean: mean_v,
            scale,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![T::zero(); dim],
            scale: vec![T::one(); dim],
        }
    }

    pub fn transform(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_lambda: f64,
    /// Recorded for reproducibility; full-batch descent itself is deterministic.
    pub seed: u64,
    pub class_weighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 500,
            l2_lambda: 1e-3,
            seed: 0,
            class_weighting: true,
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + eᶻ)` without overflow.
fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

/// Weighted, regularized logistic loss over standardized rows.
#[derive(Debug, Clone)]
pub struct Objective<'a, T> {
    pub rows: &'a [Vec<T>],
    pub labels: &'a [bool],
    pub weights: &'a [T],
    pub l2_lambda: T,
}

impl<T: Scalar> Objective<'_, T> {
    fn margin(w: &[T], b: T, x: &[T]) -> T {
        w.iter().zip(x).map(|(&a, &c)| a * c).sum::<T>() + b
    }

    pub fn loss(&self, w: &[T], b: T) -> T {
        let n = T::of_usize(self.rows.len());
        let data: T = self
            .rows
            .iter()
            .zip(self.labels)
            .zip(self.weights)
            .map(|((x, &y), &c)| {
                let z = Self::margin(w, b, x);
                // -log σ(z) = softplus(-z); -log(1 - σ(z)) = softplus(z)
                c * if y { softplus(-z) } else { softplus(z) }
            })
            .sum();
        data / n + self.l2_lambda * w.iter().map(|&v| v * v).sum::<T>()
    }

    pub fn gradient(&self, w: &[T], b: T) -> (Vec<T>, T) {
        let n = T::of_usize(self.rows.len());
        let mut gw = vec![T::zero(); w.len()];
        let mut gb = T::zero();
        for ((x, &y), &c) in self.rows.iter().zip(self.labels).zip(self.weights) {
            let target = if y { T::one() } else { T::zero() };
            let r = c * (sigmoid(Self::margin(w, b, x)) - target);
            for (g, &xi) in gw.iter_mut().zip(x) {
                *g += r * xi;
            }
            gb += r;
        }
        let two_lambda = T::of(2.0) * self.l2_lambda;
        for (g, &wi) in gw.iter_mut().zip(w) {
            *g = *g / n + two_lambda * wi;
        }
        (gw, gb / n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LogisticModel<T> {
    pub schema: Vec<String>,
    pub weights: Vec<T>,
    pub bias: T,
    pub standardizer: Standardizer<T>,
    pub hyperparams: TrainConfig,
    pub final_loss: T,
}

impl<T: Scalar> LogisticModel<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, QualityError> {
        let model: Self = serde_json::from_str(text).map_err(|e| QualityError::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        let d = model.schema.len();
        let consistent = model.weights.len() == d
            && model.standardizer.mean.len() == d
            && model.standardizer.scale.len() == d
            && model.standardizer.scale.iter().all(|&s| s > T::zero());
        if !consistent {
            return Err(QualityError::Schema("model dimensions are inconsistent".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), QualityError> {
        std::fs::write(path, self.to_json()).map_err(|source| QualityError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, QualityError> {
        let text = std::fs::read_to_string(path).map_err(|source| QualityError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn mode(&self) -> FeatureMode {
        let has = |b| self.schema.iter().any(|n| feature_block(n).ok() == Some(b));
        match (has(FeatureBlock::Linguistic), has(FeatureBlock::Prosodic)) {
            (true, false) => FeatureMode::LinguisticOnly,
            (false, true) => FeatureMode::ProsodicOnly,
            _ => FeatureMode::Combined,
        }
    }
}

fn class_weights<T: Scalar>(labels: &[bool], enabled: bool) -> Vec<T> {
    if !enabled {
        return vec![T::one(); labels.len()];
    }
    let n = labels.len() as f64;
    let n_pos = labels.iter().filter(|&&y| y).count() as f64;
    let n_neg = n - n_pos;
    let (wp, wn) = (T::of(n / (2.0 * n_pos)), T::of(n / (2.0 * n_neg)));
    labels.iter().map(|&y| if y { wp } else { wn }).collect()
}

/// Trains and also returns the loss before the first epoch and after each
/// accepted epoch.
pub fn train_traced<T: Scalar>(
    data: &LabeledDataset<T>,
    config: &TrainConfig,
) -> Result<(LogisticModel<T>, Vec<T>), QualityError> {
    let n_pos = data.count(true);
    let n_neg = data.count(false);
    if n_pos == 0 || n_neg == 0 {
        return Err(QualityError::InsufficientData(format!(
            "need both labels, got {n_pos} good and {n_neg} bad"
        )));
    }
    if !(config.learning_rate >= 0.0 && config.l2_lambda >= 0.0) {
        return Err(QualityError::Config(
            "learning rate and l2 lambda must be non-negative".into(),
        ));
    }
    let raw: Vec<Vec<T>> = data.rows.iter().map(|r| r.features.values.clone()).collect();
    let labels: Vec<bool> = data.rows.iter().map(|r| r.label).collect();
    let standardizer = Standardizer::fit(&raw);
    let rows: Vec<Vec<T>> = raw.iter().map(|x| standardizer.transform(x)).collect();
    let weights = class_weights::<T>(&labels, config.class_weighting);
    let objective = Objective {
        rows: &rows,
        labels: &labels,
        weights: &weights,
        l2_lambda: T::of(config.l2_lambda),
    };

    let dim = data.schema().len();
    let mut w = vec![T::zero(); dim];
    let mut b = T::zero();
    let mut loss = objective.loss(&w, b);
    if !loss.is_finite() {
        return Err(QualityError::Divergence { epoch: 0 });
    }
    let mut history = vec![loss];
    let base_step = T::of(config.learning_rate);

    'epochs: for epoch in 1..=config.epochs {
        let (gw, gb) = objective.gradient(&w, b);
        if gw.iter().any(|g| !g.is_finite()) || !gb.is_finite() {
            return Err(QualityError::Divergence { epoch });
        }
        let mut step = base_step;
        for _ in 0..MAX_HALVINGS {
            let cand_w: Vec<T> = w.iter().zip(&gw).map(|(&wi, &g)| wi - step * g).collect();
            let cand_b = b - step * gb;
            let cand_loss = objective.loss(&cand_w, cand_b);
            if cand_loss.is_finite() && cand_loss <= loss {
                w = cand_w;
                b = cand_b;
                loss = cand_loss;
                history.push(loss);
                continue 'epochs;
            }
            step /= T::of(2.0);
        }
        if !loss.is_finite() {
            return Err(QualityError::Divergence { epoch });
        }
        // No step lowers the loss any further.
        log::debug!("training converged at epoch {epoch}");
        break;
    }

    Ok((
        LogisticModel {
            schema: data.schema().to_vec(),
            weights: w,
            bias: b,
            standardizer,
            hyperparams: *config,
            final_loss: loss,
        },
        history,
    ))
}

pub fn train<T: Scalar>(
    data: &LabeledDataset<T>,
    config: &TrainConfig,
) -> Result<LogisticModel<T>, QualityError> {
    train_traced(data, config).map(|(m, _)| m)
}

/// Probability that the class is good, kept strictly inside (0, 1).
pub fn predict_proba<T: Scalar>(model: &LogisticModel<T>, x: &FeatureVector<T>) -> Result<T, QualityError> {
    if x.schema != model.schema {
        return Err(QualityError::Schema(format!(
            "model expects {} features ({}…), got {}",
            model.schema.len(),
            model.schema.first().map_or("", String::as_str),
            x.schema.len()
        )));
    }
    let z = Objective::margin(&model.weights, model.bias, &model.standardizer.transform(&x.values));
    let eps = T::epsilon();
    Ok(sigmoid(z).max(T::min_positive_value()).min(T::one() - eps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub threshold: f64,
    /// Value reported for a metric whose denominator is zero.
    pub zero_denominator_value: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize, threshold: f64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        EvalReport {
            tp,
            fp,
            fn_,
            tn,
            accuracy: ratio(tp + tn, tp + fp + fn_ + tn),
            precision,
            recall,
            f1,
            threshold,
            zero_denominator_value: 0.0,
        }
    }

    /// The same confusion matrix with "bad" as the positive class.
    pub fn swapped(&self) -> Self {
        Self::from_counts(self.tn, self.fn_, self.fp, self.tp, self.threshold)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Predicts good iff the probability is at least `threshold`.
pub fn evaluate<T: Scalar>(
    model: &LogisticModel<T>,
    test: &LabeledDataset<T>,
    threshold: f64,
) -> Result<EvalReport, QualityError> {
    if test.is_empty() {
        return Err(QualityError::Eval("empty test set".into()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    let threshold_t = T::of(threshold);
    for row in &test.rows {
        let predicted_good = predict_proba(model, &row.features)? >= threshold_t;
        match (predicted_good, row.label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(EvalReport::from_counts(tp, fp, fn_, tn, threshold))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: FeatureMode,
    pub report: EvalReport,
    pub test_sessions: Vec<String>,
}

/// Splits once, then trains and evaluates each mode on its feature block(s).
pub fn ablation<T: Scalar>(
    data: &LabeledDataset<T>,
    modes: &[FeatureMode],
    config: &TrainConfig,
    threshold: f64,
    train_fraction: f64,
    seed: u64,
) -> Result<Vec<AblationRow>, QualityError> {
    let (train_set, test_set) = split(data, train_fraction, seed)?;
    let test_sessions: Vec<String> = test_set
        .rows
        .iter()
        .map(|r| r.features.session_id.clone())
        .collect();
    modes
        .iter()
        .map(|&mode| {
            let model = train(&train_set.project(mode)?, config)?;
            let report = evaluate(&model, &test_set.project(mode)?, threshold)?;
            Ok(AblationRow {
                mode,
                report,
                test_sessions: test_sessions.clone(),
            })
        })
        .collect()
}

/// Rows per mode, columns accuracy/precision/recall/F1.
pub fn render_table(rows: &[AblationRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<22} | {:>8} | {:>9} | {:>6} | {:>8}",
        "Features", "Accuracy", "Precision", "Recall", "F1 score"
    );
    let _ = writeln!(out, "{}", "-".repeat(66));
    for row in rows {
        let r = &row.report;
        let _ = writeln!(
            out,
            "{:<22} | {:>8.3} | {:>9.3} | {:>6.3} | {:>8.3}",
            row.mode.label(),
            r.accuracy,
            r.precision,
            r.recall,
            r.f1
        );
    }
    out
}
