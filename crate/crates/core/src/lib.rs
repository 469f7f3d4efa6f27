//! Monitoring and alerting for recorded one-on-one online classes.
//!
//! Two signals feed the alerts: a banned-word detector over ASR transcripts
//! ([`detector`], backed by the embedding-expanded [`word_bank`]) and a
//! logistic-regression quality score over transcript and audio features
//! ([`linguistic`], [`prosodic`], [`quality`]). [`alert`] turns both into
//! alerts kept in an append-only event log that human reviewers close out.
//!
//! The numeric modules are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below pin the `f64` instantiations the pipeline and file formats use.

pub mod alert;
pub mod demo;
pub mod detector;
pub mod linguistic;
pub mod prosodic;
pub mod quality;
pub mod scalar;
pub mod session;
pub mod word_bank;

pub use scalar::Scalar;

pub type EmbeddingTable = word_bank::EmbeddingTable<f64>;
pub type EmbeddingTableF32 = word_bank::EmbeddingTable<f32>;
pub type MelFilterbank = prosodic::MelFilterbank<f64>;
pub type ProsodicFeatures = prosodic::ProsodicFeatures<f64>;
pub type FeatureVector = quality::FeatureVector<f64>;
pub type LabeledDataset = quality::LabeledDataset<f64>;
pub type LogisticModel = quality::LogisticModel<f64>;
pub type LogisticModelF32 = quality::LogisticModel<f32>;
