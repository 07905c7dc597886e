//! Automatic validation of code clone pairs.
//!
//! A clone detector reports pairs of similar fragments; many of those reports
//! are false positives. This crate extracts normalization-based similarity
//! features from each pair, trains classifiers on pairs a human already
//! judged, and scores new pairs with the probability that they are true
//! clones.
//!
//! Pipeline, bottom up:
//!
//! * [`normalize`]: lossless Java lexing and three cumulative normalization levels.
//! * [`diff`]: LCS-optimal edit scripts and fragment similarity.
//! * [`features`]: the fixed eight-feature vector and distribution analysis.
//! * [`classifiers`]: backprop network, Naive Bayes with KDE, TF-IDF baseline,
//!   threshold decisions and the model document format.
//! * [`evaluation`]: metrics, ROC/PR curves, cross-validation, chi-squared scores.
//! * [`mutation`]: artificial clone generation for benchmarking.
//! * [`store`]: the file-backed clone/label store.

pub mod classifiers;
pub mod corpus;
pub mod diff;
pub mod evaluation;
pub mod features;
pub mod mutation;
pub mod normalize;
pub mod pair;
pub mod store;

pub use pair::{ClonePair, CodeFragment, Label, Language};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported language: {0}")]
    UnsupportedLanguage(String),
    #[error("fragments of a pair must share a language")]
    LanguageMismatch,
    #[error("pair {0} carries a label without a labeler (or the reverse)")]
    LabelWithoutLabeler(String),
    #[error("invalid label {0:?}; expected TruePositive or FalsePositive")]
    InvalidLabel(String),
    #[error("fragment is empty at the requested granularity")]
    EmptyFragment,
    #[error("dataset must contain both TruePositive and FalsePositive rows")]
    InsufficientClasses,
    #[error("training set contains a single class")]
    SingleClassTrainingSet,
    #[error("labels contain a single class")]
    SingleClassLabels,
    #[error("training loss became non-finite at epoch {0}; lower the learning rate")]
    DivergedLoss(usize),
    #[error("feature vector has {got} values, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} predictions but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("TF-IDF baseline needs at least one true and one false document")]
    EmptyPartition,
    #[error("feedback pair {0} is not labeled")]
    UnlabeledFeedback(String),
    #[error("model document version {found:?} is not supported (expected {expected:?})")]
    VersionMismatch { expected: String, found: String },
    #[error("model document feature order does not match this build")]
    FeatureOrderMismatch,
    #[error("malformed model document: {0}")]
    MalformedDocument(String),
    #[error("fragment has no site for mutation operator {0}")]
    NoMutableSite(String),
    #[error("corpus too small: {0}")]
    CorpusTooSmall(String),
    #[error("gave up drawing a negative pair after {0} rejected draws")]
    ExhaustedResampling(usize),
    #[error("unknown pair {0}")]
    UnknownPair(String),
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("missing source file {0}")]
    MissingSourceFile(String),
    #[error("malformed store record at line {line}: {reason}")]
    MalformedStore { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
