//! Validation models and the threshold decision.

pub mod bayes;
pub mod document;
pub mod fica;
pub mod nn;
pub mod scaling;

use serde::{Deserialize, Serialize};

pub use bayes::{train_naive_bayes, BandwidthRule, KernelDensity, NaiveBayesConfig, NaiveBayesModel};
pub use document::{deserialize_model, feature_fingerprint, serialize_model, MODEL_FORMAT_VERSION};
pub use fica::{fica_score, train_fica, TfIdfBaselineModel};
pub use nn::{train_neural_net, train_neural_net_with, Activation, NeuralNetConfig, NeuralNetModel};

use crate::features::{extract_features, FeatureRow, FeatureVector};
use crate::pair::{ClonePair, Label};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub id: String,
    pub x: FeatureVector,
    pub label: Label,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub rows: Vec<TrainingRow>,
}

impl TrainingSet {
    pub fn new(rows: Vec<TrainingRow>) -> Self {
        TrainingSet { rows }
    }

    /// Keeps labeled rows only.
    pub fn from_feature_rows(rows: Vec<FeatureRow>) -> Self {
        TrainingSet {
            rows: rows
                .into_iter()
                .filter_map(|r| r.label.map(|label| TrainingRow { id: r.id, x: r.features, label }))
                .collect(),
        }
    }

    pub fn to_feature_rows(&self) -> Vec<FeatureRow> {
        self.rows
            .iter()
            .map(|r| FeatureRow { id: r.id.clone(), features: r.x.clone(), label: Some(r.label) })
            .collect()
    }

    /// Extracts features for every labeled pair; unlabeled pairs are skipped.
    pub fn from_pairs(pairs: &[ClonePair], include_extras: bool) -> Result<Self, Error> {
        use rayon::prelude::*;
        let rows = pairs
            .par_iter()
            .filter_map(|p| p.label.map(|label| (p, label)))
            .map(|(p, label)| Ok(TrainingRow { id: p.id.clone(), x: extract_features(p, include_extras)?, label }))
            .collect::<Result<Vec<_>, Error>>()?;
        Ok(TrainingSet { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.x.len())
    }

    /// `[true positives, false positives]`
    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0, 0];
        for r in &self.rows {
            c[r.label.class_index()] += 1;
        }
        c
    }

    pub fn labels(&self) -> Vec<Label> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> TrainingSet {
        TrainingSet { rows: indices.iter().map(|&i| self.rows[i].clone()).collect() }
    }

    /// Both classes present and every row of one width.
    pub fn check_trainable(&self) -> Result<(), Error> {
        let dim = self.dim();
        if let Some(r) = self.rows.iter().find(|r| r.x.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: r.x.len() });
        }
        let [t, f] = self.class_counts();
        if t == 0 || f == 0 {
            return Err(Error::SingleClassTrainingSet);
        }
        Ok(())
    }
}

/// `probs[0]` is the probability of a true clone (λ), `probs[1]` of a false one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probs: [f64; 2],
}

impl Prediction {
    pub fn from_probs(probs: [f64; 2]) -> Self {
        Prediction { probs }
    }

    /// Normalizes two non-negative scores; two zero scores give (0.5, 0.5).
    pub fn from_scores(t: f64, f: f64) -> Self {
        let s = t + f;
        if s > 0.0 && s.is_finite() {
            Prediction { probs: [t / s, f / s] }
        } else {
            Prediction { probs: [0.5, 0.5] }
        }
    }

    /// Normalizes two log-scores.
    pub fn from_log_scores(lt: f64, lf: f64) -> Self {
        if lt == f64::NEG_INFINITY && lf == f64::NEG_INFINITY {
            return Prediction { probs: [0.5, 0.5] };
        }
        Prediction { probs: nn::softmax2(lt, lf) }
    }

    pub fn lambda(&self) -> f64 {
        self.probs[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionConfig {
    pub gamma: f64,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        DecisionConfig { gamma: 0.5 }
    }
}

impl DecisionConfig {
    pub fn new(gamma: f64) -> Result<Self, Error> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidConfig(format!("gamma {gamma} outside [0, 1]")));
        }
        Ok(DecisionConfig { gamma })
    }
}

/// True positive iff λ ≥ γ.
pub fn decide(p: &Prediction, cfg: &DecisionConfig) -> Label {
    if p.probs[0] >= cfg.gamma {
        Label::TruePositive
    } else {
        Label::FalsePositive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    NeuralNet(NeuralNetModel),
    NaiveBayes(NaiveBayesModel),
    TfIdf(TfIdfBaselineModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::NeuralNet(_) => "neural_net",
            Model::NaiveBayes(_) => "naive_bayes",
            Model::TfIdf(_) => "tf_idf",
        }
    }

    /// Width of the feature vector this model reads; 0 for the TF-IDF baseline.
    pub fn input_dim(&self) -> usize {
        match self {
            Model::NeuralNet(m) => m.input_dim(),
            Model::NaiveBayes(m) => m.input_dim(),
            Model::TfIdf(_) => 0,
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Prediction, Error> {
        match self {
            Model::NeuralNet(m) => m.predict(x.as_slice()),
            Model::NaiveBayes(m) => m.predict(x.as_slice()),
            Model::TfIdf(_) => Err(Error::InvalidConfig("the TF-IDF baseline scores pairs, not feature vectors".into())),
        }
    }

    pub fn predict_pair(&self, pair: &ClonePair) -> Result<Prediction, Error> {
        match self {
            Model::TfIdf(m) => fica_score(m, pair),
            _ => self.predict(&extract_features(pair, self.input_dim() > crate::features::FEATURE_NAMES.len())?),
        }
    }
}

/// Settings for the feature-vector models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainerConfig {
    NeuralNet(NeuralNetConfig),
    NaiveBayes(NaiveBayesConfig),
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig::NeuralNet(NeuralNetConfig::default())
    }
}

pub fn train(ts: &TrainingSet, cfg: &TrainerConfig) -> Result<Model, Error> {
    match cfg {
        TrainerConfig::NeuralNet(c) => Ok(Model::NeuralNet(train_neural_net(ts, c)?)),
        TrainerConfig::NaiveBayes(c) => Ok(Model::NaiveBayes(train_naive_bayes(ts, c)?)),
    }
}

/// Appends labeled feedback pairs to `base` and retrains. A network warm-starts
/// from `previous` when the config asks for it and the architectures match.
pub fn update_with_feedback(
    cfg: &TrainerConfig,
    base: &TrainingSet,
    feedback: &[ClonePair],
    previous: Option<&Model>,
) -> Result<Model, Error> {
    if let Some(p) = feedback.iter().find(|p| p.label.is_none()) {
        return Err(Error::UnlabeledFeedback(p.id.clone()));
    }
    let extras = base.dim() > crate::features::FEATURE_NAMES.len();
    let mut ts = base.clone();
    ts.rows.extend(TrainingSet::from_pairs(feedback, extras)?.rows);
    match (cfg, previous) {
        (TrainerConfig::NeuralNet(c), Some(Model::NeuralNet(prev))) if c.warm_start => {
            Ok(Model::NeuralNet(train_neural_net_with(&ts, c, Some(prev), |_, _| {})?))
        }
        _ => train(&ts, cfg),
    }
}
