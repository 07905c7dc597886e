use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, MetricsReport};
use crate::classifiers::{
    fica::train_fica, fica_score, train_naive_bayes, train_neural_net_with, Prediction, TrainerConfig, TrainingSet,
};
use crate::pair::{ClonePair, Label};
use crate::Error;

/// Stratified fold assignment. Indices of each class are shuffled
/// independently, true positives are laid out before false positives, and
/// position `p` goes to fold `p mod k`.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, Error> {
    if k < 2 {
        return Err(Error::InsufficientData(format!("k must be at least 2, got {k}")));
    }
    if labels.len() < k {
        return Err(Error::InsufficientData(format!("{} rows cannot fill {k} folds", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(labels.len());
    for class in [Label::TruePositive, Label::FalsePositive] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < 2 {
            return Err(Error::InsufficientData(format!("need at least two {} rows, found {}", class.short(), idx.len())));
        }
        idx.shuffle(&mut rng);
        order.extend(idx);
    }
    let mut folds = vec![Vec::new(); k];
    for (p, i) in order.into_iter().enumerate() {
        folds[p % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub epochs_trained: usize,
    pub metrics: MetricsReport,
    /// The test fold held a single class.
    pub single_class: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp_rate: f64,
    pub fp_rate: f64,
}

impl MetricSummary {
    fn from_fn(f: impl Fn(&MetricsReport) -> f64, reports: &[&MetricsReport], agg: impl Fn(&[f64]) -> f64) -> f64 {
        let v: Vec<f64> = reports.iter().map(|r| f(r)).collect();
        agg(&v)
    }

    fn aggregate(reports: &[&MetricsReport], agg: impl Fn(&[f64]) -> f64 + Copy) -> Self {
        MetricSummary {
            accuracy: Self::from_fn(|r| r.accuracy, reports, agg),
            precision: Self::from_fn(|r| r.precision, reports, agg),
            recall: Self::from_fn(|r| r.recall, reports, agg),
            f1: Self::from_fn(|r| r.f1, reports, agg),
            tp_rate: Self::from_fn(|r| r.tp_rate, reports, agg),
            fp_rate: Self::from_fn(|r| r.fp_rate, reports, agg),
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation.
fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Held-out prediction of one row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutOfFold {
    pub id: String,
    pub fold: usize,
    pub prediction: Prediction,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub k: usize,
    pub seed: u64,
    pub gamma: f64,
    pub folds: Vec<FoldResult>,
    pub mean: MetricSummary,
    pub std: MetricSummary,
    /// Test accuracy after each epoch, averaged over folds. Empty for models
    /// that are not trained iteratively.
    pub epoch_trace: Vec<f64>,
    /// Held-out predictions in dataset order.
    pub predictions: Vec<OutOfFold>,
}

impl CVReport {
    pub fn pooled_predictions(&self) -> (Vec<Prediction>, Vec<Label>) {
        (self.predictions.iter().map(|o| o.prediction).collect(), self.predictions.iter().map(|o| o.label).collect())
    }
}

struct FoldOutput {
    predictions: Vec<Prediction>,
    epochs: usize,
    trace: Vec<f64>,
}

fn cross_validate(
    ids: &[String],
    labels: &[Label],
    k: usize,
    seed: u64,
    gamma: f64,
    fit_predict: impl Fn(usize, &[usize], &[usize]) -> Result<FoldOutput, Error> + Sync,
) -> Result<CVReport, Error> {
    let folds = stratified_folds(labels, k, seed)?;
    let outputs = (0..k)
        .into_par_iter()
        .map(|f| {
            let test = &folds[f];
            let train: Vec<usize> = (0..k).filter(|&g| g != f).flat_map(|g| folds[g].iter().copied()).collect();
            fit_predict(f, &train, test).map(|o| (train.len(), o))
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let mut fold_results = Vec::with_capacity(k);
    let mut oof: Vec<Option<OutOfFold>> = vec![None; labels.len()];
    for (f, (train_size, out)) in outputs.iter().enumerate() {
        let test = &folds[f];
        let test_labels: Vec<Label> = test.iter().map(|&i| labels[i]).collect();
        let metrics = compute_metrics(&out.predictions, &test_labels, gamma)?;
        let single_class = test_labels.iter().all(|&l| l == test_labels[0]);
        if single_class {
            log::warn!("fold {f} holds a single class; precision may be undefined");
        }
        for (&i, p) in test.iter().zip(&out.predictions) {
            oof[i] = Some(OutOfFold { id: ids[i].clone(), fold: f, prediction: *p, label: labels[i] });
        }
        fold_results.push(FoldResult {
            fold: f,
            train_size: *train_size,
            test_size: test.len(),
            epochs_trained: out.epochs,
            metrics,
            single_class,
        });
    }

    let reports: Vec<&MetricsReport> = fold_results.iter().map(|r| &r.metrics).collect();
    let longest = outputs.iter().map(|(_, o)| o.trace.len()).max().unwrap_or(0);
    let epoch_trace = (0..longest)
        .map(|e| {
            let vals: Vec<f64> = outputs
                .iter()
                .filter(|(_, o)| !o.trace.is_empty())
                .map(|(_, o)| o.trace[e.min(o.trace.len() - 1)])
                .collect();
            mean(&vals)
        })
        .collect();

    Ok(CVReport {
        k,
        seed,
        gamma,
        mean: MetricSummary::aggregate(&reports, mean),
        std: MetricSummary::aggregate(&reports, std_dev),
        folds: fold_results,
        epoch_trace,
        predictions: oof.into_iter().map(|o| o.expect("folds cover every row")).collect(),
    })
}

/// k-fold cross-validation of a feature-vector model. Network folds are
/// seeded with `seed + fold`.
pub fn k_fold_cross_validate(ts: &TrainingSet, k: usize, cfg: &TrainerConfig, seed: u64, gamma: f64) -> Result<CVReport, Error> {
    ts.check_trainable()?;
    let ids: Vec<String> = ts.rows.iter().map(|r| r.id.clone()).collect();
    cross_validate(&ids, &ts.labels(), k, seed, gamma, |fold, train, test| {
        let train_set = ts.subset(train);
        let test_set = ts.subset(test);
        match cfg {
            TrainerConfig::NeuralNet(c) => {
                let mut c = c.clone();
                c.seed = seed.wrapping_add(fold as u64);
                let mut trace = Vec::new();
                let model = train_neural_net_with(&train_set, &c, None, |_, m| {
                    let correct = test_set
                        .rows
                        .iter()
                        .filter(|r| {
                            let p = m.predict(r.x.as_slice()).expect("dimension checked");
                            (p.lambda() >= gamma) == (r.label == Label::TruePositive)
                        })
                        .count();
                    trace.push(correct as f64 / test_set.len() as f64);
                })?;
                let predictions = test_set.rows.iter().map(|r| model.predict(r.x.as_slice())).collect::<Result<_, _>>()?;
                Ok(FoldOutput { predictions, epochs: model.epochs_trained, trace })
            }
            TrainerConfig::NaiveBayes(c) => {
                let model = train_naive_bayes(&train_set, c)?;
                let predictions = test_set.rows.iter().map(|r| model.predict(r.x.as_slice())).collect::<Result<_, _>>()?;
                Ok(FoldOutput { predictions, epochs: 0, trace: Vec::new() })
            }
        }
    })
}

/// k-fold cross-validation of the TF-IDF baseline over labeled pairs.
pub fn k_fold_cross_validate_pairs(pairs: &[ClonePair], k: usize, seed: u64, gamma: f64) -> Result<CVReport, Error> {
    let labeled: Vec<&ClonePair> = pairs.iter().filter(|p| p.label.is_some()).collect();
    let ids: Vec<String> = labeled.iter().map(|p| p.id.clone()).collect();
    let labels: Vec<Label> = labeled.iter().map(|p| p.label.expect("filtered")).collect();
    cross_validate(&ids, &labels, k, seed, gamma, |_, train, test| {
        let train_pairs: Vec<ClonePair> = train.iter().map(|&i| labeled[i].clone()).collect();
        let model = train_fica(&train_pairs)?;
        let predictions = test.iter().map(|&i| fica_score(&model, labeled[i])).collect::<Result<_, _>>()?;
        Ok(FoldOutput { predictions, epochs: 0, trace: Vec::new() })
    })
}
