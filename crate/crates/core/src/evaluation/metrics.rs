use serde::{Deserialize, Serialize};

use crate::classifiers::{decide, DecisionConfig, Prediction};
use crate::pair::Label;
use crate::Error;

/// Confusion counts and the usual ratios. A ratio whose denominator is zero
/// is reported as 0 and flagged in `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricsReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp_rate: f64,
    pub fp_rate: f64,
    pub gamma: f64,
    pub undefined: Vec<String>,
}

impl MetricsReport {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize, gamma: f64) -> Self {
        let mut undefined = Vec::new();
        let mut ratio = |num: usize, den: usize, name: &str| {
            if den == 0 {
                undefined.push(name.to_string());
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let accuracy = ratio(tp + tn, tp + fp + tn + fn_, "accuracy");
        let precision = ratio(tp, tp + fp, "precision");
        let recall = ratio(tp, tp + fn_, "recall");
        let fp_rate = ratio(fp, fp + tn, "fp_rate");
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            undefined.push("f1".into());
            0.0
        };
        MetricsReport { tp, fp, tn, fn_, accuracy, precision, recall, f1, tp_rate: recall, fp_rate, gamma, undefined }
    }
}

pub fn compute_metrics(predictions: &[Prediction], labels: &[Label], gamma: f64) -> Result<MetricsReport, Error> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch(predictions.len(), labels.len()));
    }
    let cfg = DecisionConfig::new(gamma)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (p, &label) in predictions.iter().zip(labels) {
        match (decide(p, &cfg), label) {
            (Label::TruePositive, Label::TruePositive) => tp += 1,
            (Label::TruePositive, Label::FalsePositive) => fp += 1,
            (Label::FalsePositive, Label::FalsePositive) => tn += 1,
            (Label::FalsePositive, Label::TruePositive) => fn_ += 1,
        }
    }
    Ok(MetricsReport::from_counts(tp, fp, tn, fn_, gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    #[test]
    fn balanced_counts() {
        let m = MetricsReport::from_counts(8, 2, 8, 2, 0.5);
        assert_eq!((m.accuracy, m.precision, m.recall), (0.8, 0.8, 0.8));
        assert!((m.f1 - 0.8).abs() < 1e-15);
        assert_eq!(m.total(), 20);
    }

    #[test]
    fn all_positive_predictions() {
        let preds = vec![Prediction::from_probs([1.0, 0.0]); 4];
        let m = compute_metrics(&preds, &[TruePositive; 4], 0.5).unwrap();
        assert_eq!((m.accuracy, m.recall), (1.0, 1.0));
        let m = compute_metrics(&preds, &[FalsePositive; 4], 0.5).unwrap();
        assert_eq!((m.accuracy, m.fp_rate), (0.0, 1.0));
        assert!(m.undefined.contains(&"recall".to_string()) && m.undefined.contains(&"f1".to_string()));
        assert_eq!(m.f1, 0.0);
    }

    #[test]
    fn gamma_zero_accepts_everything() {
        let preds = vec![Prediction::from_probs([0.0, 1.0]), Prediction::from_probs([0.3, 0.7])];
        let m = compute_metrics(&preds, &[TruePositive, FalsePositive], 0.0).unwrap();
        assert_eq!(m.recall, 1.0);
        assert!(compute_metrics(&preds, &[TruePositive], 0.5).is_err());
    }
}
