//! Naive Bayes with Gaussian kernel density likelihoods.
//!
//! Each feature is modelled independently per class by a KDE over that
//! class's training values. Scores are accumulated as log-probabilities and
//! the two class scores are normalized, which stands in for the evidence term.

use serde::{Deserialize, Serialize};

use super::{Prediction, TrainingSet};
use crate::Error;

const MIN_BANDWIDTH: f64 = 1e-6;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `0.9 * min(sd, IQR / 1.34) * m^(-1/5)`
    #[default]
    Silverman,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NaiveBayesConfig {
    pub bandwidth_rule: BandwidthRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDensity {
    pub values: Vec<f64>,
    pub bandwidth: f64,
}

impl KernelDensity {
    pub fn fit(values: Vec<f64>, rule: BandwidthRule) -> Self {
        let bandwidth = match rule {
            BandwidthRule::Silverman => silverman_bandwidth(&values),
            BandwidthRule::Fixed(h) => h,
        }
        .max(MIN_BANDWIDTH);
        KernelDensity { values, bandwidth }
    }

    /// `(1 / (m h)) * sum K((x - x_i) / h)` with the standard normal kernel.
    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let exps: Vec<f64> = self.values.iter().map(|&xi| -0.5 * ((x - xi) / h).powi(2)).collect();
        let mx = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if mx == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let s: f64 = exps.iter().map(|e| (e - mx).exp()).sum();
        mx + s.ln() - LN_SQRT_2PI - (self.values.len() as f64 * h).ln()
    }
}

pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let m = values.len();
    if m < 2 {
        return MIN_BANDWIDTH;
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let sd = var.sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (m as f64).powf(-0.2)
}

/// Linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    /// `[Pr(true), Pr(false)]`
    pub priors: [f64; 2],
    /// Per feature, `[true-class KDE, false-class KDE]`.
    pub likelihoods: Vec<[KernelDensity; 2]>,
}

impl NaiveBayesModel {
    pub fn input_dim(&self) -> usize {
        self.likelihoods.len()
    }

    /// Log of prior times the product of per-feature likelihoods, per class.
    pub fn log_scores(&self, x: &[f64]) -> Result<[f64; 2], Error> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        let mut s = [self.priors[0].ln(), self.priors[1].ln()];
        for (kdes, &v) in self.likelihoods.iter().zip(x) {
            s[0] += kdes[0].log_density(v);
            s[1] += kdes[1].log_density(v);
        }
        Ok(s)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, Error> {
        let [t, f] = self.log_scores(x)?;
        Ok(Prediction::from_log_scores(t, f))
    }

    pub fn check_invariants(&self) -> Result<(), Error> {
        if (self.priors[0] + self.priors[1] - 1.0).abs() > 1e-9 {
            return Err(Error::MalformedDocument("priors must sum to 1".into()));
        }
        if self.likelihoods.iter().flatten().any(|k| !(k.bandwidth > 0.0) || k.values.is_empty()) {
            return Err(Error::MalformedDocument("every density needs values and a positive bandwidth".into()));
        }
        Ok(())
    }
}

pub fn train_naive_bayes(ts: &TrainingSet, cfg: &NaiveBayesConfig) -> Result<NaiveBayesModel, Error> {
    ts.check_trainable()?;
    let [t, f] = ts.class_counts();
    let n = (t + f) as f64;
    let likelihoods = (0..ts.dim())
        .map(|i| {
            let column = |class: usize| {
                ts.rows
                    .iter()
                    .filter(|r| r.label.class_index() == class)
                    .map(|r| r.x.values[i])
                    .collect::<Vec<_>>()
            };
            [
                KernelDensity::fit(column(0), cfg.bandwidth_rule),
                KernelDensity::fit(column(1), cfg.bandwidth_rule),
            ]
        })
        .collect();
    Ok(NaiveBayesModel { priors: [t as f64 / n, f as f64 / n], likelihoods })
}
