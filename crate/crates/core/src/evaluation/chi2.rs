use serde::{Deserialize, Serialize};

use crate::features::FeatureVector;
use crate::pair::Label;
use crate::Error;

pub const CHI2_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub name: String,
    pub chi2: f64,
    /// `chi2` divided by the largest score over all features.
    pub normalized: f64,
}

/// χ² statistic of the class-vs-bin contingency table of one feature column.
/// Bins are equal-width over the observed range; empty bins contribute no
/// column. A constant column scores 0.
pub fn chi_squared(values: &[f64], labels: &[Label]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return 0.0;
    }
    let width = (hi - lo) / CHI2_BINS as f64;
    let mut table = [[0usize; CHI2_BINS]; 2];
    for (&v, l) in values.iter().zip(labels) {
        let b = (((v - lo) / width) as usize).min(CHI2_BINS - 1);
        table[l.class_index()][b] += 1;
    }
    let n = values.len() as f64;
    let rows = [table[0].iter().sum::<usize>() as f64, table[1].iter().sum::<usize>() as f64];
    let mut chi = 0.0;
    for b in 0..CHI2_BINS {
        let col = (table[0][b] + table[1][b]) as f64;
        if col == 0.0 {
            continue;
        }
        for c in 0..2 {
            let expected = rows[c] * col / n;
            if expected > 0.0 {
                chi += (table[c][b] as f64 - expected).powi(2) / expected;
            }
        }
    }
    chi
}

pub fn chi_squared_feature_scores(
    rows: &[(FeatureVector, Label)],
    names: &[&str],
) -> Result<Vec<FeatureScore>, Error> {
    let labels: Vec<Label> = rows.iter().map(|r| r.1).collect();
    if !labels.contains(&Label::TruePositive) || !labels.contains(&Label::FalsePositive) {
        return Err(Error::SingleClassLabels);
    }
    let dim = rows[0].0.len();
    if names.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: names.len() });
    }
    let raw: Vec<f64> = (0..dim)
        .map(|i| {
            let col: Vec<f64> = rows.iter().map(|r| r.0.values[i]).collect();
            chi_squared(&col, &labels)
        })
        .collect();
    let max = raw.iter().copied().fold(0.0, f64::max);
    Ok(raw
        .iter()
        .zip(names)
        .map(|(&chi2, name)| FeatureScore {
            name: name.to_string(),
            chi2,
            normalized: if max > 0.0 { chi2 / max } else { 0.0 },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    #[test]
    fn constant_and_aligned_features() {
        let rows: Vec<(FeatureVector, Label)> = (0..20)
            .map(|i| {
                let l = if i % 2 == 0 { TruePositive } else { FalsePositive };
                let aligned = if l == TruePositive { 1.0 } else { 0.0 };
                let noisy = ((i * 7) % 5) as f64;
                (FeatureVector::new(vec![0.5, aligned, noisy]), l)
            })
            .collect();
        let s = chi_squared_feature_scores(&rows, &["c", "a", "n"]).unwrap();
        assert_eq!(s[0].chi2, 0.0);
        // perfectly aligned 2x2 table with n = 20 gives chi2 = n
        assert!((s[1].chi2 - 20.0).abs() < 1e-12);
        assert_eq!(s[1].normalized, 1.0);
        assert!(s[2].normalized < 1.0);
    }
}
