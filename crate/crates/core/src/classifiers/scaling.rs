use serde::{Deserialize, Serialize};

/// Per-feature min-max scaling to [0, 1] with bounds taken from training data.
/// Values outside the training range are clamped; a constant feature maps to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    /// Bounds `[0, 1]` in every dimension, i.e. the identity on unit-range data.
    pub fn unit(dim: usize) -> Self {
        MinMaxScaler { min: vec![0.0; dim], max: vec![1.0; dim] }
    }

    pub fn fit<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize) -> Self {
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        let mut seen = false;
        for row in rows {
            seen = true;
            for (i, &v) in row.iter().enumerate().take(dim) {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
        if !seen {
            return MinMaxScaler::unit(dim);
        }
        MinMaxScaler { min, max }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                if hi > lo {
                    ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_and_clamps() {
        let rows = [vec![0.0, 5.0, 2.0], vec![10.0, 5.0, 4.0]];
        let s = MinMaxScaler::fit(rows.iter().map(|r| r.as_slice()), 3);
        assert_eq!(s.transform(&[5.0, 5.0, 3.0]), vec![0.5, 0.0, 0.5]);
        assert_eq!(s.transform(&[-3.0, 9.0, 100.0]), vec![0.0, 0.0, 1.0]);
    }
}
