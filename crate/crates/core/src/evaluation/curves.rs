use serde::{Deserialize, Serialize};

use crate::classifiers::Prediction;
use crate::pair::Label;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Roc,
    Pr,
}

/// ROC: `x` = false positive rate, `y` = true positive rate.
/// PR: `x` = recall, `y` = precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub kind: CurveKind,
    /// Ordered by decreasing threshold; the first point uses an infinite
    /// threshold, i.e. nothing is accepted.
    pub points: Vec<CurvePoint>,
    pub auc: f64,
}

/// Thresholds: every distinct λ plus 0 and 1, descending, after an infinite
/// sentinel. A pair is accepted at threshold `t` when `λ >= t`.
pub fn curve_and_auc(predictions: &[Prediction], labels: &[Label], kind: CurveKind) -> Result<CurveReport, Error> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch(predictions.len(), labels.len()));
    }
    let pos = labels.iter().filter(|&&l| l == Label::TruePositive).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassLabels);
    }
    let mut scored: Vec<(f64, Label)> = predictions.iter().map(|p| p.lambda()).zip(labels.iter().copied()).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut thresholds: Vec<f64> = scored.iter().map(|s| s.0).chain([0.0, 1.0]).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let mut points = vec![point(kind, f64::INFINITY, 0, 0, pos, neg)];
    let (mut tp, mut fp, mut i) = (0, 0, 0);
    for t in thresholds {
        while i < scored.len() && scored[i].0 >= t {
            match scored[i].1 {
                Label::TruePositive => tp += 1,
                Label::FalsePositive => fp += 1,
            }
            i += 1;
        }
        points.push(point(kind, t, tp, fp, pos, neg));
    }
    let auc = points.windows(2).map(|w| (w[1].x - w[0].x) * (w[0].y + w[1].y) / 2.0).sum();
    Ok(CurveReport { kind, points, auc })
}

fn point(kind: CurveKind, threshold: f64, tp: usize, fp: usize, pos: usize, neg: usize) -> CurvePoint {
    let tpr = tp as f64 / pos as f64;
    match kind {
        CurveKind::Roc => CurvePoint { threshold, x: fp as f64 / neg as f64, y: tpr },
        CurveKind::Pr => {
            let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
            CurvePoint { threshold, x: tpr, y: precision }
        }
    }
}

/// γ maximizing Youden's J = TPR − FPR.
///
/// Every sweep point stands for the interval of γ values `(next lower
/// threshold, threshold]` that produce the same decisions. Among maximizing
/// intervals the value closest to 0.5 wins: 0.5 itself if it lies inside,
/// otherwise the interval midpoint.
pub fn recommend_gamma(roc: &CurveReport) -> f64 {
    debug_assert_eq!(roc.kind, CurveKind::Roc);
    let pts = &roc.points;
    let mut best: Option<(f64, f64)> = None; // (J, gamma)
    for (i, p) in pts.iter().enumerate() {
        if !p.threshold.is_finite() || p.threshold > 1.0 {
            continue;
        }
        let hi = p.threshold;
        let lo = pts.get(i + 1).map(|q| q.threshold);
        let gamma = match lo {
            Some(lo) if lo < 0.5 && 0.5 <= hi => 0.5,
            Some(lo) => (lo + hi) / 2.0,
            None => hi,
        };
        let j = p.y - p.x;
        let better = match best {
            None => true,
            Some((bj, bg)) => j > bj + 1e-12 || ((j - bj).abs() <= 1e-12 && (gamma - 0.5).abs() < (bg - 0.5).abs()),
        };
        if better {
            best = Some((j, gamma));
        }
    }
    best.map_or(0.5, |b| b.1)
}

/// Concordant TP/FP pairs (ties count half) over all TP/FP pairs.
pub fn mann_whitney_auc(predictions: &[Prediction], labels: &[Label]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (p, lp) in predictions.iter().zip(labels) {
        if *lp != Label::TruePositive {
            continue;
        }
        for (q, lq) in predictions.iter().zip(labels) {
            if *lq != Label::FalsePositive {
                continue;
            }
            den += 1.0;
            if p.lambda() > q.lambda() {
                num += 1.0;
            } else if p.lambda() == q.lambda() {
                num += 0.5;
            }
        }
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    fn preds(ls: &[f64]) -> Vec<Prediction> {
        ls.iter().map(|&l| Prediction::from_probs([l, 1.0 - l])).collect()
    }

    #[test]
    fn perfect_separation() {
        let p = preds(&[0.9, 0.8, 0.3, 0.1]);
        let l = [TruePositive, TruePositive, FalsePositive, FalsePositive];
        let roc = curve_and_auc(&p, &l, CurveKind::Roc).unwrap();
        assert_eq!(roc.auc, 1.0);
        let g = recommend_gamma(&roc);
        assert!(g > 0.3 && g < 0.8, "{g}");
        let pr = curve_and_auc(&p, &l, CurveKind::Pr).unwrap();
        assert_eq!(pr.auc, 1.0);
    }

    #[test]
    fn identical_scores_are_chance() {
        let p = preds(&[0.6; 6]);
        let l = [TruePositive, FalsePositive, TruePositive, FalsePositive, TruePositive, TruePositive];
        let roc = curve_and_auc(&p, &l, CurveKind::Roc).unwrap();
        assert_eq!(roc.auc, 0.5);
        assert_eq!(recommend_gamma(&roc), 0.5);
    }

    #[test]
    fn monotone_points() {
        let p = preds(&[0.2, 0.9, 0.4, 0.4, 0.7, 0.1, 0.55]);
        let l = [TruePositive, FalsePositive, TruePositive, FalsePositive, TruePositive, FalsePositive, TruePositive];
        let roc = curve_and_auc(&p, &l, CurveKind::Roc).unwrap();
        assert_eq!(roc.points.first().map(|q| (q.x, q.y)), Some((0.0, 0.0)));
        assert_eq!(roc.points.last().map(|q| (q.x, q.y)), Some((1.0, 1.0)));
        for w in roc.points.windows(2) {
            assert!(w[1].x >= w[0].x && w[1].y >= w[0].y);
        }
        assert!((roc.auc - mann_whitney_auc(&p, &l)).abs() < 1e-12);
    }

    #[test]
    fn single_class() {
        let p = preds(&[0.2, 0.3]);
        assert!(matches!(curve_and_auc(&p, &[TruePositive; 2], CurveKind::Roc), Err(Error::SingleClassLabels)));
    }
}
