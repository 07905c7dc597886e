//! Metrics, curves, cross-validation, feature scoring and report export.
//!
//! Exported numbers use six decimal places.

pub mod chi2;
pub mod curves;
pub mod cv;
pub mod metrics;

use std::fmt::Write as _;
use std::io::Write;

pub use chi2::{chi_squared, chi_squared_feature_scores, FeatureScore, CHI2_BINS};
pub use curves::{curve_and_auc, mann_whitney_auc, recommend_gamma, CurveKind, CurvePoint, CurveReport};
pub use cv::{k_fold_cross_validate, k_fold_cross_validate_pairs, stratified_folds, CVReport, FoldResult, MetricSummary};
pub use metrics::{compute_metrics, MetricsReport};

use crate::classifiers::{decide, DecisionConfig, Prediction};
use crate::features::FeatureVector;
use crate::pair::Label;
use crate::Error;

pub fn fmt6(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{v:.6}")
}

/// One row of the per-pair type-space export.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeSpaceRow {
    pub id: String,
    pub line_sim: [f64; 3],
    pub decision: Label,
    pub correct: bool,
}

pub fn export_type_space(
    ids: &[String],
    features: &[FeatureVector],
    predictions: &[Prediction],
    labels: &[Label],
    gamma: f64,
) -> Result<Vec<TypeSpaceRow>, Error> {
    let n = ids.len();
    if features.len() != n || predictions.len() != n || labels.len() != n {
        return Err(Error::LengthMismatch(predictions.len(), labels.len()));
    }
    let cfg = DecisionConfig::new(gamma)?;
    Ok((0..n)
        .map(|i| {
            let v = &features[i].values;
            let decision = decide(&predictions[i], &cfg);
            TypeSpaceRow { id: ids[i].clone(), line_sim: [v[0], v[1], v[2]], decision, correct: decision == labels[i] }
        })
        .collect())
}

pub fn write_type_space_csv<W: Write>(writer: W, rows: &[TypeSpaceRow]) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "lineSimT1", "lineSimT2", "lineSimT3", "decision", "correct"])?;
    for r in rows {
        w.write_record([
            r.id.clone(),
            fmt6(r.line_sim[0]),
            fmt6(r.line_sim[1]),
            fmt6(r.line_sim[2]),
            r.decision.short().to_string(),
            r.correct.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve_csv<W: Write>(writer: W, curve: &CurveReport) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(writer);
    let (x, y) = match curve.kind {
        CurveKind::Roc => ("fp_rate", "tp_rate"),
        CurveKind::Pr => ("recall", "precision"),
    };
    w.write_record(["threshold", x, y])?;
    for p in &curve.points {
        w.write_record([fmt6(p.threshold), fmt6(p.x), fmt6(p.y)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn metrics_summary(m: &MetricsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "gamma      {}", fmt6(m.gamma));
    let _ = writeln!(s, "confusion  TP={} FP={} TN={} FN={}", m.tp, m.fp, m.tn, m.fn_);
    let _ = writeln!(s, "accuracy   {}", fmt6(m.accuracy));
    let _ = writeln!(s, "precision  {}", fmt6(m.precision));
    let _ = writeln!(s, "recall     {}", fmt6(m.recall));
    let _ = writeln!(s, "f1         {}", fmt6(m.f1));
    let _ = writeln!(s, "tp_rate    {}", fmt6(m.tp_rate));
    let _ = writeln!(s, "fp_rate    {}", fmt6(m.fp_rate));
    if !m.undefined.is_empty() {
        let _ = writeln!(s, "undefined  {}", m.undefined.join(","));
    }
    s
}

pub fn cv_summary(r: &CVReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "folds {} seed {} gamma {}", r.k, r.seed, fmt6(r.gamma));
    let _ = writeln!(s, "fold  n_test  epochs  accuracy  precision  recall  f1");
    for f in &r.folds {
        let _ = writeln!(
            s,
            "{:<5} {:<7} {:<7} {}  {}   {}  {}{}",
            f.fold,
            f.test_size,
            f.epochs_trained,
            fmt6(f.metrics.accuracy),
            fmt6(f.metrics.precision),
            fmt6(f.metrics.recall),
            fmt6(f.metrics.f1),
            if f.single_class { "  (single class)" } else { "" }
        );
    }
    let line = |name: &str, mean: f64, sd: f64| format!("{name:<10} mean {} sd {}\n", fmt6(mean), fmt6(sd));
    s.push_str(&line("accuracy", r.mean.accuracy, r.std.accuracy));
    s.push_str(&line("precision", r.mean.precision, r.std.precision));
    s.push_str(&line("recall", r.mean.recall, r.std.recall));
    s.push_str(&line("f1", r.mean.f1, r.std.f1));
    s
}

pub fn write_epoch_trace_csv<W: Write>(writer: W, trace: &[f64]) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "test_accuracy"])?;
    for (e, a) in trace.iter().enumerate() {
        w.write_record([(e + 1).to_string(), fmt6(*a)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_chi2_csv<W: Write>(writer: W, scores: &[FeatureScore]) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "chi2", "normalized"])?;
    for s in scores {
        w.write_record([s.name.clone(), fmt6(s.chi2), fmt6(s.normalized)])?;
    }
    w.flush()?;
    Ok(())
}
