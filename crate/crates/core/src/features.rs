//! Classifier input vectors for clone pairs.
//!
//! The default vector holds eight values in a fixed order: line similarity
//! at the three normalization levels, then token similarity at Type2, Type1
//! and Type3, then the count of partially covered methods and the count of
//! unmatched braces. Two size features can be appended on request.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diff::{fragment_similarity, Granularity};
use crate::normalize::{normalize_all, tokenize, NormalizationLevel, NormalizedFragment, Token, TokenKind};
use crate::pair::{label_column, parse_label_column, ClonePair, CodeFragment, Label};
use crate::Error;

pub const FEATURE_NAMES: [&str; 8] = [
    "lineSimT1",
    "lineSimT2",
    "lineSimT3",
    "tokSimT2",
    "tokSimT1",
    "tokSimT3",
    "functionsIntersected",
    "unmatchedBraces",
];

pub const EXTRA_FEATURE_NAMES: [&str; 2] = ["avgSize", "sizeDiff"];

/// Feature names for a vector of the given width (8, or 10 with extras).
pub fn feature_names(with_extras: bool) -> Vec<&'static str> {
    let mut names = FEATURE_NAMES.to_vec();
    if with_extras {
        names.extend(EXTRA_FEATURE_NAMES);
    }
    names
}

/// Position of each similarity feature: (level, granularity).
const SIMILARITY_LAYOUT: [(NormalizationLevel, Granularity); 6] = [
    (NormalizationLevel::Type1, Granularity::Line),
    (NormalizationLevel::Type2, Granularity::Line),
    (NormalizationLevel::Type3, Granularity::Line),
    (NormalizationLevel::Type2, Granularity::Token),
    (NormalizationLevel::Type1, Granularity::Token),
    (NormalizationLevel::Type3, Granularity::Token),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        FeatureVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn has_extras(&self) -> bool {
        self.values.len() == FEATURE_NAMES.len() + EXTRA_FEATURE_NAMES.len()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_names(self.has_extras())
            .iter()
            .position(|n| *n == name)
            .and_then(|i| self.values.get(i).copied())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(values: Vec<f64>) -> Self {
        FeatureVector { values }
    }
}

pub fn extract_features(pair: &ClonePair, include_extras: bool) -> Result<FeatureVector, Error> {
    pair.validate()?;
    let n1 = normalize_all(&pair.fragment1)?;
    let n2 = normalize_all(&pair.fragment2)?;
    if n1[0].is_empty() || n2[0].is_empty() {
        return Err(Error::EmptyFragment);
    }
    let mut values = Vec::with_capacity(10);
    for (level, granularity) in SIMILARITY_LAYOUT {
        let idx = level as usize;
        values.push(level_similarity(&n1[idx], &n2[idx], granularity, &pair.id)?);
    }
    values.push(functions_intersected(pair) as f64);
    values.push(count_unmatched_braces(&pair.fragment1, &pair.fragment2) as f64);
    if include_extras {
        let alpha = pair.fragment1.raw_lines() as f64;
        let beta = pair.fragment2.raw_lines() as f64;
        values.push((alpha + beta) / 2.0);
        values.push((alpha - beta).abs());
    }
    Ok(FeatureVector { values })
}

/// Similarity at a level where normalization may have emptied a fragment
/// (Type3 drops brace-only lines): two empty sides are identical, one empty
/// side shares nothing.
fn level_similarity(
    f1: &NormalizedFragment,
    f2: &NormalizedFragment,
    granularity: Granularity,
    id: &str,
) -> Result<f64, Error> {
    match fragment_similarity(f1, f2, granularity) {
        Ok(score) => Ok(score.value),
        Err(Error::EmptyFragment) => {
            let (e1, e2) = match granularity {
                Granularity::Line => (f1.lines.is_empty(), f2.lines.is_empty()),
                Granularity::Token => (f1.tokens.is_empty(), f2.tokens.is_empty()),
            };
            log::warn!("pair {id}: empty fragment at {} {:?} granularity", f1.level, granularity);
            Ok(if e1 && e2 { 1.0 } else { 0.0 })
        }
        Err(e) => Err(e),
    }
}

/// Extracts features for many pairs in parallel, preserving order.
pub fn extract_all(pairs: &[ClonePair], include_extras: bool) -> Vec<Result<FeatureVector, Error>> {
    pairs.par_iter().map(|p| extract_features(p, include_extras)).collect()
}

fn code_tokens(fragment: &CodeFragment) -> Vec<Token> {
    match tokenize(fragment) {
        Ok(lexed) => lexed.tokens.into_iter().filter(|t| t.kind.is_code()).collect(),
        Err(_) => Vec::new(),
    }
}

fn unmatched_in(fragment: &CodeFragment) -> usize {
    let mut open = 0usize;
    let mut stray_closes = 0usize;
    for tok in code_tokens(fragment) {
        if tok.kind != TokenKind::Punctuation {
            continue;
        }
        match tok.text.as_str() {
            "{" => open += 1,
            "}" if open > 0 => open -= 1,
            "}" => stray_closes += 1,
            _ => {}
        }
    }
    open + stray_closes
}

/// Opens without a close plus closes without an open, summed over both
/// fragments. Braces in literals and comments do not count.
pub fn count_unmatched_braces(f1: &CodeFragment, f2: &CodeFragment) -> usize {
    unmatched_in(f1) + unmatched_in(f2)
}

/// Methods only partially contained in either fragment.
pub fn functions_intersected(pair: &ClonePair) -> usize {
    partial_methods(&pair.fragment1) + partial_methods(&pair.fragment2)
}

/// Counts methods the fragment cuts through.
///
/// A method header is `name ( ... ) [throws A, B] {` where `name` is an
/// identifier not preceded by `new` or `.`. A header at the fragment's top
/// brace depth whose body is not closed inside the fragment is a partial
/// method. If the fragment first closes more braces than it opened and then
/// reaches a method header at that outer depth, it began inside a method,
/// which counts as one more partial method.
pub fn partial_methods(fragment: &CodeFragment) -> usize {
    let toks = code_tokens(fragment);
    let mut depth: i64 = 0;
    let mut min_depth: i64 = 0;
    // (depth of the header, body closed?)
    let mut headers: Vec<(i64, bool)> = Vec::new();
    let mut stack: Vec<Option<usize>> = Vec::new();
    for (i, tok) in toks.iter().enumerate() {
        if tok.kind != TokenKind::Punctuation {
            continue;
        }
        if tok.is("{") {
            let header = if is_method_header(&toks, i) {
                headers.push((depth, false));
                Some(headers.len() - 1)
            } else {
                None
            };
            stack.push(header);
            depth += 1;
        } else if tok.is("}") {
            if let Some(Some(h)) = stack.pop() {
                headers[h].1 = true;
            }
            depth -= 1;
            min_depth = min_depth.min(depth);
        }
    }
    let open_at_top = headers.iter().filter(|(d, closed)| *d == min_depth && !closed).count();
    let began_inside = min_depth < 0 && headers.iter().any(|(d, _)| *d == min_depth);
    open_at_top + usize::from(began_inside)
}

pub(crate) fn is_method_header(toks: &[Token], brace: usize) -> bool {
    let mut i = brace;
    // skip a `throws A, b.C` clause
    if let Some(t) = back(toks, i, |t| t.kind == TokenKind::Identifier) {
        let mut j = t;
        loop {
            match toks.get(j.wrapping_sub(1)) {
                Some(p) if p.is(".") || p.is(",") || p.kind == TokenKind::Identifier => j -= 1,
                Some(p) if p.is("throws") => {
                    i = j - 1;
                    break;
                }
                _ => break,
            }
        }
    }
    let Some(close) = back(toks, i, |t| t.is(")")) else {
        return false;
    };
    let mut balance = 0i64;
    let mut open = None;
    for j in (0..=close).rev() {
        if toks[j].is(")") {
            balance += 1;
        } else if toks[j].is("(") {
            balance -= 1;
            if balance == 0 {
                open = Some(j);
                break;
            }
        }
    }
    let Some(open) = open else {
        return false;
    };
    let Some(name) = back(toks, open, |t| t.kind == TokenKind::Identifier) else {
        return false;
    };
    !matches!(toks.get(name.wrapping_sub(1)), Some(p) if p.is("new") || p.is("."))
}

/// Index of the token right before `i` when it satisfies `pred`.
fn back(toks: &[Token], i: usize, pred: impl Fn(&Token) -> bool) -> Option<usize> {
    let j = i.checked_sub(1)?;
    pred(&toks[j]).then_some(j)
}

/// Normalized histogram of one feature for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDistribution {
    pub name: String,
    pub mean_tp: f64,
    pub mean_fp: f64,
    pub delta_mu: f64,
    pub tp: Histogram,
    pub fp: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub features: Vec<FeatureDistribution>,
    /// Feature indices ordered by descending mean difference.
    pub ranking: Vec<usize>,
}

pub const HISTOGRAM_BINS: usize = 20;

impl DistributionReport {
    pub fn ranked_names(&self) -> Vec<&str> {
        self.ranking.iter().map(|&i| self.features[i].name.as_str()).collect()
    }

    pub fn summary(&self) -> String {
        let mut out = String::from("feature,mean_tp,mean_fp,delta_mu\n");
        for &i in &self.ranking {
            let f = &self.features[i];
            out.push_str(&format!("{},{:.6},{:.6},{:.6}\n", f.name, f.mean_tp, f.mean_fp, f.delta_mu));
        }
        out
    }
}

/// Per-feature class histograms, means and mean differences.
pub fn distribution_report(rows: &[(FeatureVector, Label)]) -> Result<DistributionReport, Error> {
    let n_tp = rows.iter().filter(|r| r.1 == Label::TruePositive).count();
    let n_fp = rows.len() - n_tp;
    if n_tp == 0 || n_fp == 0 {
        return Err(Error::InsufficientClasses);
    }
    let width = rows[0].0.len();
    if let Some(bad) = rows.iter().find(|r| r.0.len() != width) {
        return Err(Error::DimensionMismatch { expected: width, got: bad.0.len() });
    }
    let names = feature_names(width == FEATURE_NAMES.len() + EXTRA_FEATURE_NAMES.len());
    let mut features = Vec::with_capacity(width);
    for f in 0..width {
        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.0.values[f]), hi.max(r.0.values[f]))
        });
        let step = (hi - lo) / HISTOGRAM_BINS as f64;
        let edges: Vec<f64> = (0..=HISTOGRAM_BINS).map(|i| lo + step * i as f64).collect();
        let bin = |v: f64| -> usize {
            if step <= 0.0 {
                0
            } else {
                (((v - lo) / step).floor() as usize).min(HISTOGRAM_BINS - 1)
            }
        };
        let mut counts = [vec![0.0; HISTOGRAM_BINS], vec![0.0; HISTOGRAM_BINS]];
        let mut sums = [0.0, 0.0];
        for (x, label) in rows {
            let c = label.class_index();
            counts[c][bin(x.values[f])] += 1.0;
            sums[c] += x.values[f];
        }
        let [tp_counts, fp_counts] = counts;
        let mean_tp = sums[0] / n_tp as f64;
        let mean_fp = sums[1] / n_fp as f64;
        features.push(FeatureDistribution {
            name: names.get(f).map(|s| s.to_string()).unwrap_or_else(|| format!("f{f}")),
            mean_tp,
            mean_fp,
            delta_mu: (mean_tp - mean_fp).abs(),
            tp: Histogram {
                edges: edges.clone(),
                density: tp_counts.into_iter().map(|c| c / n_tp as f64).collect(),
            },
            fp: Histogram {
                edges,
                density: fp_counts.into_iter().map(|c| c / n_fp as f64).collect(),
            },
        });
    }
    let mut ranking: Vec<usize> = (0..width).collect();
    ranking.sort_by(|&a, &b| features[b].delta_mu.total_cmp(&features[a].delta_mu).then(a.cmp(&b)));
    Ok(DistributionReport { features, ranking })
}

/// Extracts features for labeled pairs and builds the distribution report.
pub fn feature_distribution_report(dataset: &[ClonePair]) -> Result<DistributionReport, Error> {
    let labeled: Vec<&ClonePair> = dataset.iter().filter(|p| p.label.is_some()).collect();
    let rows = labeled
        .par_iter()
        .map(|p| Ok((extract_features(p, false)?, p.label.expect("filtered above"))))
        .collect::<Result<Vec<_>, Error>>()?;
    distribution_report(&rows)
}

/// One row of the feature CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub id: String,
    pub features: FeatureVector,
    pub label: Option<Label>,
}

/// Writes `id,<feature names...>,label`. Values use the shortest
/// representation that parses back to the same float.
pub fn write_feature_csv<W: Write>(writer: W, rows: &[FeatureRow]) -> Result<(), Error> {
    let with_extras = rows.first().is_some_and(|r| r.features.has_extras());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id"];
    header.extend(feature_names(with_extras));
    header.push("label");
    w.write_record(&header)?;
    for row in rows {
        if row.features.len() != header.len() - 2 {
            return Err(Error::DimensionMismatch { expected: header.len() - 2, got: row.features.len() });
        }
        let mut record = vec![row.id.clone()];
        record.extend(row.features.values.iter().map(|v| v.to_string()));
        record.push(label_column(row.label).to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(reader: R) -> Result<Vec<FeatureRow>, Error> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let width = header.len().saturating_sub(2);
    let expected: Vec<&str> = std::iter::once("id")
        .chain(feature_names(width == 10))
        .chain(std::iter::once("label"))
        .collect();
    if header != expected {
        return Err(Error::MalformedRow { row: 0, reason: format!("unexpected header {header:?}") });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let values = (1..=width)
            .map(|c| {
                rec[c].parse::<f64>().map_err(|e| Error::MalformedRow { row, reason: format!("column {}: {e}", c) })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let label = parse_label_column(&rec[width + 1]).map_err(|e| Error::MalformedRow { row, reason: e.to_string() })?;
        rows.push(FeatureRow { id: rec[0].to_string(), features: FeatureVector { values }, label });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(a: &str, b: &str) -> ClonePair {
        ClonePair::new("p", CodeFragment::java(a), CodeFragment::java(b))
    }

    const METHOD: &str = "int add(int a, int b) {\n    int s = a + b; // sum\n    return s;\n}\n";

    #[test]
    fn identical_fragments() {
        let v = extract_features(&pair(METHOD, METHOD), false).unwrap();
        assert_eq!(v.values, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn renamed_fragments() {
        let renamed = "int plus(int x, int y) {\n    int t = x + y;\n    return t;\n}\n";
        let v = extract_features(&pair(METHOD, renamed), false).unwrap();
        assert!(v.get("lineSimT1").unwrap() < 1.0);
        for name in ["lineSimT2", "lineSimT3", "tokSimT2", "tokSimT3"] {
            assert_eq!(v.get(name).unwrap(), 1.0, "{name}");
        }
    }

    #[test]
    fn extras_appended_on_request() {
        let v = extract_features(&pair(METHOD, "x();\ny();"), true).unwrap();
        assert_eq!(v.len(), 10);
        assert_eq!(v.get("avgSize").unwrap(), 3.0);
        assert_eq!(v.get("sizeDiff").unwrap(), 2.0);
    }

    #[test]
    fn empty_fragment_rejected() {
        assert!(matches!(extract_features(&pair("// nothing", "x();"), false), Err(Error::EmptyFragment)));
    }

    #[test]
    fn type3_emptied_fragment_maps_to_zero() {
        let v = extract_features(&pair("}\n", "x();\n"), false).unwrap();
        assert_eq!(v.get("lineSimT3").unwrap(), 0.0);
        let v = extract_features(&pair("}\n", "}\n"), false).unwrap();
        assert_eq!(v.get("lineSimT3").unwrap(), 1.0);
    }

    #[test]
    fn unmatched_braces() {
        let f = CodeFragment::java;
        assert_eq!(count_unmatched_braces(&f("int f() { }"), &f("{ }")), 0);
        assert_eq!(count_unmatched_braces(&f("if (x) {"), &f("}")), 2);
        assert_eq!(count_unmatched_braces(&f("\"}\""), &f("")), 0);
        assert_eq!(count_unmatched_braces(&f("// {\n/* } */ '{'"), &f("} {")), 2);
    }

    #[test]
    fn partial_method_counts() {
        assert_eq!(partial_methods(&CodeFragment::java(METHOD)), 0);
        let across = "    x = 1;\n  }\n\n  void next(String s) throws IOException {\n    y = 2;\n";
        assert_eq!(partial_methods(&CodeFragment::java(across)), 2);
        let head_only = "void f() {\n  if (a) {\n    b();\n  }\n";
        assert_eq!(partial_methods(&CodeFragment::java(head_only)), 1);
        // control flow and anonymous classes are not methods
        let not_methods = "if (a) {\n  r = new Runnable() {\n";
        assert_eq!(partial_methods(&CodeFragment::java(not_methods)), 0);
        // a tail of a block without a following header stays 0
        assert_eq!(partial_methods(&CodeFragment::java("a();\n}\n}\n")), 0);
    }

    fn row(values: Vec<f64>, label: Label) -> (FeatureVector, Label) {
        (FeatureVector::new(values), label)
    }

    #[test]
    fn distribution_constant_and_separated() {
        let rows = vec![
            row(vec![0.5, 1.0], Label::TruePositive),
            row(vec![0.5, 1.0], Label::TruePositive),
            row(vec![0.5, 0.0], Label::FalsePositive),
        ];
        let report = distribution_report(&rows).unwrap();
        assert_eq!(report.features[0].delta_mu, 0.0);
        assert_eq!(report.features[1].delta_mu, 1.0);
        assert_eq!(report.ranking, vec![1, 0]);
        for f in &report.features {
            assert!((f.tp.density.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!((f.fp.density.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert_eq!(f.tp.edges.len(), HISTOGRAM_BINS + 1);
        }
    }

    #[test]
    fn distribution_needs_both_classes() {
        let rows = vec![row(vec![0.5], Label::TruePositive)];
        assert!(matches!(distribution_report(&rows), Err(Error::InsufficientClasses)));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            FeatureRow { id: "a".into(), features: FeatureVector::new(vec![0.1, 1.0 / 3.0, 1.0, 0.0, 0.25, 0.7, 2.0, 1.0]), label: Some(Label::TruePositive) },
            FeatureRow { id: "b,c".into(), features: FeatureVector::new(vec![0.0; 8]), label: None },
        ];
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("id,lineSimT1,lineSimT2,lineSimT3,tokSimT2,tokSimT1,tokSimT3,functionsIntersected,unmatchedBraces,label\n"));
        assert_eq!(read_feature_csv(buf.as_slice()).unwrap(), rows);
    }
}
