//! Token-trigram TF-IDF baseline.
//!
//! Every labeled pair becomes one document: the Type1 token texts of the first
//! fragment, a separator, then those of the second. A candidate is scored
//! against each class partition by the weighted mean cosine similarity of
//! TF-IDF vectors, and the two class scores are normalized.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Prediction;
use crate::normalize::{normalize, NormalizationLevel};
use crate::pair::{ClonePair, Label};
use crate::Error;

pub const DEFAULT_NGRAM: usize = 3;
const SEPARATOR: &str = "\u{1}|\u{1}";
const JOIN: char = '\u{1f}';

pub type TermCounts = BTreeMap<String, u32>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FicaDocument {
    pub id: String,
    pub label: Label,
    pub weight: f64,
    pub terms: TermCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfBaselineModel {
    pub n: usize,
    pub documents: Vec<FicaDocument>,
    /// Number of documents containing each term.
    pub document_frequency: BTreeMap<String, u32>,
}

/// N-gram multiset of a pair.
pub fn document_terms(pair: &ClonePair, n: usize) -> Result<TermCounts, Error> {
    let mut seq: Vec<String> = normalize(&pair.fragment1, NormalizationLevel::Type1)?
        .tokens
        .into_iter()
        .map(|t| t.text)
        .collect();
    seq.push(SEPARATOR.to_string());
    seq.extend(normalize(&pair.fragment2, NormalizationLevel::Type1)?.tokens.into_iter().map(|t| t.text));
    Ok(ngrams(&seq, n))
}

pub fn ngrams(seq: &[String], n: usize) -> TermCounts {
    let mut out = TermCounts::new();
    if n == 0 || seq.len() < n {
        return out;
    }
    for w in seq.windows(n) {
        let mut key = String::new();
        for (i, t) in w.iter().enumerate() {
            if i > 0 {
                key.push(JOIN);
            }
            key.push_str(t);
        }
        *out.entry(key).or_insert(0) += 1;
    }
    out
}

/// Occurrences of `term` divided by the number of n-grams in the document.
pub fn tf(term: &str, doc: &TermCounts) -> f64 {
    let total: u32 = doc.values().sum();
    if total == 0 {
        return 0.0;
    }
    doc.get(term).copied().unwrap_or(0) as f64 / total as f64
}

/// `ln(|D| / (1 + df))`
pub fn idf(num_docs: usize, df: u32) -> f64 {
    (num_docs as f64 / (1.0 + df as f64)).ln()
}

impl TfIdfBaselineModel {
    fn idf_of(&self, term: &str) -> f64 {
        idf(self.documents.len(), self.document_frequency.get(term).copied().unwrap_or(0))
    }

    fn vector<'a>(&self, doc: &'a TermCounts) -> BTreeMap<&'a str, f64> {
        let total: u32 = doc.values().sum();
        doc.iter()
            .map(|(t, &c)| (t.as_str(), c as f64 / total as f64 * self.idf_of(t)))
            .collect()
    }

    /// Cosine of the TF-IDF vectors. Identical documents score 1 and a
    /// zero-length vector scores 0 against anything else.
    pub fn cosine(&self, a: &TermCounts, b: &TermCounts) -> f64 {
        if a == b && !a.is_empty() {
            return 1.0;
        }
        let va = self.vector(a);
        let vb = self.vector(b);
        let dot: f64 = va.iter().filter_map(|(t, x)| vb.get(t).map(|y| x * y)).sum();
        let na = va.values().map(|x| x * x).sum::<f64>().sqrt();
        let nb = vb.values().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        (dot / (na * nb)).clamp(0.0, 1.0)
    }

    /// Weighted mean similarity to the documents carrying `label`.
    pub fn partition_score(&self, candidate: &TermCounts, label: Label) -> f64 {
        let (num, den) = self
            .documents
            .iter()
            .filter(|d| d.label == label)
            .fold((0.0, 0.0), |(num, den), d| (num + self.cosine(candidate, &d.terms) * d.weight, den + d.weight));
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

pub fn train_fica(pairs: &[ClonePair]) -> Result<TfIdfBaselineModel, Error> {
    train_fica_with(pairs, DEFAULT_NGRAM)
}

pub fn train_fica_with(pairs: &[ClonePair], n: usize) -> Result<TfIdfBaselineModel, Error> {
    let mut documents = Vec::new();
    for p in pairs {
        if let Some(label) = p.label {
            documents.push(FicaDocument { id: p.id.clone(), label, weight: 1.0, terms: document_terms(p, n)? });
        }
    }
    from_documents(n, documents)
}

pub fn from_documents(n: usize, documents: Vec<FicaDocument>) -> Result<TfIdfBaselineModel, Error> {
    let has = |l: Label| documents.iter().any(|d| d.label == l);
    if !has(Label::TruePositive) || !has(Label::FalsePositive) {
        return Err(Error::EmptyPartition);
    }
    if documents.iter().any(|d| !(0.0..=1.0).contains(&d.weight)) {
        return Err(Error::InvalidConfig("document weights must lie in [0, 1]".into()));
    }
    let mut document_frequency = BTreeMap::new();
    for d in &documents {
        for t in d.terms.keys() {
            *document_frequency.entry(t.clone()).or_insert(0) += 1;
        }
    }
    Ok(TfIdfBaselineModel { n, documents, document_frequency })
}

pub fn fica_score(model: &TfIdfBaselineModel, candidate: &ClonePair) -> Result<Prediction, Error> {
    let terms = document_terms(candidate, model.n)?;
    Ok(fica_score_terms(model, &terms))
}

pub fn fica_score_terms(model: &TfIdfBaselineModel, terms: &TermCounts) -> Prediction {
    let t = model.partition_score(terms, Label::TruePositive);
    let f = model.partition_score(terms, Label::FalsePositive);
    Prediction::from_scores(t, f)
}
