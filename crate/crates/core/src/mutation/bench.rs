//! Labeled benchmark of mutated (true) and unrelated (false) clone pairs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mutate_fragment, CloneType, MutationOperator};
use crate::diff::{fragment_similarity, Granularity};
use crate::normalize::{normalize, NormalizationLevel};
use crate::pair::{ClonePair, CodeFragment, Label};
use crate::Error;

/// Negative pairs more similar than this at Type1 line level are redrawn.
pub const NEGATIVE_MAX_LINE_SIM: f64 = 0.5;
pub const NEGATIVE_MAX_DRAWS: usize = 100;
const MUTATION_ATTEMPTS: usize = 50;
pub const BENCH_LABELER: &str = "mutation-bench";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub id: String,
    /// `None` for negative pairs.
    pub operator: Option<MutationOperator>,
    pub clone_type: Option<CloneType>,
    pub label: Label,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchmarkManifest {
    pub seed: u64,
    /// `path:start-end` of every corpus fragment, in corpus order.
    pub corpus_ids: Vec<String>,
    pub entries: Vec<BenchmarkEntry>,
}

impl BenchmarkManifest {
    pub fn counts_by_label(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            *m.entry(e.label.short().to_string()).or_insert(0) += 1;
        }
        m
    }

    pub fn counts_by_clone_type(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            let k = e.clone_type.map_or("none".to_string(), |c| c.to_string());
            *m.entry(k).or_insert(0) += 1;
        }
        m
    }

    pub fn counts_by_operator(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            let k = e.operator.map_or("negative".to_string(), |o| o.id().to_string());
            *m.entry(k).or_insert(0) += 1;
        }
        m
    }
}

fn corpus_id(f: &CodeFragment, index: usize) -> String {
    match &f.file_path {
        Some(p) => format!("{p}:{}-{}", f.start_line, f.end_line),
        None => format!("#{index}:{}-{}", f.start_line, f.end_line),
    }
}

/// Origin file of a fragment; fragments without a path are their own origin.
fn origin(f: &CodeFragment, index: usize) -> String {
    f.file_path.clone().unwrap_or_else(|| format!("#{index}"))
}

pub fn line_sim_t1(a: &CodeFragment, b: &CodeFragment) -> Result<f64, Error> {
    let na = normalize(a, NormalizationLevel::Type1)?;
    let nb = normalize(b, NormalizationLevel::Type1)?;
    Ok(fragment_similarity(&na, &nb, Granularity::Line)?.value)
}

/// Generates `true_count` mutants (labeled true) followed by `false_count`
/// cross-file pairs (labeled false). Pair `i` draws from its own generator
/// seeded with `seed ^ i`, so the output depends only on the inputs.
/// `operator_mix` weights the operators in [`MutationOperator::ALL`] order.
pub fn generate_benchmark(
    corpus: &[CodeFragment],
    true_count: usize,
    false_count: usize,
    operator_mix: &[f64; 9],
    seed: u64,
) -> Result<(Vec<ClonePair>, BenchmarkManifest), Error> {
    let corpus_ids: Vec<String> = corpus.iter().enumerate().map(|(i, f)| corpus_id(f, i)).collect();
    if true_count == 0 && false_count == 0 {
        return Ok((Vec::new(), BenchmarkManifest { seed, corpus_ids, entries: Vec::new() }));
    }
    if corpus.len() < 2 {
        return Err(Error::CorpusTooSmall(format!("{} fragments; need at least 2", corpus.len())));
    }
    let origins: Vec<String> = corpus.iter().enumerate().map(|(i, f)| origin(f, i)).collect();
    if false_count > 0 && origins.iter().all(|o| *o == origins[0]) {
        return Err(Error::CorpusTooSmall("negative pairs need fragments from two different files".into()));
    }
    let weights = if true_count > 0 {
        Some(
            WeightedIndex::new(operator_mix)
                .map_err(|e| Error::InvalidConfig(format!("operator mix: {e}")))?,
        )
    } else {
        None
    };

    let produced = (0..true_count + false_count)
        .into_par_iter()
        .map(|i| {
            let pair_seed = seed ^ i as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(pair_seed);
            let id = format!("pair-{i:05}");
            if i < true_count {
                let dist = weights.as_ref().expect("weights exist when positives are requested");
                positive(corpus, dist, &mut rng, id, pair_seed)
            } else {
                negative(corpus, &origins, &mut rng, id, pair_seed)
            }
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let (pairs, entries) = produced.into_iter().unzip();
    Ok((pairs, BenchmarkManifest { seed, corpus_ids, entries }))
}

fn positive(
    corpus: &[CodeFragment],
    dist: &WeightedIndex<f64>,
    rng: &mut ChaCha8Rng,
    id: String,
    pair_seed: u64,
) -> Result<(ClonePair, BenchmarkEntry), Error> {
    let mut last_op = MutationOperator::ALL[0];
    for _ in 0..MUTATION_ATTEMPTS {
        let original = &corpus[rng.gen_range(0..corpus.len())];
        let op = MutationOperator::ALL[dist.sample(rng)];
        last_op = op;
        match mutate_fragment(original, op, rng.gen()) {
            Ok(mutant) => {
                let pair = ClonePair::new(id.clone(), original.clone(), mutant)
                    .with_detector(BENCH_LABELER)
                    .labeled(Label::TruePositive, BENCH_LABELER);
                let entry = BenchmarkEntry {
                    id,
                    operator: Some(op),
                    clone_type: Some(op.clone_type()),
                    label: Label::TruePositive,
                    seed: pair_seed,
                };
                return Ok((pair, entry));
            }
            Err(Error::NoMutableSite(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoMutableSite(last_op.id().to_string()))
}

fn negative(
    corpus: &[CodeFragment],
    origins: &[String],
    rng: &mut ChaCha8Rng,
    id: String,
    pair_seed: u64,
) -> Result<(ClonePair, BenchmarkEntry), Error> {
    for _ in 0..NEGATIVE_MAX_DRAWS {
        let a = rng.gen_range(0..corpus.len());
        let b = rng.gen_range(0..corpus.len());
        if origins[a] == origins[b] {
            continue;
        }
        match line_sim_t1(&corpus[a], &corpus[b]) {
            Ok(s) if s <= NEGATIVE_MAX_LINE_SIM => {
                let pair = ClonePair::new(id.clone(), corpus[a].clone(), corpus[b].clone())
                    .with_detector(BENCH_LABELER)
                    .labeled(Label::FalsePositive, BENCH_LABELER);
                let entry = BenchmarkEntry { id, operator: None, clone_type: None, label: Label::FalsePositive, seed: pair_seed };
                return Ok((pair, entry));
            }
            Ok(_) | Err(Error::EmptyFragment) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::ExhaustedResampling(NEGATIVE_MAX_DRAWS))
}

const MANIFEST_HEADER: [&str; 5] = ["id", "operator", "clone_type", "label", "seed"];

/// Writes `pairs/<id>/a.java`, `pairs/<id>/b.java` and `manifest.csv`.
pub fn write_benchmark_dir(dir: &Path, pairs: &[ClonePair], manifest: &BenchmarkManifest) -> Result<(), Error> {
    for p in pairs {
        let pd = dir.join("pairs").join(&p.id);
        fs::create_dir_all(&pd)?;
        fs::write(pd.join("a.java"), &p.fragment1.source_text)?;
        fs::write(pd.join("b.java"), &p.fragment2.source_text)?;
    }
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("manifest.csv"))?;
    w.write_record(MANIFEST_HEADER)?;
    for e in &manifest.entries {
        w.write_record([
            e.id.clone(),
            e.operator.map_or("negative".into(), |o| o.id().to_string()),
            e.clone_type.map_or("none".into(), |c| c.to_string()),
            e.label.short().to_string(),
            e.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a benchmark directory back into labeled pairs.
pub fn read_benchmark_dir(dir: &Path) -> Result<(Vec<ClonePair>, BenchmarkManifest), Error> {
    let manifest_path = dir.join("manifest.csv");
    if !manifest_path.exists() {
        return Err(Error::MissingSourceFile(manifest_path.display().to_string()));
    }
    let mut r = csv::Reader::from_path(&manifest_path)?;
    if r.headers()?.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(Error::MalformedRow { row: 0, reason: "unexpected manifest header".into() });
    }
    let mut pairs = Vec::new();
    let mut entries = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let bad = |reason: String| Error::MalformedRow { row, reason };
        let id = rec[0].to_string();
        let operator = match &rec[1] {
            "negative" => None,
            s => Some(s.parse::<MutationOperator>().map_err(|e| bad(e.to_string()))?),
        };
        let clone_type = match &rec[2] {
            "none" => None,
            s => Some(s.parse::<CloneType>().map_err(|e| bad(e.to_string()))?),
        };
        let label: Label = rec[3].parse().map_err(|e: Error| bad(e.to_string()))?;
        let seed: u64 = rec[4].parse().map_err(|e| bad(format!("seed: {e}")))?;
        let read = |name: &str| -> Result<CodeFragment, Error> {
            let rel = format!("pairs/{id}/{name}");
            let path = dir.join(&rel);
            let text = fs::read_to_string(&path).map_err(|_| Error::MissingSourceFile(path.display().to_string()))?;
            let mut f = CodeFragment::java(text);
            f.file_path = Some(rel);
            Ok(f)
        };
        let pair = ClonePair::new(id.clone(), read("a.java")?, read("b.java")?)
            .with_detector(BENCH_LABELER)
            .labeled(label, BENCH_LABELER);
        pairs.push(pair);
        entries.push(BenchmarkEntry { id, operator, clone_type, label, seed });
    }
    Ok((pairs, BenchmarkManifest { seed: 0, corpus_ids: Vec::new(), entries }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synthetic_corpus;
    use crate::features::extract_features;

    const UNIFORM: [f64; 9] = [1.0; 9];

    #[test]
    fn empty_request() {
        let (pairs, m) = generate_benchmark(&[], 0, 0, &UNIFORM, 1).unwrap();
        assert!(pairs.is_empty() && m.entries.is_empty());
        assert!(matches!(generate_benchmark(&[], 1, 0, &UNIFORM, 1), Err(Error::CorpusTooSmall(_))));
    }

    #[test]
    fn accounting_and_invariants() {
        let corpus = synthetic_corpus(6, 6, 3);
        let (pairs, m) = generate_benchmark(&corpus, 45, 20, &UNIFORM, 99).unwrap();
        assert_eq!(pairs.len(), 65);
        assert_eq!(m.counts_by_label()["TP"], 45);
        assert_eq!(m.counts_by_label()["FP"], 20);
        assert_eq!(m.counts_by_operator().values().sum::<usize>(), 65);
        for (p, e) in pairs.iter().zip(&m.entries) {
            let f = extract_features(p, false).unwrap();
            match e.clone_type {
                Some(CloneType::Type1) => assert!(f.values[..6].iter().all(|&v| v == 1.0), "{} {:?}", e.id, f),
                Some(CloneType::Type2) => {
                    assert_eq!(f.get("lineSimT2"), Some(1.0));
                    assert_eq!(f.get("tokSimT2"), Some(1.0));
                }
                Some(CloneType::Type3) => {}
                None => assert!(f.get("lineSimT1").unwrap() <= NEGATIVE_MAX_LINE_SIM),
            }
        }
    }

    #[test]
    fn reproducible_and_round_trips() {
        let corpus = synthetic_corpus(4, 5, 8);
        let a = generate_benchmark(&corpus, 12, 6, &UNIFORM, 5).unwrap();
        let b = generate_benchmark(&corpus, 12, 6, &UNIFORM, 5).unwrap();
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        write_benchmark_dir(dir.path(), &a.0, &a.1).unwrap();
        let (pairs, manifest) = read_benchmark_dir(dir.path()).unwrap();
        assert_eq!(manifest.entries, a.1.entries);
        for (p, q) in pairs.iter().zip(&a.0) {
            assert_eq!(p.fragment1.source_text, q.fragment1.source_text);
            assert_eq!(p.fragment2.source_text, q.fragment2.source_text);
            assert_eq!(p.label, q.label);
        }
    }

    #[test]
    fn single_file_corpus_cannot_make_negatives() {
        let corpus: Vec<CodeFragment> =
            synthetic_corpus(1, 3, 1).into_iter().collect();
        assert!(matches!(generate_benchmark(&corpus, 0, 1, &UNIFORM, 0), Err(Error::CorpusTooSmall(_))));
    }
}
