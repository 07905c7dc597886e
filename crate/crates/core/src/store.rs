//! File-backed clone store.
//!
//! The store file holds one JSON document per line, each a full snapshot of
//! a [`StoreRecord`]. Updates append a new snapshot; on load the last
//! snapshot of each id wins. An unterminated final line (an interrupted
//! append) is dropped with a warning.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::{TrainingRow, TrainingSet};
use crate::features::{extract_features, FeatureVector};
use crate::mutation::read_benchmark_dir;
use crate::pair::{ClonePair, CodeFragment, Label, Language};
use crate::Error;

pub const PATH_HEADER: [&str; 8] = ["file1", "start1", "end1", "file2", "start2", "end2", "detector", "lang"];
pub const INLINE_HEADER: [&str; 4] = ["code1", "code2", "detector", "lang"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordSource {
    DetectorImport,
    MutationBench,
    ApiFeedback,
}

impl RecordSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecordSource::DetectorImport => "detector-import",
            RecordSource::MutationBench => "mutation-bench",
            RecordSource::ApiFeedback => "api-feedback",
        }
    }
}

impl fmt::Display for RecordSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecordSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "detector-import" => Ok(RecordSource::DetectorImport),
            "mutation-bench" => Ok(RecordSource::MutationBench),
            "api-feedback" => Ok(RecordSource::ApiFeedback),
            _ => Err(Error::InvalidConfig(format!("unknown record source {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEvent {
    pub labeler: String,
    pub label: Label,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreRecord {
    pub pair: ClonePair,
    pub source: RecordSource,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub history: Vec<LabelEvent>,
}

impl StoreRecord {
    pub fn current_label(&self) -> Option<Label> {
        self.history.last().map(|e| e.label)
    }

    /// Latest label among entries by any of `labelers`.
    pub fn label_by(&self, labelers: &[String]) -> Option<&LabelEvent> {
        self.history.iter().rev().find(|e| labelers.contains(&e.labeler))
    }

    fn sync_pair_label(&mut self) {
        let last = self.history.last();
        self.pair.label = last.map(|e| e.label);
        self.pair.labeler = last.map(|e| e.labeler.clone());
        self.pair.labeled_at = last.map(|e| e.at);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImportFormat {
    GenericCsv,
    PairsDirectory,
}

impl FromStr for ImportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "generic-csv" => Ok(ImportFormat::GenericCsv),
            "pairs-directory" => Ok(ImportFormat::PairsDirectory),
            _ => Err(Error::InvalidConfig(format!("unknown import format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportSpec {
    pub format: ImportFormat,
    pub path: PathBuf,
    /// Used when a CSV row leaves its detector column empty.
    pub detector: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImportReport {
    pub imported: usize,
    pub duplicates: usize,
    /// `(row, reason)`; rows are 1-based, the header excluded.
    pub malformed: Vec<(usize, String)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingFilter {
    pub labelers: Option<Vec<String>>,
    pub detectors: Option<Vec<String>>,
    pub sources: Option<Vec<RecordSource>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub unlabeled: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvLayout {
    Paths,
    Inline,
}

struct Inner {
    records: BTreeMap<String, StoreRecord>,
    writer: Option<BufWriter<File>>,
}

impl Inner {
    fn append(&mut self, rec: &StoreRecord) -> Result<(), Error> {
        if let Some(w) = self.writer.as_mut() {
            serde_json::to_writer(&mut *w, rec)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        Ok(())
    }

    fn put(&mut self, rec: StoreRecord) -> Result<(), Error> {
        self.append(&rec)?;
        self.records.insert(rec.pair.id.clone(), rec);
        Ok(())
    }
}

/// Writes go through one lock holder at a time; reads clone what they need
/// under a shared lock, so each call sees one consistent state.
pub struct CloneStore {
    path: Option<PathBuf>,
    inner: RwLock<Inner>,
    cache: Mutex<HashMap<String, FeatureVector>>,
}

fn read_store_file(path: &Path) -> Result<BTreeMap<String, StoreRecord>, Error> {
    let mut records = BTreeMap::new();
    let text = fs::read_to_string(path)?;
    let terminated = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<StoreRecord>(line) {
            Ok(rec) => {
                records.insert(rec.pair.id.clone(), rec);
            }
            Err(e) if i + 1 == lines.len() && !terminated => {
                log::warn!("{}: dropping incomplete last line: {e}", path.display());
            }
            Err(e) => return Err(Error::MalformedStore { line: i + 1, reason: e.to_string() }),
        }
    }
    Ok(records)
}

impl CloneStore {
    /// Opens or creates the store file at `path`.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, Error> {
        let path = path.into();
        let records = if path.exists() { read_store_file(&path)? } else { BTreeMap::new() };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        // Cut a torn last line so the next append starts cleanly.
        let bytes = fs::read(&path)?;
        if !bytes.is_empty() && !bytes.ends_with(b"\n") {
            let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            file.set_len(keep as u64)?;
        }
        Ok(CloneStore {
            path: Some(path),
            inner: RwLock::new(Inner { records, writer: Some(BufWriter::new(file)) }),
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// A store that is never written to disk.
    pub fn in_memory() -> Self {
        CloneStore {
            path: None,
            inner: RwLock::new(Inner { records: BTreeMap::new(), writer: None }),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Inner> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, Inner> {
        self.inner.write().unwrap_or_else(|e| e.into_inner())
    }

    pub fn len(&self) -> usize {
        self.read().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: &str) -> Option<StoreRecord> {
        self.read().records.get(id).cloned()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.read().records.contains_key(id)
    }

    /// All records in id order.
    pub fn snapshot(&self) -> Vec<StoreRecord> {
        self.read().records.values().cloned().collect()
    }

    pub fn counts(&self) -> StoreCounts {
        let mut c = StoreCounts::default();
        for r in self.read().records.values() {
            match r.current_label() {
                Some(Label::TruePositive) => c.true_positive += 1,
                Some(Label::FalsePositive) => c.false_positive += 1,
                None => c.unlabeled += 1,
            }
        }
        c
    }

    /// Adds a pair unless its id is taken. A labeled pair starts with one
    /// history entry by its labeler. Returns whether it was added.
    pub fn insert(&self, pair: ClonePair, source: RecordSource) -> Result<bool, Error> {
        pair.validate()?;
        let mut inner = self.write();
        if inner.records.contains_key(&pair.id) {
            return Ok(false);
        }
        inner.put(new_record(pair, source))?;
        Ok(true)
    }

    pub fn record_label(&self, pair_id: &str, labeler: &str, label: Label) -> Result<StoreRecord, Error> {
        if labeler.trim().is_empty() {
            return Err(Error::LabelWithoutLabeler(pair_id.to_string()));
        }
        let mut inner = self.write();
        let mut rec = inner.records.get(pair_id).cloned().ok_or_else(|| Error::UnknownPair(pair_id.to_string()))?;
        if rec.history.last().is_some_and(|e| e.labeler == labeler && e.label == label) {
            return Ok(rec);
        }
        rec.history.push(LabelEvent { labeler: labeler.to_string(), label, at: Utc::now() });
        rec.sync_pair_label();
        inner.put(rec.clone())?;
        Ok(rec)
    }

    pub fn import_pairs(&self, spec: &ImportSpec) -> Result<ImportReport, Error> {
        match spec.format {
            ImportFormat::GenericCsv => self.import_csv(spec),
            ImportFormat::PairsDirectory => self.import_directory(spec),
        }
    }

    fn import_directory(&self, spec: &ImportSpec) -> Result<ImportReport, Error> {
        let (pairs, _) = read_benchmark_dir(&spec.path)?;
        let mut report = ImportReport::default();
        let mut inner = self.write();
        for mut pair in pairs {
            if inner.records.contains_key(&pair.id) {
                report.duplicates += 1;
                continue;
            }
            if let Some(d) = &spec.detector {
                pair.detector = Some(d.clone());
            }
            inner.put(new_record(pair, RecordSource::MutationBench))?;
            report.imported += 1;
        }
        Ok(report)
    }

    fn import_csv(&self, spec: &ImportSpec) -> Result<ImportReport, Error> {
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(&spec.path).map_err(|e| {
            if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                Error::MissingSourceFile(spec.path.display().to_string())
            } else {
                Error::from(e)
            }
        })?;
        let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let layout = if header == PATH_HEADER {
            CsvLayout::Paths
        } else if header == INLINE_HEADER {
            CsvLayout::Inline
        } else {
            return Err(Error::MalformedRow { row: 0, reason: format!("unexpected header {header:?}") });
        };
        let base = spec.path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut files = SourceFiles { base, cache: HashMap::new() };

        let mut parsed = Vec::new();
        let mut report = ImportReport::default();
        for (i, rec) in reader.records().enumerate() {
            let row = i + 1;
            let rec = match rec {
                Ok(r) => r,
                Err(e) => {
                    report.malformed.push((row, e.to_string()));
                    continue;
                }
            };
            match parse_row(&rec, layout, spec.detector.as_deref(), &mut files) {
                Ok(p) => parsed.push(p),
                Err(RowError::Malformed(reason)) => {
                    log::warn!("{} row {row}: {reason}", spec.path.display());
                    report.malformed.push((row, reason));
                }
                Err(RowError::Fatal(e)) => return Err(e),
            }
        }

        let mut seen = HashSet::new();
        let mut inner = self.write();
        for pair in parsed {
            if !seen.insert(pair.id.clone()) || inner.records.contains_key(&pair.id) {
                report.duplicates += 1;
                continue;
            }
            inner.put(new_record(pair, RecordSource::DetectorImport))?;
            report.imported += 1;
        }
        Ok(report)
    }

    /// Unlabeled records in id order, `page` counted from 0.
    /// Returns the page and the total number of unlabeled records.
    pub fn unlabeled_page(&self, page: usize, page_size: usize) -> (Vec<StoreRecord>, usize) {
        let inner = self.read();
        let unlabeled = inner.records.values().filter(|r| r.current_label().is_none());
        let total = unlabeled.clone().count();
        let items = unlabeled.skip(page.saturating_mul(page_size)).take(page_size).cloned().collect();
        (items, total)
    }

    /// Labeled pairs matching `filter`, in id order. With a labeler filter
    /// the label is that of the latest matching labeler.
    pub fn labeled_pairs(&self, filter: &TrainingFilter) -> Vec<ClonePair> {
        let inner = self.read();
        inner
            .records
            .values()
            .filter(|r| filter.sources.as_ref().is_none_or(|s| s.contains(&r.source)))
            .filter(|r| {
                filter
                    .detectors
                    .as_ref()
                    .is_none_or(|d| r.pair.detector.as_ref().is_some_and(|x| d.contains(x)))
            })
            .filter_map(|r| {
                let ev = match &filter.labelers {
                    Some(ls) => r.label_by(ls)?,
                    None => r.history.last()?,
                };
                let mut p = r.pair.clone();
                p.label = Some(ev.label);
                p.labeler = Some(ev.labeler.clone());
                p.labeled_at = Some(ev.at);
                Some(p)
            })
            .collect()
    }

    /// Features of a pair, memoized by the hash of both fragment texts.
    pub fn features(&self, pair: &ClonePair, include_extras: bool) -> Result<FeatureVector, Error> {
        let key = cache_key(pair, include_extras);
        if let Some(v) = self.cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(v.clone());
        }
        let v = extract_features(pair, include_extras)?;
        self.cache.lock().unwrap_or_else(|e| e.into_inner()).insert(key, v.clone());
        Ok(v)
    }

    /// Labeled records matching `filter` as a training set, in id order.
    /// Pairs whose features cannot be extracted are skipped with a warning.
    pub fn assemble_training_set(&self, filter: &TrainingFilter, include_extras: bool) -> TrainingSet {
        let pairs = self.labeled_pairs(filter);
        let rows = pairs
            .par_iter()
            .filter_map(|p| match self.features(p, include_extras) {
                Ok(x) => Some(TrainingRow { id: p.id.clone(), x, label: p.label.expect("labeled") }),
                Err(e) => {
                    log::warn!("skipping {}: {e}", p.id);
                    None
                }
            })
            .collect();
        TrainingSet::new(rows)
    }

    /// Writes records in the generic CSV format, in id order. With
    /// [`CsvLayout::Paths`] records lacking a file path are skipped.
    /// Returns the number of rows written.
    pub fn export_generic_csv<W: Write>(&self, writer: W, layout: CsvLayout) -> Result<usize, Error> {
        let mut w = csv::Writer::from_writer(writer);
        let mut n = 0;
        match layout {
            CsvLayout::Paths => w.write_record(PATH_HEADER)?,
            CsvLayout::Inline => w.write_record(INLINE_HEADER)?,
        }
        for r in self.read().records.values() {
            let p = &r.pair;
            let detector = p.detector.clone().unwrap_or_default();
            let lang = p.fragment1.language.as_str().to_ascii_lowercase();
            match layout {
                CsvLayout::Paths => {
                    let (Some(f1), Some(f2)) = (&p.fragment1.file_path, &p.fragment2.file_path) else {
                        continue;
                    };
                    w.write_record([
                        f1.clone(),
                        p.fragment1.start_line.to_string(),
                        p.fragment1.end_line.to_string(),
                        f2.clone(),
                        p.fragment2.start_line.to_string(),
                        p.fragment2.end_line.to_string(),
                        detector,
                        lang,
                    ])?;
                }
                CsvLayout::Inline => {
                    w.write_record([
                        p.fragment1.source_text.as_str(),
                        p.fragment2.source_text.as_str(),
                        &detector,
                        &lang,
                    ])?;
                }
            }
            n += 1;
        }
        w.flush()?;
        Ok(n)
    }

    /// Rewrites the store file with one line per record.
    pub fn compact(&self) -> Result<(), Error> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let mut inner = self.write();
        let tmp = path.with_extension("compact.tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            for r in inner.records.values() {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        inner.writer = None;
        fs::rename(&tmp, path)?;
        inner.writer = Some(BufWriter::new(OpenOptions::new().append(true).open(path)?));
        Ok(())
    }
}

fn new_record(pair: ClonePair, source: RecordSource) -> StoreRecord {
    let now = Utc::now();
    let history = match (&pair.label, &pair.labeler) {
        (Some(label), Some(labeler)) => {
            vec![LabelEvent { labeler: labeler.clone(), label: *label, at: pair.labeled_at.unwrap_or(now) }]
        }
        _ => Vec::new(),
    };
    let mut rec = StoreRecord { pair, source, created_at: now, history };
    rec.sync_pair_label();
    rec
}

fn cache_key(pair: &ClonePair, include_extras: bool) -> String {
    let mut h = Sha256::new();
    for f in [&pair.fragment1, &pair.fragment2] {
        let d = Sha256::digest(f.source_text.as_bytes());
        h.update(d);
    }
    h.update([include_extras as u8]);
    hex::encode(h.finalize())
}

/// Stable id of an imported pair derived from its dedup key.
pub fn pair_id_for(key: &[&str]) -> String {
    let mut h = Sha256::new();
    for part in key {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    format!("c-{}", &hex::encode(h.finalize())[..16])
}

enum RowError {
    Malformed(String),
    Fatal(Error),
}

struct SourceFiles {
    base: PathBuf,
    cache: HashMap<String, Vec<String>>,
}

impl SourceFiles {
    fn lines(&mut self, rel: &str) -> Result<&[String], Error> {
        if !self.cache.contains_key(rel) {
            let path = self.base.join(rel);
            let text = fs::read_to_string(&path).map_err(|_| Error::MissingSourceFile(path.display().to_string()))?;
            self.cache.insert(rel.to_string(), text.lines().map(str::to_string).collect());
        }
        Ok(&self.cache[rel])
    }

    fn fragment(&mut self, rel: &str, start: u32, end: u32) -> Result<CodeFragment, RowError> {
        let lines = self.lines(rel).map_err(RowError::Fatal)?;
        if start == 0 || end < start || end as usize > lines.len() {
            return Err(RowError::Malformed(format!("lines {start}-{end} out of range for {rel} ({} lines)", lines.len())));
        }
        let mut text = lines[start as usize - 1..end as usize].join("\n");
        text.push('\n');
        Ok(CodeFragment { source_text: text, file_path: Some(rel.to_string()), start_line: start, end_line: end, language: Language::Java })
    }
}

fn parse_row(
    rec: &csv::StringRecord,
    layout: CsvLayout,
    default_detector: Option<&str>,
    files: &mut SourceFiles,
) -> Result<ClonePair, RowError> {
    let width = match layout {
        CsvLayout::Paths => PATH_HEADER.len(),
        CsvLayout::Inline => INLINE_HEADER.len(),
    };
    if rec.len() != width {
        return Err(RowError::Malformed(format!("expected {width} fields, found {}", rec.len())));
    }
    let lang = &rec[width - 1];
    lang.parse::<Language>().map_err(|e| RowError::Malformed(e.to_string()))?;
    let detector = Some(rec[width - 2].trim())
        .filter(|d| !d.is_empty())
        .or(default_detector)
        .map(str::to_string);
    let mut pair = match layout {
        CsvLayout::Paths => {
            let num = |c: usize| {
                rec[c].trim().parse::<u32>().map_err(|e| RowError::Malformed(format!("{}: {e}", PATH_HEADER[c])))
            };
            let (s1, e1, s2, e2) = (num(1)?, num(2)?, num(4)?, num(5)?);
            let (f1, f2) = (rec[0].trim(), rec[3].trim());
            if f1.is_empty() || f2.is_empty() {
                return Err(RowError::Malformed("empty file path".into()));
            }
            let a = files.fragment(f1, s1, e1)?;
            let b = files.fragment(f2, s2, e2)?;
            let id = pair_id_for(&[f1, &rec[1], &rec[2], f2, &rec[4], &rec[5]]);
            ClonePair::new(id, a, b)
        }
        CsvLayout::Inline => {
            let (c1, c2) = (&rec[0], &rec[1]);
            if c1.trim().is_empty() || c2.trim().is_empty() {
                return Err(RowError::Malformed("empty fragment".into()));
            }
            ClonePair::new(pair_id_for(&[c1, c2]), CodeFragment::java(c1), CodeFragment::java(c2))
        }
    };
    pair.detector = detector;
    Ok(pair)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inline(id: &str, a: &str, b: &str) -> ClonePair {
        ClonePair::new(id, CodeFragment::java(a), CodeFragment::java(b))
    }

    #[test]
    fn label_history_contract() {
        let s = CloneStore::in_memory();
        assert!(s.insert(inline("p", "a();", "a();"), RecordSource::ApiFeedback).unwrap());
        assert!(!s.insert(inline("p", "b();", "b();"), RecordSource::ApiFeedback).unwrap());
        s.record_label("p", "ann", Label::TruePositive).unwrap();
        let r = s.record_label("p", "ann", Label::TruePositive).unwrap();
        assert_eq!(r.history.len(), 1);
        let r = s.record_label("p", "ann", Label::FalsePositive).unwrap();
        assert_eq!(r.history.len(), 2);
        assert_eq!(r.current_label(), Some(Label::FalsePositive));
        assert_eq!(r.pair.label, Some(Label::FalsePositive));
        assert!(matches!(s.record_label("nope", "ann", Label::TruePositive), Err(Error::UnknownPair(_))));
    }

    #[test]
    fn training_set_and_filters() {
        let s = CloneStore::in_memory();
        for (i, l) in [Label::TruePositive, Label::TruePositive, Label::TruePositive, Label::FalsePositive]
            .into_iter()
            .enumerate()
        {
            let id = format!("p{i}");
            s.insert(inline(&id, "int a = 1;\nb();", "int c = 2;\nb();"), RecordSource::DetectorImport).unwrap();
            s.record_label(&id, "ann", l).unwrap();
        }
        s.insert(inline("u", "x();", "y();"), RecordSource::DetectorImport).unwrap();
        let ts = s.assemble_training_set(&TrainingFilter::default(), false);
        assert_eq!(ts.len(), 4);
        assert_eq!(ts.class_counts(), [3, 1]);
        let only_bob = TrainingFilter { labelers: Some(vec!["bob".into()]), ..Default::default() };
        assert!(s.assemble_training_set(&only_bob, false).is_empty());
        let c = s.counts();
        assert_eq!((c.true_positive, c.false_positive, c.unlabeled), (3, 1, 1));
    }

    #[test]
    fn per_labeler_view() {
        let s = CloneStore::in_memory();
        s.insert(inline("p", "a();", "a();"), RecordSource::ApiFeedback).unwrap();
        s.record_label("p", "ann", Label::TruePositive).unwrap();
        s.record_label("p", "bob", Label::FalsePositive).unwrap();
        let ann = TrainingFilter { labelers: Some(vec!["ann".into()]), ..Default::default() };
        assert_eq!(s.labeled_pairs(&ann)[0].label, Some(Label::TruePositive));
        assert_eq!(s.labeled_pairs(&TrainingFilter::default())[0].label, Some(Label::FalsePositive));
    }

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.store");
        {
            let s = CloneStore::open(&path).unwrap();
            s.insert(inline("p", "a();", "a();"), RecordSource::ApiFeedback).unwrap();
            s.record_label("p", "ann", Label::TruePositive).unwrap();
        }
        // torn append
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"pair\":{\"id\"").unwrap();
        drop(f);
        let s = CloneStore::open(&path).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.get("p").unwrap().history.len(), 1);
        s.record_label("p", "ann", Label::FalsePositive).unwrap();
        drop(s);
        let s = CloneStore::open(&path).unwrap();
        assert_eq!(s.get("p").unwrap().history.len(), 2);
        s.compact().unwrap();
        let s2 = CloneStore::open(&path).unwrap();
        assert_eq!(s2.get("p").unwrap().current_label(), Some(Label::FalsePositive));
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 1);
    }

    #[test]
    fn malformed_store_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.store");
        fs::write(&path, "garbage\n").unwrap();
        assert!(matches!(CloneStore::open(&path), Err(Error::MalformedStore { line: 1, .. })));
    }

    #[test]
    fn csv_import_dedup_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("src")).unwrap();
        fs::write(dir.path().join("src/A.java"), "class A {\n  void f() {\n    g();\n  }\n}\n").unwrap();
        let csv = "file1,start1,end1,file2,start2,end2,detector,lang\n\
                   src/A.java,2,4,src/A.java,2,4,nicad,java\n\
                   src/A.java,2,4,src/A.java,2,4,nicad,java\n\
                   src/A.java,2,40,src/A.java,2,4,nicad,java\n\
                   src/A.java,x,4,src/A.java,2,4,nicad,java\n\
                   src/A.java,2,4,src/A.java,1,5,nicad,cobol\n";
        fs::write(dir.path().join("r.csv"), csv).unwrap();
        let s = CloneStore::in_memory();
        let spec = ImportSpec { format: ImportFormat::GenericCsv, path: dir.path().join("r.csv"), detector: None };
        let rep = s.import_pairs(&spec).unwrap();
        assert_eq!((rep.imported, rep.duplicates, rep.malformed.len()), (1, 1, 3));
        let rec = &s.snapshot()[0];
        assert_eq!(rec.pair.fragment1.source_text, "  void f() {\n    g();\n  }\n");
        assert_eq!(rec.pair.detector.as_deref(), Some("nicad"));
        assert_eq!(rec.source, RecordSource::DetectorImport);

        fs::write(dir.path().join("m.csv"), "file1,start1,end1,file2,start2,end2,detector,lang\nsrc/B.java,1,1,src/A.java,1,1,x,java\n")
            .unwrap();
        let spec = ImportSpec { path: dir.path().join("m.csv"), ..spec };
        assert!(matches!(s.import_pairs(&spec), Err(Error::MissingSourceFile(_))));
    }

    #[test]
    fn empty_csv_and_inline_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        fs::write(&p, "code1,code2,detector,lang\n").unwrap();
        let s = CloneStore::in_memory();
        let spec = ImportSpec { format: ImportFormat::GenericCsv, path: p.clone(), detector: None };
        assert_eq!(s.import_pairs(&spec).unwrap().imported, 0);
        fs::write(&p, "code1,code2,detector,lang\n\"a();\nb();\n\",c();,ccfinder,java\n").unwrap();
        assert_eq!(s.import_pairs(&spec).unwrap().imported, 1);
        let mut out = Vec::new();
        s.export_generic_csv(&mut out, CsvLayout::Inline).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), fs::read_to_string(&p).unwrap());
    }

    #[test]
    fn queue_pages() {
        let s = CloneStore::in_memory();
        for i in 0..50 {
            s.insert(inline(&format!("p{i:02}"), "a();", "b();"), RecordSource::DetectorImport).unwrap();
        }
        let sizes: Vec<usize> = (0..4).map(|p| s.unlabeled_page(p, 20).0.len()).collect();
        assert_eq!(sizes, vec![20, 20, 10, 0]);
        s.record_label("p00", "ann", Label::TruePositive).unwrap();
        let (page, total) = s.unlabeled_page(0, 20);
        assert_eq!(total, 49);
        assert_eq!(page[0].pair.id, "p01");
    }

    #[test]
    fn feature_cache_is_exact() {
        let s = CloneStore::in_memory();
        let p = inline("p", "int a = 1;\nf(a);", "int b = 2;\nf(b);\ng();");
        let first = s.features(&p, true).unwrap();
        let second = s.features(&p, true).unwrap();
        let fresh = extract_features(&p, true).unwrap();
        assert_eq!(first.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), fresh.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(first, second);
    }
}
