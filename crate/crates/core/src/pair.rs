//! Clone fragments, clone pairs and validation labels.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::Error;

/// Source language of a fragment. Only Java is lexed today.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Language {
    Java,
}

impl Language {
    pub fn as_str(&self) -> &'static str {
        match self {
            Language::Java => "Java",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "java" => Ok(Language::Java),
            _ => Err(Error::UnsupportedLanguage(s.to_string())),
        }
    }
}

/// A contiguous region of source code reported as one side of a clone.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodeFragment {
    pub source_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_path: Option<String>,
    pub start_line: u32,
    pub end_line: u32,
    pub language: Language,
}

impl CodeFragment {
    /// A Java fragment with no file provenance; lines are derived from the text.
    pub fn java(source_text: impl Into<String>) -> Self {
        let source_text = source_text.into();
        let end_line = raw_line_count(&source_text).max(1) as u32;
        CodeFragment {
            source_text,
            file_path: None,
            start_line: 1,
            end_line,
            language: Language::Java,
        }
    }

    pub fn with_origin(mut self, path: impl Into<String>, start_line: u32) -> Self {
        let len = self.end_line.saturating_sub(self.start_line);
        self.file_path = Some(path.into());
        self.start_line = start_line;
        self.end_line = start_line + len;
        self
    }

    /// Raw (pre-normalization) line count of the fragment text.
    pub fn raw_lines(&self) -> usize {
        raw_line_count(&self.source_text)
    }
}

/// Number of lines in `text`; a trailing newline does not open a new line.
pub fn raw_line_count(text: &str) -> usize {
    if text.is_empty() {
        return 0;
    }
    let newlines = text.bytes().filter(|&b| b == b'\n').count();
    if text.ends_with('\n') {
        newlines
    } else {
        newlines + 1
    }
}

/// Binary validation verdict of a clone pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    TruePositive,
    FalsePositive,
}

impl Label {
    /// Short form used in CSV files.
    pub fn short(&self) -> &'static str {
        match self {
            Label::TruePositive => "TP",
            Label::FalsePositive => "FP",
        }
    }

    /// One-hot target: (1,0) for true positives, (0,1) for false positives.
    pub fn one_hot(&self) -> [f64; 2] {
        match self {
            Label::TruePositive => [1.0, 0.0],
            Label::FalsePositive => [0.0, 1.0],
        }
    }

    pub fn class_index(&self) -> usize {
        match self {
            Label::TruePositive => 0,
            Label::FalsePositive => 1,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::TruePositive => f.write_str("TruePositive"),
            Label::FalsePositive => f.write_str("FalsePositive"),
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "TP" | "tp" | "TruePositive" | "true_positive" | "true" | "t" => Ok(Label::TruePositive),
            "FP" | "fp" | "FalsePositive" | "false_positive" | "false" | "f" => {
                Ok(Label::FalsePositive)
            }
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }
}

/// Formats an optional label the way feature and manifest CSVs expect.
pub fn label_column(label: Option<Label>) -> &'static str {
    match label {
        Some(l) => l.short(),
        None => "UNLABELED",
    }
}

/// Parses the label column of a CSV row; `UNLABELED` maps to `None`.
pub fn parse_label_column(s: &str) -> Result<Option<Label>, Error> {
    match s.trim() {
        "UNLABELED" | "" => Ok(None),
        other => other.parse().map(Some),
    }
}

/// Two fragments under judgment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClonePair {
    pub id: String,
    pub fragment1: CodeFragment,
    pub fragment2: CodeFragment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labeler: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labeled_at: Option<DateTime<Utc>>,
}

impl ClonePair {
    pub fn new(id: impl Into<String>, fragment1: CodeFragment, fragment2: CodeFragment) -> Self {
        ClonePair {
            id: id.into(),
            fragment1,
            fragment2,
            detector: None,
            label: None,
            labeler: None,
            labeled_at: None,
        }
    }

    pub fn with_detector(mut self, detector: impl Into<String>) -> Self {
        self.detector = Some(detector.into());
        self
    }

    pub fn labeled(mut self, label: Label, labeler: impl Into<String>) -> Self {
        self.label = Some(label);
        self.labeler = Some(labeler.into());
        self
    }

    /// Checks the pair-level invariants (shared language, label iff labeler).
    pub fn validate(&self) -> Result<(), Error> {
        if self.fragment1.language != self.fragment2.language {
            return Err(Error::LanguageMismatch);
        }
        if self.label.is_some() != self.labeler.is_some() {
            return Err(Error::LabelWithoutLabeler(self.id.clone()));
        }
        Ok(())
    }
}
