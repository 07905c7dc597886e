//! Minimal insert/delete edit scripts and the fragment similarity measure.
//!
//! The edit script is LCS-optimal, like the classic Unix `diff`: it contains
//! only deletions from the first sequence and insertions from the second.
//! Similarity of two fragments `f1`, `f2` is
//! `1 - max(deletions / |f1|, insertions / |f2|)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::normalize::{NormToken, NormalizationLevel, NormalizedFragment};
use crate::Error;

/// One step of an edit script. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EditOp<T> {
    Keep { a: usize, b: usize },
    Delete { a: usize },
    Insert { b: usize, item: T },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditScript<T> {
    pub ops: Vec<EditOp<T>>,
    len_a: usize,
    len_b: usize,
}

/// A group of adjacent changes in classic diff notation (`4c4,5`, `6d6`, `7a8`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hunk {
    /// 0-based half-open range of deleted lines in `a`.
    pub a_start: usize,
    pub a_end: usize,
    /// 0-based half-open range of inserted lines in `b`.
    pub b_start: usize,
    pub b_end: usize,
}

impl Hunk {
    pub fn deletions(&self) -> usize {
        self.a_end - self.a_start
    }

    pub fn insertions(&self) -> usize {
        self.b_end - self.b_start
    }
}

fn range(f: &mut fmt::Formatter<'_>, start: usize, end: usize) -> fmt::Result {
    // 1-based inclusive; an empty range names the line it follows
    if end <= start {
        write!(f, "{start}")
    } else if end - start == 1 {
        write!(f, "{}", start + 1)
    } else {
        write!(f, "{},{}", start + 1, end)
    }
}

impl fmt::Display for Hunk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (del, ins) = (self.deletions() > 0, self.insertions() > 0);
        range(f, self.a_start, self.a_end)?;
        f.write_str(match (del, ins) {
            (true, true) => "c",
            (true, false) => "d",
            _ => "a",
        })?;
        range(f, self.b_start, self.b_end)
    }
}

impl<T: Clone> EditScript<T> {
    pub fn deletions(&self) -> usize {
        self.ops.iter().filter(|op| matches!(op, EditOp::Delete { .. })).count()
    }

    pub fn insertions(&self) -> usize {
        self.ops.iter().filter(|op| matches!(op, EditOp::Insert { .. })).count()
    }

    pub fn deleted_positions(&self) -> Vec<usize> {
        self.ops
            .iter()
            .filter_map(|op| match op {
                EditOp::Delete { a } => Some(*a),
                _ => None,
            })
            .collect()
    }

    pub fn inserted_positions(&self) -> Vec<usize> {
        self.ops
            .iter()
            .filter_map(|op| match op {
                EditOp::Insert { b, .. } => Some(*b),
                _ => None,
            })
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.deletions() == 0 && self.insertions() == 0
    }

    /// Rebuilds the second sequence from the first.
    pub fn apply(&self, a: &[T]) -> Vec<T> {
        assert_eq!(a.len(), self.len_a, "edit script applied to a sequence of the wrong length");
        let mut out = Vec::with_capacity(self.len_b);
        for op in &self.ops {
            match op {
                EditOp::Keep { a: i, .. } => out.push(a[*i].clone()),
                EditOp::Delete { .. } => {}
                EditOp::Insert { item, .. } => out.push(item.clone()),
            }
        }
        out
    }

    /// Groups consecutive changes into hunks.
    pub fn hunks(&self) -> Vec<Hunk> {
        let mut hunks = Vec::new();
        let (mut ia, mut ib) = (0usize, 0usize);
        let mut open: Option<Hunk> = None;
        for op in &self.ops {
            match op {
                EditOp::Keep { .. } => {
                    if let Some(h) = open.take() {
                        hunks.push(h);
                    }
                    ia += 1;
                    ib += 1;
                }
                EditOp::Delete { .. } => {
                    let h = open.get_or_insert(Hunk { a_start: ia, a_end: ia, b_start: ib, b_end: ib });
                    h.a_end += 1;
                    ia += 1;
                }
                EditOp::Insert { .. } => {
                    let h = open.get_or_insert(Hunk { a_start: ia, a_end: ia, b_start: ib, b_end: ib });
                    h.b_end += 1;
                    ib += 1;
                }
            }
        }
        hunks.extend(open);
        hunks
    }

    /// Renders the script in the normal (non-context) diff format.
    pub fn to_normal_diff(&self, a: &[T], b: &[T]) -> String
    where
        T: fmt::Display,
    {
        let mut out = String::new();
        for h in self.hunks() {
            out.push_str(&format!("{h}\n"));
            for line in &a[h.a_start..h.a_end] {
                out.push_str(&format!("< {line}\n"));
            }
            if h.deletions() > 0 && h.insertions() > 0 {
                out.push_str("---\n");
            }
            for line in &b[h.b_start..h.b_end] {
                out.push_str(&format!("> {line}\n"));
            }
        }
        out
    }
}

/// Minimal edit script turning `a` into `b`.
///
/// When several minimal scripts exist, deletions are taken before insertions
/// at every choice point, so the script is deterministic.
pub fn edit_script<T: Eq + Clone>(a: &[T], b: &[T]) -> EditScript<T> {
    let (n, m) = (a.len(), b.len());
    let width = m + 1;
    // suffix LCS lengths: lcs[i * width + j] = LCS(a[i..], b[j..])
    let mut lcs = vec![0u32; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i * width + j] = if a[i] == b[j] {
                lcs[(i + 1) * width + j + 1] + 1
            } else {
                lcs[(i + 1) * width + j].max(lcs[i * width + j + 1])
            };
        }
    }
    let mut ops = Vec::with_capacity(n + m);
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        if i < n && j < m && a[i] == b[j] {
            ops.push(EditOp::Keep { a: i, b: j });
            i += 1;
            j += 1;
        } else if i < n && (j == m || lcs[(i + 1) * width + j] >= lcs[i * width + j + 1]) {
            ops.push(EditOp::Delete { a: i });
            i += 1;
        } else {
            ops.push(EditOp::Insert { b: j, item: b[j].clone() });
            j += 1;
        }
    }
    EditScript { ops, len_a: n, len_b: m }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Granularity {
    Line,
    Token,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub value: f64,
    pub granularity: Granularity,
    pub level: NormalizationLevel,
    pub deletions: usize,
    pub insertions: usize,
    pub len1: usize,
    pub len2: usize,
}

/// `1 - max(d / len1, i / len2)` for an edit script with `d` deletions and `i` insertions.
pub fn similarity_from_counts(deletions: usize, insertions: usize, len1: usize, len2: usize) -> Result<f64, Error> {
    if len1 == 0 || len2 == 0 {
        return Err(Error::EmptyFragment);
    }
    let d = deletions as f64 / len1 as f64;
    let i = insertions as f64 / len2 as f64;
    Ok(1.0 - d.max(i))
}

/// Similarity of two plain sequences.
pub fn sequence_similarity<T: Eq + Clone>(a: &[T], b: &[T]) -> Result<f64, Error> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyFragment);
    }
    let script = edit_script(a, b);
    similarity_from_counts(script.deletions(), script.insertions(), a.len(), b.len())
}

pub fn fragment_similarity(
    f1: &NormalizedFragment,
    f2: &NormalizedFragment,
    granularity: Granularity,
) -> Result<SimilarityScore, Error> {
    let level = f1.level.max(f2.level);
    let (deletions, insertions, len1, len2) = match granularity {
        Granularity::Line => counts(&f1.lines, &f2.lines)?,
        Granularity::Token => counts::<NormToken>(&f1.tokens, &f2.tokens)?,
    };
    Ok(SimilarityScore {
        value: similarity_from_counts(deletions, insertions, len1, len2)?,
        granularity,
        level,
        deletions,
        insertions,
        len1,
        len2,
    })
}

fn counts<T: Eq + Clone>(a: &[T], b: &[T]) -> Result<(usize, usize, usize, usize), Error> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyFragment);
    }
    let script = edit_script(a, b);
    Ok((script.deletions(), script.insertions(), a.len(), b.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn identical() {
        let e = edit_script(&s(&["x"]), &s(&["x"]));
        assert_eq!((e.deletions(), e.insertions()), (0, 0));
    }

    #[test]
    fn one_common() {
        let e = edit_script(&s(&["a", "b"]), &s(&["b", "c"]));
        assert_eq!((e.deletions(), e.insertions()), (1, 1));
        assert_eq!(e.deleted_positions(), vec![0]);
        assert_eq!(e.inserted_positions(), vec![1]);
    }

    #[test]
    fn empty_sequences() {
        let e = edit_script::<u8>(&[], &[]);
        assert!(e.is_identity());
        assert!(e.hunks().is_empty());
        let e = edit_script(&[], &[1, 2]);
        assert_eq!(e.insertions(), 2);
        assert_eq!(e.hunks()[0].to_string(), "0a1,2");
        let e = edit_script(&[1, 2, 3], &[]);
        assert_eq!(e.hunks()[0].to_string(), "1,3d0");
    }

    #[test]
    fn ties_delete_first() {
        let e = edit_script(&["a"], &["b"]);
        assert!(matches!(e.ops[0], EditOp::Delete { a: 0 }));
        assert_eq!(e.hunks()[0].to_string(), "1c1");
    }

    #[test]
    fn similarity_edges() {
        assert_eq!(sequence_similarity(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(sequence_similarity(&[1, 2], &[3, 4, 5]).unwrap(), 0.0);
        assert!(matches!(sequence_similarity::<u8>(&[], &[1]), Err(Error::EmptyFragment)));
    }

    fn brute_lcs(a: &[u8], b: &[u8]) -> usize {
        // plain prefix DP, independent of the suffix table above
        let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                t[i][j] = if a[i - 1] == b[j - 1] {
                    t[i - 1][j - 1] + 1
                } else {
                    t[i - 1][j].max(t[i][j - 1])
                };
            }
        }
        t[a.len()][b.len()]
    }

    proptest! {
        #[test]
        fn minimal_and_reconstructs(a in prop::collection::vec(0u8..3, 0..=12), b in prop::collection::vec(0u8..3, 0..=12)) {
            let e = edit_script(&a, &b);
            prop_assert_eq!(e.deletions() + e.insertions(), a.len() + b.len() - 2 * brute_lcs(&a, &b));
            prop_assert_eq!(e.apply(&a), b);
            let hunk_total: usize = e.hunks().iter().map(|h| h.deletions() + h.insertions()).sum();
            prop_assert_eq!(hunk_total, e.deletions() + e.insertions());
        }

        #[test]
        fn self_similarity_is_one(a in prop::collection::vec(0u8..5, 1..30)) {
            prop_assert_eq!(sequence_similarity(&a, &a).unwrap(), 1.0);
        }

        #[test]
        fn appending_a_foreign_line_never_helps(a in prop::collection::vec(0u8..4, 1..15), b in prop::collection::vec(0u8..4, 1..15)) {
            let before = sequence_similarity(&a, &b).unwrap();
            let mut b2 = b.clone();
            b2.push(99);
            let after = sequence_similarity(&a, &b2).unwrap();
            prop_assert!(after <= before);
        }

        #[test]
        fn similarity_in_unit_interval(a in prop::collection::vec(0u8..3, 1..12), b in prop::collection::vec(0u8..3, 1..12)) {
            let v = sequence_similarity(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v == 1.0, a == b);
        }
    }
}
