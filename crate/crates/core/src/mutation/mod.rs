//! Mutation operators that turn a fragment into an artificial clone of a
//! known type, and the benchmark generator built on them.
//!
//! Each operator applies one edit at a seeded-random site:
//!
//! | operator                  | clone type |
//! |---------------------------|------------|
//! | `WS_ADD_REMOVE`           | Type1      |
//! | `COMMENT_CHANGE`          | Type1      |
//! | `NEWLINE_ADD_REMOVE`      | Type1      |
//! | `RENAME_SYSTEMATIC`       | Type2      |
//! | `RENAME_ARBITRARY`        | Type2      |
//! | `LITERAL_VALUE_CHANGE`    | Type2      |
//! | `INTRALINE_INSERT_DELETE` | Type3      |
//! | `LINE_INSERT_DELETE`      | Type3      |
//! | `LINE_MODIFY`             | Type3      |
//!
//! Newline edits are restricted to boundaries where the normalized layout
//! breaks (or joins) regardless of the source, so Type1 output is unchanged.

pub mod bench;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use bench::{
    generate_benchmark, read_benchmark_dir, write_benchmark_dir, BenchmarkEntry, BenchmarkManifest, NEGATIVE_MAX_DRAWS,
    NEGATIVE_MAX_LINE_SIM,
};

use crate::normalize::{is_keyword, layout_neutral_boundaries, tokenize_java, Token, TokenKind};
use crate::pair::CodeFragment;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CloneType {
    Type1,
    Type2,
    Type3,
}

impl fmt::Display for CloneType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CloneType::Type1 => "Type1",
            CloneType::Type2 => "Type2",
            CloneType::Type3 => "Type3",
        })
    }
}

impl FromStr for CloneType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "Type1" => Ok(CloneType::Type1),
            "Type2" => Ok(CloneType::Type2),
            "Type3" => Ok(CloneType::Type3),
            _ => Err(Error::InvalidConfig(format!("unknown clone type {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MutationOperator {
    WsAddRemove,
    CommentChange,
    NewlineAddRemove,
    RenameSystematic,
    RenameArbitrary,
    LiteralValueChange,
    IntralineInsertDelete,
    LineInsertDelete,
    LineModify,
}

impl MutationOperator {
    pub const ALL: [MutationOperator; 9] = [
        MutationOperator::WsAddRemove,
        MutationOperator::CommentChange,
        MutationOperator::NewlineAddRemove,
        MutationOperator::RenameSystematic,
        MutationOperator::RenameArbitrary,
        MutationOperator::LiteralValueChange,
        MutationOperator::IntralineInsertDelete,
        MutationOperator::LineInsertDelete,
        MutationOperator::LineModify,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            MutationOperator::WsAddRemove => "WS_ADD_REMOVE",
            MutationOperator::CommentChange => "COMMENT_CHANGE",
            MutationOperator::NewlineAddRemove => "NEWLINE_ADD_REMOVE",
            MutationOperator::RenameSystematic => "RENAME_SYSTEMATIC",
            MutationOperator::RenameArbitrary => "RENAME_ARBITRARY",
            MutationOperator::LiteralValueChange => "LITERAL_VALUE_CHANGE",
            MutationOperator::IntralineInsertDelete => "INTRALINE_INSERT_DELETE",
            MutationOperator::LineInsertDelete => "LINE_INSERT_DELETE",
            MutationOperator::LineModify => "LINE_MODIFY",
        }
    }

    pub fn clone_type(&self) -> CloneType {
        match self {
            MutationOperator::WsAddRemove | MutationOperator::CommentChange | MutationOperator::NewlineAddRemove => {
                CloneType::Type1
            }
            MutationOperator::RenameSystematic
            | MutationOperator::RenameArbitrary
            | MutationOperator::LiteralValueChange => CloneType::Type2,
            _ => CloneType::Type3,
        }
    }
}

impl fmt::Display for MutationOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for MutationOperator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        MutationOperator::ALL
            .into_iter()
            .find(|op| op.id() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown mutation operator {s:?}")))
    }
}

/// Applies `op` once at a site chosen by `seed`. The result always differs
/// from the input and lexes without new errors.
pub fn mutate_fragment(fragment: &CodeFragment, op: MutationOperator, seed: u64) -> Result<CodeFragment, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let src = Source::new(&fragment.source_text);
    let text = match op {
        MutationOperator::WsAddRemove => ws_add_remove(&src, &mut rng),
        MutationOperator::CommentChange => comment_change(&src, &mut rng),
        MutationOperator::NewlineAddRemove => newline_add_remove(&src, &mut rng),
        MutationOperator::RenameSystematic => rename(&src, &mut rng, true),
        MutationOperator::RenameArbitrary => rename(&src, &mut rng, false),
        MutationOperator::LiteralValueChange => literal_change(&src, &mut rng),
        MutationOperator::IntralineInsertDelete => intraline(&src, &mut rng),
        MutationOperator::LineInsertDelete => line_insert_delete(&src, &mut rng),
        MutationOperator::LineModify => line_modify(&src, &mut rng),
    }
    .ok_or_else(|| Error::NoMutableSite(op.id().to_string()))?;
    let mut out = fragment.clone();
    out.end_line = out.start_line + crate::pair::raw_line_count(&text).saturating_sub(1) as u32;
    out.source_text = text;
    Ok(out)
}

/// Token stream with byte offsets.
struct Source<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    offsets: Vec<usize>,
    errors: usize,
    /// Indices of code tokens in `tokens`.
    code: Vec<usize>,
}

impl<'a> Source<'a> {
    fn new(text: &'a str) -> Self {
        let lexed = tokenize_java(text);
        let mut offsets = Vec::with_capacity(lexed.tokens.len());
        let mut at = 0;
        for t in &lexed.tokens {
            offsets.push(at);
            at += t.text.len();
        }
        let code = (0..lexed.tokens.len()).filter(|&i| lexed.tokens[i].kind.is_code()).collect();
        Source { text, tokens: lexed.tokens, offsets, errors: lexed.errors.len(), code }
    }

    fn end(&self, i: usize) -> usize {
        self.offsets[i] + self.tokens[i].text.len()
    }

    fn splice(&self, start: usize, end: usize, with: &str) -> String {
        let mut s = String::with_capacity(self.text.len() + with.len());
        s.push_str(&self.text[..start]);
        s.push_str(with);
        s.push_str(&self.text[end..]);
        s
    }

    fn code_signature(&self) -> Vec<(TokenKind, &str)> {
        self.code.iter().map(|&i| (self.tokens[i].kind, self.tokens[i].text.as_str())).collect()
    }

    fn identifiers(&self) -> BTreeSet<&str> {
        self.code
            .iter()
            .map(|&i| &self.tokens[i])
            .filter(|t| t.kind == TokenKind::Identifier)
            .map(|t| t.text.as_str())
            .collect()
    }

    fn code_tok(&self, c: usize) -> &Token {
        &self.tokens[self.code[c]]
    }
}

/// Accepts a candidate text when it differs from the original, lexes with no
/// more errors than the original and, if `same_code`, keeps the code tokens.
fn accept(src: &Source, candidate: String, same_code: bool) -> Option<String> {
    if candidate == src.text {
        return None;
    }
    let after = Source::new(&candidate);
    if after.errors > src.errors {
        return None;
    }
    if same_code && after.code_signature() != src.code_signature() {
        return None;
    }
    Some(candidate)
}

/// Tries shuffled candidates in order until one is accepted.
fn first_accepted<T>(
    mut sites: Vec<T>,
    rng: &mut ChaCha8Rng,
    mut attempt: impl FnMut(T, &mut ChaCha8Rng) -> Option<String>,
) -> Option<String> {
    sites.shuffle(rng);
    for s in sites {
        if let Some(out) = attempt(s, rng) {
            return Some(out);
        }
    }
    None
}

enum WsSite {
    /// Insert a space before token `i`.
    Insert(usize),
    /// Grow the whitespace token `i`.
    Grow(usize),
    /// Shrink or delete the whitespace token `i`.
    Shrink(usize),
}

fn ws_add_remove(src: &Source, rng: &mut ChaCha8Rng) -> Option<String> {
    let toks = &src.tokens;
    // whitespace after the last newline with nothing else on that line would
    // count as an extra (blank) trailing line; leave it alone
    let trailing_ws_only = toks
        .iter()
        .rposition(|t| t.kind == TokenKind::Newline)
        .map_or(false, |nl| nl + 1 < toks.len() && toks[nl + 1..].iter().all(|t| t.kind == TokenKind::Whitespace));
    let mut sites = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        match t.kind {
            TokenKind::Whitespace => {
                let in_trailing = trailing_ws_only && toks[i..].iter().all(|t| t.kind == TokenKind::Whitespace);
                if !in_trailing {
                    sites.push(WsSite::Grow(i));
                    sites.push(WsSite::Shrink(i));
                }
            }
            k if k.is_code() && i > 0 && toks[i - 1].kind != TokenKind::Whitespace => sites.push(WsSite::Insert(i)),
            _ => {}
        }
    }
    first_accepted(sites, rng, |site, rng| {
        let cand = match site {
            WsSite::Insert(i) => src.splice(src.offsets[i], src.offsets[i], if rng.gen_bool(0.5) { " " } else { "  " }),
            WsSite::Grow(i) => src.splice(src.end(i), src.end(i), if rng.gen_bool(0.7) { " " } else { "\t" }),
            WsSite::Shrink(i) => {
                let t = &toks[i].text;
                let keep = if t.len() > 1 { rng.gen_range(1..t.len()) } else { 0 };
                src.splice(src.offsets[i] + keep, src.end(i), "")
            }
        };
        accept(src, cand, true)
    })
}

const COMMENT_WORDS: &[&str] = &[
    "check", "bounds", "cache", "the", "result", "before", "returning", "value", "fix", "later", "see", "issue",
    "assumes", "sorted", "input", "edge", "case", "keep", "order",
];

fn comment_text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..5);
    (0..n).map(|_| *COMMENT_WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

enum CommentSite {
    Edit(usize),
    Remove(usize),
    /// Append a line comment before newline token `i` (the line has code).
    Append(usize),
    /// Insert a comment-only line after newline token `i`.
    InsertLine(usize),
}

fn comment_change(src: &Source, rng: &mut ChaCha8Rng) -> Option<String> {
    let toks = &src.tokens;
    let mut sites = Vec::new();
    let mut line_has_code = false;
    for (i, t) in toks.iter().enumerate() {
        match t.kind {
            TokenKind::Comment => {
                sites.push(CommentSite::Edit(i));
                if !t.text.contains('\n') {
                    sites.push(CommentSite::Remove(i));
                }
            }
            TokenKind::Newline => {
                if line_has_code {
                    sites.push(CommentSite::Append(i));
                }
                sites.push(CommentSite::InsertLine(i));
                line_has_code = false;
            }
            k if k.is_code() => line_has_code = true,
            _ => {}
        }
    }
    if line_has_code && toks.last().is_some_and(|t| t.kind != TokenKind::Comment) {
        sites.push(CommentSite::Append(toks.len()));
    }
    first_accepted(sites, rng, |site, rng| {
        let words = comment_text(rng);
        let cand = match site {
            CommentSite::Edit(i) => {
                let t = &toks[i].text;
                let new = if let Some(rest) = t.strip_prefix("/*") {
                    format!("/* {words}{rest}")
                } else {
                    format!("// {words}")
                };
                if &new == t {
                    return None;
                }
                src.splice(src.offsets[i], src.end(i), &new)
            }
            CommentSite::Remove(i) => {
                let line_start = toks[..i].iter().rposition(|t| t.kind == TokenKind::Newline).map_or(0, |n| n + 1);
                let line_end = toks[i..].iter().position(|t| t.kind == TokenKind::Newline).map(|p| i + p);
                let alone = toks[line_start..line_end.unwrap_or(toks.len())]
                    .iter()
                    .enumerate()
                    .all(|(k, t)| k + line_start == i || t.kind == TokenKind::Whitespace);
                if alone {
                    match line_end {
                        Some(nl) => src.splice(src.offsets[line_start], src.end(nl), ""),
                        None if line_start > 0 => src.splice(src.offsets[line_start - 1], src.text.len(), ""),
                        None => src.splice(0, src.text.len(), ""),
                    }
                } else if toks[i].text.starts_with("//") {
                    src.splice(src.offsets[i], src.end(i), "")
                } else {
                    src.splice(src.offsets[i], src.end(i), " ")
                }
            }
            CommentSite::Append(i) => {
                let at = if i == toks.len() { src.text.len() } else { src.offsets[i] };
                src.splice(at, at, &format!(" // {words}"))
            }
            CommentSite::InsertLine(i) => {
                let indent: String = toks
                    .get(i + 1)
                    .filter(|t| t.kind == TokenKind::Whitespace)
                    .map_or(String::new(), |t| t.text.clone());
                let at = src.end(i);
                let nl = toks[i].text.clone();
                src.splice(at, at, &format!("{indent}// {words}{nl}"))
            }
        };
        accept(src, cand, true)
    })
}

fn newline_add_remove(src: &Source, rng: &mut ChaCha8Rng) -> Option<String> {
    let code: Vec<&Token> = src.code.iter().map(|&i| &src.tokens[i]).collect();
    if code.len() < 2 {
        return None;
    }
    let neutral = layout_neutral_boundaries(&code);
    let mut sites = Vec::new();
    for (b, &ok) in neutral.iter().enumerate() {
        if !ok {
            continue;
        }
        let (lo, hi) = (src.code[b], src.code[b + 1]);
        let gap = &src.tokens[lo + 1..hi];
        if gap.iter().any(|t| t.kind == TokenKind::Comment) {
            continue;
        }
        let newlines = gap.iter().filter(|t| t.kind == TokenKind::Newline).count();
        if newlines <= 1 {
            sites.push((lo, hi, newlines));
        }
    }
    first_accepted(sites, rng, |(lo, hi, newlines), rng| {
        let (start, end) = (src.end(lo), src.offsets[hi]);
        let with = if newlines == 0 {
            let indent = " ".repeat(4 * rng.gen_range(0..3));
            format!("\n{indent}")
        } else {
            " ".to_string()
        };
        accept(src, src.splice(start, end, &with), true)
    })
}

const FRESH_NAMES: &[&str] = &[
    "alpha", "beta", "gamma", "epsilon", "zeta", "theta", "kappa", "omega", "sigma", "lambda", "cursor", "holder",
    "probe", "slot", "marker", "pivot", "anchor", "tally",
];

fn fresh_name(taken: &BTreeSet<&str>, rng: &mut ChaCha8Rng) -> String {
    loop {
        let base = FRESH_NAMES.choose(rng).unwrap();
        let name = if rng.gen_bool(0.5) { base.to_string() } else { format!("{base}{}", rng.gen_range(0..100)) };
        if !taken.contains(name.as_str()) && !is_keyword(&name) {
            return name;
        }
    }
}

fn rename(src: &Source, rng: &mut ChaCha8Rng, systematic: bool) -> Option<String> {
    let taken = src.identifiers();
    if systematic {
        let names: Vec<&str> = taken.iter().copied().collect();
        first_accepted(names, rng, |name, rng| {
            let new = fresh_name(&taken, rng);
            let mut out = String::with_capacity(src.text.len());
            for t in &src.tokens {
                if t.kind == TokenKind::Identifier && t.text == name {
                    out.push_str(&new);
                } else {
                    out.push_str(&t.text);
                }
            }
            accept(src, out, false)
        })
    } else {
        let sites: Vec<usize> = src.code.iter().copied().filter(|&i| src.tokens[i].kind == TokenKind::Identifier).collect();
        first_accepted(sites, rng, |i, rng| {
            let new = fresh_name(&taken, rng);
            accept(src, src.splice(src.offsets[i], src.end(i), &new), false)
        })
    }
}

const STRING_VALUES: &[&str] = &["changed", "other value", "n/a", "retry later", "empty", "xyz", "42 items", "ok"];

fn literal_change(src: &Source, rng: &mut ChaCha8Rng) -> Option<String> {
    let sites: Vec<usize> = src.code.iter().copied().filter(|&i| src.tokens[i].kind.is_literal()).collect();
    first_accepted(sites, rng, |i, rng| {
        let t = &src.tokens[i];
        let new = match t.kind {
            TokenKind::NumberLiteral => {
                let float = t.text.contains('.') && !t.text.starts_with("0x") && !t.text.starts_with("0X");
                if float {
                    format!("{}.{}", rng.gen_range(0..100), rng.gen_range(0..10))
                } else {
                    rng.gen_range(0..1000).to_string()
                }
            }
            TokenKind::StringLiteral => format!("\"{}\"", STRING_VALUES.choose(rng).unwrap()),
            TokenKind::CharLiteral => format!("'{}'", (b'a' + rng.gen_range(0..26)) as char),
            _ => return None,
        };
        if new == t.text {
            return None;
        }
        accept(src, src.splice(src.offsets[i], src.end(i), &new), false)
    })
}

fn is_operand(t: &Token) -> bool {
    matches!(
        t.kind,
        TokenKind::Identifier | TokenKind::NumberLiteral | TokenKind::StringLiteral | TokenKind::CharLiteral
    )
}

enum IntralineSite {
    /// Append ` <op> <n>` after code token `c`.
    Insert(usize),
    /// Delete the binary operator at code index `c` and its right operand.
    Delete(usize),
}

fn intraline(src: &Source, rng: &mut ChaCha8Rng) -> Option<String> {
    let n = src.code.len();
    let mut sites = Vec::new();
    for c in 0..n {
        let t = src.code_tok(c);
        let next = (c + 1 < n).then(|| src.code_tok(c + 1));
        let prev = c.checked_sub(1).map(|p| src.code_tok(p));
        let closes = |x: Option<&Token>| x.is_some_and(|x| x.is(";") || x.is(")") || x.is(","));
        if matches!(t.kind, TokenKind::Identifier | TokenKind::NumberLiteral)
            && closes(next)
            && prev.is_some_and(|p| p.kind == TokenKind::Operator && !p.is("@") || p.is("(") || p.is(",") || p.is("return"))
        {
            sites.push(IntralineSite::Insert(c));
        }
        if t.kind == TokenKind::Operator
            && ["+", "-", "*", "/", "%"].contains(&t.text.as_str())
            && prev.is_some_and(|p| is_operand(p) || p.is(")") || p.is("]"))
            && next.is_some_and(is_operand)
            && closes((c + 2 < n).then(|| src.code_tok(c + 2)))
        {
            sites.push(IntralineSite::Delete(c));
        }
    }
    first_accepted(sites, rng, |site, rng| {
        let cand = match site {
            IntralineSite::Insert(c) => {
                let at = src.end(src.code[c]);
                let op = ["+", "-", "*"].choose(rng).unwrap();
                src.splice(at, at, &format!(" {op} {}", rng.gen_range(1..10)))
            }
            IntralineSite::Delete(c) => src.splice(src.end(src.code[c - 1]), src.end(src.code[c + 1]), ""),
        };
        accept(src, cand, false)
    })
}

/// One source line with the code tokens on it.
struct LineInfo {
    start: usize,
    /// Byte offset of the line terminator (or end of text).
    end: usize,
    /// Offset just past the terminator.
    next: usize,
    code: Vec<usize>,
    /// No multi-line token touches this line.
    clean: bool,
}

fn lines_of(src: &Source) -> Vec<LineInfo> {
    let mut lines = Vec::new();
    let mut cur = LineInfo { start: 0, end: 0, next: 0, code: Vec::new(), clean: true };
    let mut code_idx = 0;
    for (i, t) in src.tokens.iter().enumerate() {
        if t.kind == TokenKind::Newline {
            cur.end = src.offsets[i];
            cur.next = src.end(i);
            let start = cur.next;
            lines.push(std::mem::replace(&mut cur, LineInfo { start, end: start, next: start, code: Vec::new(), clean: true }));
            continue;
        }
        if t.kind.is_code() {
            cur.code.push(code_idx);
        }
        if t.kind.is_code() || t.kind == TokenKind::Comment || t.kind == TokenKind::Whitespace {
            if t.text.contains('\n') {
                cur.clean = false;
                // the remainder of a multi-line token opens a new, unclean line
                for _ in t.text.matches('\n') {
                    cur.end = src.offsets[i];
                    cur.next = src.offsets[i];
                    lines.push(std::mem::replace(
                        &mut cur,
                        LineInfo { start: src.end(i), end: src.end(i), next: src.end(i), code: Vec::new(), clean: false },
                    ));
                }
            }
        }
        if t.kind.is_code() {
            code_idx += 1;
        }
    }
    cur.end = src.text.len();
    cur.next = src.text.len();
    if cur.start < src.text.len() || !cur.code.is_empty() {
        lines.push(cur);
    }
    lines
}

/// Paren depth after each code token.
fn paren_depths(src: &Source) -> Vec<i32> {
    let mut d = 0;
    src.code
        .iter()
        .map(|&i| {
            let t = &src.tokens[i];
            if t.is("(") {
                d += 1;
            } else if t.is(")") {
                d -= 1;
            }
            d
        })
        .collect()
}

/// Lines holding exactly one complete simple statement.
fn statement_lines(src: &Source, lines: &[LineInfo]) -> Vec<usize> {
    let depth = paren_depths(src);
    lines
        .iter()
        .enumerate()
        .filter(|(_, l)| {
            let (Some(&first), Some(&last)) = (l.code.first(), l.code.last()) else {
                return false;
            };
            let starts_statement = first == 0 || {
                let p = src.code_tok(first - 1);
                (p.is(";") && depth[first - 1] == 0) || p.is("{") || p.is("}")
            };
            l.clean
                && starts_statement
                && src.code_tok(last).is(";")
                && depth[last] == 0
                && !l.code.iter().any(|&c| src.code_tok(c).is("{") || src.code_tok(c).is("}"))
        })
        .map(|(i, _)| i)
        .collect()
}

/// Plain variables: identifiers not used as a type, a call target or a qualifier.
fn variables<'s>(src: &'s Source) -> Vec<&'s str> {
    let n = src.code.len();
    let mut vars: BTreeSet<&str> = BTreeSet::new();
    for c in 0..n {
        let t = src.code_tok(c);
        if t.kind != TokenKind::Identifier {
            continue;
        }
        let next = (c + 1 < n).then(|| src.code_tok(c + 1));
        let prev = c.checked_sub(1).map(|p| src.code_tok(p));
        let bad_next = next.is_some_and(|x| x.is("(") || x.is(".") || x.kind == TokenKind::Identifier || x.is("<"));
        let bad_prev = prev.is_some_and(|p| p.is(".") || p.is("@"));
        if !bad_next && !bad_prev {
            vars.insert(&t.text);
        }
    }
    vars.into_iter().collect()
}

fn indent_of(src: &Source, line: &LineInfo) -> String {
    src.text[line.start..line.end].chars().take_while(|c| *c == ' ' || *c == '\t').collect()
}

fn newline_style(src: &Source) -> &'static str {
    if src.text.contains("\r\n") {
        "\r\n"
    } else {
        "\n"
    }
}

fn synth_statement(src: &Source, rng: &mut ChaCha8Rng, templates: &[&str]) -> String {
    let vars = variables(src);
    match vars.choose(rng) {
        Some(v) => {
            let w = vars.choose(rng).unwrap();
            templates.choose(rng).unwrap().replace("{v}", v).replace("{w}", w)
        }
        None => format!("int {} = {};", fresh_name(&src.identifiers(), rng), rng.gen_range(0..10)),
    }
}

const INSERT_TEMPLATES: &[&str] = &["{v} = {v};", "{v} = {w};", "{v} = {v} + 0;", "{v} = {v} * 1;"];
const MODIFY_TEMPLATES: &[&str] = &["{v} = {v} + 1;", "{v} = {w} * 2;", "System.out.println({v});", "{v}--;", "{v} = {w} - {v};"];

enum LineSite {
    InsertAfter(usize),
    Delete(usize),
}

fn line_insert_delete(src: &Source, rng: &mut ChaCha8Rng) -> Option<String> {
    let lines = lines_of(src);
    let depth = paren_depths(src);
    let code_lines = lines.iter().filter(|l| !l.code.is_empty()).count();
    let mut sites = Vec::new();
    for (i, l) in lines.iter().enumerate() {
        let Some(&last) = l.code.last() else { continue };
        let t = src.code_tok(last);
        let opens_block = t.is("{")
            && last > 0
            && ({
                let p = src.code_tok(last - 1);
                p.is(")") || p.is("else") || p.is("try") || p.is("finally") || p.is("do") || p.is("->")
            });
        if l.clean && ((t.is(";") && depth[last] == 0) || opens_block) {
            sites.push(LineSite::InsertAfter(i));
        }
    }
    if code_lines > 1 {
        for i in statement_lines(src, &lines) {
            let first = src.code_tok(lines[i].code[0]);
            if !first.is("return") && !first.is("break") && !first.is("continue") {
                sites.push(LineSite::Delete(i));
            }
        }
    }
    let nl = newline_style(src);
    first_accepted(sites, rng, |site, rng| {
        let cand = match site {
            LineSite::InsertAfter(i) => {
                let l = &lines[i];
                let mut indent = indent_of(src, l);
                if src.code_tok(*l.code.last().unwrap()).is("{") {
                    indent.push_str("    ");
                }
                let stmt = synth_statement(src, rng, INSERT_TEMPLATES);
                if l.next > l.end {
                    src.splice(l.next, l.next, &format!("{indent}{stmt}{nl}"))
                } else {
                    src.splice(l.end, l.end, &format!("{nl}{indent}{stmt}"))
                }
            }
            LineSite::Delete(i) => {
                let l = &lines[i];
                if l.next > l.end {
                    src.splice(l.start, l.next, "")
                } else if i > 0 {
                    src.splice(lines[i - 1].end, l.end, "")
                } else {
                    return None;
                }
            }
        };
        accept(src, cand, false)
    })
}

fn line_modify(src: &Source, rng: &mut ChaCha8Rng) -> Option<String> {
    let lines = lines_of(src);
    let sites = statement_lines(src, &lines);
    first_accepted(sites, rng, |i, rng| {
        let l = &lines[i];
        let indent = indent_of(src, l);
        let stmt = synth_statement(src, rng, MODIFY_TEMPLATES);
        if src.text[l.start..l.end].trim() == stmt {
            return None;
        }
        accept(src, src.splice(l.start, l.end, &format!("{indent}{stmt}")), false)
    })
}
