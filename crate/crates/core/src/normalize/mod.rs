//! Source normalization at three cumulative levels.
//!
//! * `Type1`: comments removed, canonical spacing, statement-per-line layout.
//! * `Type2`: `Type1` plus blind renaming (identifiers become `X`, string
//!   literals `"string"`, char literals `'c'`, numbers `0`).
//! * `Type3`: `Type2` minus blank lines, brace-only and `;`-only lines, and
//!   `import`/`package` lines.
//!
//! Layout is computed from the code token stream. Source line breaks inside a
//! statement are kept, but a line break is forced after `;` (outside
//! parentheses), after `{`, before `}` and after `}` (unless `;`, `,` or `)`
//! follows). An opening brace always joins the line before it. Lines carry no
//! indentation, and tokens are joined by a fixed spacing rule, so whitespace
//! never reaches the output.

mod lexer;

pub use lexer::{is_keyword, tokenize_java, LexError, Lexed, Token, TokenKind, JAVA_KEYWORDS};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pair::{CodeFragment, Language};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NormalizationLevel {
    Type1,
    Type2,
    Type3,
}

impl NormalizationLevel {
    pub const ALL: [NormalizationLevel; 3] = [
        NormalizationLevel::Type1,
        NormalizationLevel::Type2,
        NormalizationLevel::Type3,
    ];
}

impl fmt::Display for NormalizationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NormalizationLevel::Type1 => "Type1",
            NormalizationLevel::Type2 => "Type2",
            NormalizationLevel::Type3 => "Type3",
        };
        f.write_str(s)
    }
}

/// A code token after normalization; layout tokens never appear here.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NormToken {
    pub kind: TokenKind,
    pub text: String,
}

impl NormToken {
    fn is(&self, text: &str) -> bool {
        self.text == text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedFragment {
    pub level: NormalizationLevel,
    /// Normalized lines; blank lines are kept as empty strings (Type1/Type2).
    pub lines: Vec<String>,
    pub tokens: Vec<NormToken>,
}

impl NormalizedFragment {
    /// Re-wraps the normalized text as a fragment so it can be fed back in.
    pub fn to_fragment(&self, language: Language) -> CodeFragment {
        let mut text = self.lines.join("\n");
        if !self.lines.is_empty() {
            text.push('\n');
        }
        CodeFragment {
            end_line: self.lines.len().max(1) as u32,
            source_text: text,
            file_path: None,
            start_line: 1,
            language,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Lossless tokenization of a fragment.
pub fn tokenize(fragment: &CodeFragment) -> Result<Lexed, Error> {
    match fragment.language {
        Language::Java => Ok(tokenize_java(&fragment.source_text)),
    }
}

pub fn normalize(fragment: &CodeFragment, level: NormalizationLevel) -> Result<NormalizedFragment, Error> {
    let lexed = tokenize(fragment)?;
    Ok(normalize_tokens(&lexed.tokens, level))
}

/// Normalizes a fragment at all three levels with a single lexing pass.
pub fn normalize_all(fragment: &CodeFragment) -> Result<[NormalizedFragment; 3], Error> {
    let lexed = tokenize(fragment)?;
    Ok(NormalizationLevel::ALL.map(|level| normalize_tokens(&lexed.tokens, level)))
}

pub fn normalize_tokens(tokens: &[Token], level: NormalizationLevel) -> NormalizedFragment {
    let stream = CodeStream::from_tokens(tokens, level);
    let mut lines = stream.layout();
    if level == NormalizationLevel::Type3 {
        lines.retain(|line| match line {
            OutLine::Blank => false,
            OutLine::Code(toks) => !dropped_at_type3(toks),
        });
    }
    let mut rendered = Vec::with_capacity(lines.len());
    let mut kept_tokens = Vec::new();
    for line in lines {
        match line {
            OutLine::Blank => rendered.push(String::new()),
            OutLine::Code(toks) => {
                rendered.push(render_line(&toks));
                kept_tokens.extend(toks.into_iter().map(|t| t.token));
            }
        }
    }
    NormalizedFragment {
        level,
        lines: rendered,
        tokens: kept_tokens,
    }
}

fn dropped_at_type3(toks: &[LaidToken]) -> bool {
    match toks {
        [only] => only.token.is("{") || only.token.is("}") || only.token.is(";"),
        [first, ..] => first.token.kind == TokenKind::Keyword && (first.token.is("import") || first.token.is("package")),
        [] => true,
    }
}

/// Applies the Type2 blind renaming to one token.
pub fn rename_blind(kind: TokenKind, text: &str) -> String {
    match kind {
        TokenKind::Identifier => "X".to_string(),
        TokenKind::StringLiteral => "\"string\"".to_string(),
        TokenKind::CharLiteral => "'c'".to_string(),
        TokenKind::NumberLiteral => "0".to_string(),
        _ => text.to_string(),
    }
}

#[derive(Debug, Clone)]
struct LaidToken {
    token: NormToken,
    /// Prefix/postfix operator that binds without a space to its operand.
    unary: bool,
}

/// Source layout between two consecutive code tokens.
#[derive(Debug, Clone, Copy, Default)]
struct Gap {
    breaks: usize,
    blanks: usize,
}

enum OutLine {
    Blank,
    Code(Vec<LaidToken>),
}

struct CodeStream {
    tokens: Vec<LaidToken>,
    /// `gaps[i]` is the layout before `tokens[i]`; `gaps[len]` trails the last token.
    gaps: Vec<Gap>,
}

impl CodeStream {
    fn from_tokens(tokens: &[Token], level: NormalizationLevel) -> Self {
        let mut out = Vec::new();
        let mut gaps = Vec::new();
        let mut gap = Gap::default();
        // State of the source line currently being scanned.
        let mut line_has_code = false;
        let mut line_has_comment = false;
        let mut line_has_text = false;

        let end_line = |gap: &mut Gap, has_code: bool, has_comment: bool| {
            if !has_code && !has_comment {
                gap.blanks += 1;
            }
            gap.breaks += 1;
        };

        for tok in tokens {
            match tok.kind {
                TokenKind::Newline => {
                    end_line(&mut gap, line_has_code, line_has_comment);
                    line_has_code = false;
                    line_has_comment = false;
                    line_has_text = false;
                }
                TokenKind::Whitespace => line_has_text = true,
                TokenKind::Comment => {
                    for _ in tok.text.matches('\n') {
                        end_line(&mut gap, line_has_code, true);
                        line_has_code = false;
                    }
                    line_has_comment = true;
                    line_has_text = true;
                }
                kind => {
                    gaps.push(std::mem::take(&mut gap));
                    let text = if level >= NormalizationLevel::Type2 {
                        rename_blind(kind, &tok.text)
                    } else {
                        tok.text.clone()
                    };
                    out.push(NormToken { kind, text });
                    line_has_code = true;
                    line_has_text = true;
                }
            }
        }
        // A trailing segment after the final newline is a line only if it has text.
        if line_has_text && !line_has_code && !line_has_comment {
            gap.blanks += 1;
        }
        gaps.push(gap);

        let unary = unary_flags(&out);
        let tokens = out
            .into_iter()
            .zip(unary)
            .map(|(token, unary)| LaidToken { token, unary })
            .collect();
        CodeStream { tokens, gaps }
    }

    fn layout(self) -> Vec<OutLine> {
        let mut lines = Vec::new();
        if self.tokens.is_empty() {
            lines.extend((0..self.gaps[0].blanks).map(|_| OutLine::Blank));
            return lines;
        }
        let forced = forced_breaks(self.tokens.iter().map(|t| &t.token));
        lines.extend((0..self.gaps[0].blanks).map(|_| OutLine::Blank));
        let mut current: Vec<LaidToken> = Vec::new();
        let n = self.tokens.len();
        for (i, tok) in self.tokens.into_iter().enumerate() {
            if i > 0 {
                let gap = self.gaps[i];
                let boundary = if forced[i - 1] {
                    Some(gap.blanks)
                } else if tok.token.is("{") {
                    None
                } else if gap.breaks > 0 {
                    Some(gap.blanks)
                } else {
                    None
                };
                if let Some(blanks) = boundary {
                    lines.push(OutLine::Code(std::mem::take(&mut current)));
                    lines.extend((0..blanks).map(|_| OutLine::Blank));
                }
            }
            current.push(tok);
        }
        lines.push(OutLine::Code(current));
        lines.extend((0..self.gaps[n].blanks).map(|_| OutLine::Blank));
        lines
    }
}

/// For each adjacent pair `(i, i+1)` of code tokens, whether the layout puts
/// a line break between them no matter what the source did. Breaks before an
/// opening brace are never taken, so that position is layout-neutral too; see
/// [`layout_neutral_boundaries`].
fn forced_breaks<'a>(tokens: impl Iterator<Item = &'a NormToken>) -> Vec<bool> {
    let toks: Vec<&NormToken> = tokens.collect();
    let mut paren_depth = 0usize;
    let mut out = Vec::with_capacity(toks.len().saturating_sub(1));
    for w in toks.windows(2) {
        let (p, n) = (w[0], w[1]);
        if p.kind == TokenKind::Punctuation {
            match p.text.as_str() {
                "(" => paren_depth += 1,
                ")" => paren_depth = paren_depth.saturating_sub(1),
                _ => {}
            }
        }
        let brk = (p.is(";") && paren_depth == 0)
            || p.is("{")
            || n.is("}")
            || (p.is("}") && !(n.is(";") || n.is(",") || n.is(")")));
        out.push(brk);
    }
    out
}

/// Boundaries between consecutive code tokens where adding or removing a
/// single line break cannot change the normalized layout. Index `i` refers to
/// the boundary between code token `i` and `i + 1`.
pub fn layout_neutral_boundaries(code: &[&Token]) -> Vec<bool> {
    let norm: Vec<NormToken> = code
        .iter()
        .map(|t| NormToken {
            kind: t.kind,
            text: t.text.clone(),
        })
        .collect();
    let forced = forced_breaks(norm.iter());
    forced
        .into_iter()
        .enumerate()
        .map(|(i, f)| f || norm[i + 1].is("{"))
        .collect()
}

fn unary_flags(tokens: &[NormToken]) -> Vec<bool> {
    let mut flags = Vec::with_capacity(tokens.len());
    for (i, tok) in tokens.iter().enumerate() {
        let prev = if i == 0 { None } else { Some((&tokens[i - 1], flags[i - 1])) };
        let unary = tok.kind == TokenKind::Operator
            && match tok.text.as_str() {
                "!" | "~" | "@" => true,
                "++" | "--" | "+" | "-" => !follows_operand(prev),
                _ => false,
            };
        flags.push(unary);
    }
    flags
}

/// Whether the previous token ends an operand (so `+`/`-` is binary and
/// `++`/`--` is postfix).
fn follows_operand(prev: Option<(&NormToken, bool)>) -> bool {
    let Some((p, p_unary)) = prev else {
        return false;
    };
    match p.kind {
        TokenKind::Identifier | TokenKind::StringLiteral | TokenKind::CharLiteral | TokenKind::NumberLiteral | TokenKind::Raw => true,
        TokenKind::Keyword => matches!(p.text.as_str(), "this" | "super" | "true" | "false" | "null" | "class"),
        TokenKind::Punctuation => p.is(")") || p.is("]"),
        // postfix increment ends an operand, prefix increment does not
        TokenKind::Operator => (p.is("++") || p.is("--")) && !p_unary,
        _ => false,
    }
}

fn render_line(toks: &[LaidToken]) -> String {
    let mut line = String::new();
    for (i, tok) in toks.iter().enumerate() {
        if i > 0 && space_between(&toks[i - 1], tok) {
            line.push(' ');
        }
        line.push_str(&tok.token.text);
    }
    line
}

fn space_between(prev: &LaidToken, next: &LaidToken) -> bool {
    let (p, n) = (&prev.token, &next.token);
    if p.is("(") || p.is("[") || p.is(".") || p.is("::") || prev.unary {
        return false;
    }
    if n.is(")") || n.is("]") || n.is(";") || n.is(",") || n.is(".") || n.is("::") {
        return false;
    }
    if (n.is("++") || n.is("--")) && !next.unary {
        return false;
    }
    if n.is("(") {
        return !(p.kind == TokenKind::Identifier || p.is(")") || p.is("]") || p.is("this") || p.is("super"));
    }
    if n.is("[") {
        return !matches!(
            p.kind,
            TokenKind::Identifier | TokenKind::Keyword | TokenKind::StringLiteral
        ) && !(p.is("]") || p.is(")"));
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(src: &str, level: NormalizationLevel) -> Vec<String> {
        normalize(&CodeFragment::java(src), level).unwrap().lines
    }

    use NormalizationLevel::*;

    #[test]
    fn type2_renames_declaration() {
        assert_eq!(norm("String associator = args[0];", Type2), vec!["X X = X[0];"]);
    }

    #[test]
    fn type2_string_literal() {
        assert_eq!(
            norm("\"The first argument must be the class name of a kernel\"", Type2),
            vec!["\"string\""]
        );
    }

    #[test]
    fn type2_keeps_keywords() {
        assert_eq!(norm("Object o = null; boolean b = true;", Type2), vec!["X X = null;", "boolean X = true;"]);
    }

    #[test]
    fn type1_removes_comments_and_canonicalizes_spacing() {
        let a = norm("int   x=f( a ,b );// trailing\n/* block */ y++ ;", Type1);
        assert_eq!(a, vec!["int x = f(a, b);", "y++;"]);
    }

    #[test]
    fn comment_only_lines_vanish_blank_lines_stay() {
        let a = norm("a();\n// note\n\nb();\n", Type1);
        assert_eq!(a, vec!["a();", "", "b();"]);
    }

    #[test]
    fn braces_layout() {
        assert_eq!(
            norm("if (x)\n{ a(); } else { b(); }", Type1),
            vec!["if (x) {", "a();", "}", "else {", "b();", "}"]
        );
        assert_eq!(norm("int[] v = {1, 2};", Type1), vec!["int[] v = {", "1, 2", "};"]);
    }

    #[test]
    fn statement_continuation_lines_are_kept() {
        assert_eq!(
            norm("throw new Exception(\n  \"msg\");", Type2),
            vec!["throw new X(", "\"string\");"]
        );
    }

    #[test]
    fn for_header_semicolons_do_not_split() {
        assert_eq!(norm("for (int i = 0; i < n; i++) { s += -i; }", Type1), vec![
            "for (int i = 0; i < n; i++) {",
            "s += -i;",
            "}"
        ]);
    }

    #[test]
    fn type3_drops_noise_lines() {
        let src = "package a.b;\nimport java.util.List;\n\nvoid f()\n{\n  g();\n  ;\n}\n";
        assert_eq!(norm(src, Type3), vec!["void X() {", "X();"]);
        assert_eq!(norm(src, Type2), vec!["package X.X;", "import X.X.X;", "", "void X() {", "X();", ";", "}"]);
    }

    #[test]
    fn unary_spacing() {
        assert_eq!(norm("x = -1 + !y - ++z - w--;", Type1), vec!["x = -1 + !y - ++z - w--;"]);
        assert_eq!(norm("@Override\npublic void run() {}", Type1), vec!["@Override", "public void run() {", "}"]);
    }

    #[test]
    fn empty_and_comment_only_fragments() {
        assert!(norm("", Type1).is_empty());
        assert!(norm("// only a comment\n", Type1).is_empty());
        assert_eq!(norm("\n\n", Type1), vec!["", ""]);
    }

    #[test]
    fn trailing_blank_lines_preserved() {
        assert_eq!(norm("a();\n\n\n\n", Type1), vec!["a();", "", "", ""]);
        assert_eq!(norm("a();\n\n\n\n", Type3), vec!["X();"]);
    }

    #[test]
    fn newline_before_open_brace_is_neutral() {
        assert_eq!(norm("if (x)\n{\ny();\n}", Type1), norm("if (x) { y(); }", Type1));
    }

    #[test]
    fn idempotent_on_examples() {
        let srcs = [
            "try {\n  if (a.b == 0) {\n    throw new E(\n\"m\");\n  }\n}\n\n",
            "int[] v = {1, 2};\nfor (;;) { x--; }",
            "s = 'a' + \"b\" + 0x10; // c",
        ];
        for src in srcs {
            for level in NormalizationLevel::ALL {
                let once = normalize(&CodeFragment::java(src), level).unwrap();
                let twice = normalize(&once.to_fragment(Language::Java), level).unwrap();
                assert_eq!(once, twice, "{level} {src:?}");
            }
        }
    }
}
