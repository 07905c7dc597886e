//! Lossless Java tokenizer.
//!
//! Every byte of the input lands in exactly one token, so concatenating the
//! token texts reproduces the source. Lexical errors never abort: the
//! offending text is kept as a [`TokenKind::Raw`] (or, for an unterminated
//! block comment, a [`TokenKind::Comment`]) token and the error is recorded
//! alongside the token stream.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TokenKind {
    Keyword,
    Identifier,
    StringLiteral,
    CharLiteral,
    NumberLiteral,
    Operator,
    Punctuation,
    Comment,
    Whitespace,
    Newline,
    /// Text recovered from a lexical error.
    Raw,
}

impl TokenKind {
    /// Tokens that carry program content (not layout or comments).
    pub fn is_code(&self) -> bool {
        !matches!(self, TokenKind::Comment | TokenKind::Whitespace | TokenKind::Newline)
    }

    pub fn is_literal(&self) -> bool {
        matches!(
            self,
            TokenKind::StringLiteral | TokenKind::CharLiteral | TokenKind::NumberLiteral
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based line on which the token starts.
    pub line: u32,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LexError {
    #[error("unterminated string literal at line {0}")]
    UnterminatedString(u32),
    #[error("unterminated character literal at line {0}")]
    UnterminatedChar(u32),
    #[error("unterminated block comment at line {0}")]
    UnterminatedComment(u32),
    #[error("unexpected character {1:?} at line {0}")]
    UnexpectedChar(u32, char),
}

/// Token stream plus any recoverable errors met while lexing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexed {
    pub tokens: Vec<Token>,
    pub errors: Vec<LexError>,
}

impl Lexed {
    pub fn code_tokens(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.kind.is_code())
    }
}

pub const JAVA_KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try",
    "void", "volatile", "while", "true", "false", "null", "var",
];

pub fn is_keyword(word: &str) -> bool {
    JAVA_KEYWORDS.contains(&word)
}

// Longest first so that maximal munch falls out of a linear scan.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=",
    "+=", "-=", "*=", "/=", "&=", "|=", "^=", "%=", "<<", ">>", "=", ">", "<", "!", "~", "?", ":",
    "+", "-", "*", "/", "&", "|", "^", "%", "@",
];

const PUNCTUATION: &[char] = &['(', ')', '{', '}', '[', ']', ';', ',', '.'];

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    out: Lexed,
}

/// Tokenizes Java source. Total: every input produces a token stream.
pub fn tokenize_java(src: &str) -> Lexed {
    let mut lx = Lexer {
        src,
        pos: 0,
        line: 1,
        out: Lexed::default(),
    };
    while lx.pos < src.len() {
        lx.step();
    }
    lx.out
}

impl<'a> Lexer<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn emit(&mut self, kind: TokenKind, len: usize) {
        let text = &self.src[self.pos..self.pos + len];
        let line = self.line;
        self.line += text.bytes().filter(|&b| b == b'\n').count() as u32;
        self.pos += len;
        self.out.tokens.push(Token {
            kind,
            text: text.to_string(),
            line,
        });
    }

    fn step(&mut self) {
        let rest = self.rest();
        let c = self.peek().expect("step called at end of input");

        if c == '\n' {
            return self.emit(TokenKind::Newline, 1);
        }
        if rest.starts_with("\r\n") {
            return self.emit(TokenKind::Newline, 2);
        }
        if c.is_whitespace() {
            let len = rest
                .char_indices()
                .find(|&(i, ch)| !ch.is_whitespace() || ch == '\n' || rest[i..].starts_with("\r\n"))
                .map(|(i, _)| i)
                .unwrap_or(rest.len());
            return self.emit(TokenKind::Whitespace, len);
        }
        if rest.starts_with("//") {
            let len = line_comment_len(rest);
            return self.emit(TokenKind::Comment, len);
        }
        if rest.starts_with("/*") {
            return match rest[2..].find("*/") {
                Some(i) => self.emit(TokenKind::Comment, i + 4),
                None => {
                    self.out.errors.push(LexError::UnterminatedComment(self.line));
                    self.emit(TokenKind::Comment, rest.len())
                }
            };
        }
        if rest.starts_with("\"\"\"") {
            return match rest[3..].find("\"\"\"") {
                Some(i) => self.emit(TokenKind::StringLiteral, i + 6),
                None => {
                    self.out.errors.push(LexError::UnterminatedString(self.line));
                    let len = line_comment_len(rest);
                    self.emit(TokenKind::Raw, len)
                }
            };
        }
        if c == '"' || c == '\'' {
            return self.quoted(c);
        }
        if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
            let len = number_len(rest);
            return self.emit(TokenKind::NumberLiteral, len);
        }
        if is_ident_start(c) {
            let len = rest
                .char_indices()
                .find(|&(_, ch)| !is_ident_part(ch))
                .map(|(i, _)| i)
                .unwrap_or(rest.len());
            let kind = if is_keyword(&rest[..len]) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            };
            return self.emit(kind, len);
        }
        if let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(*op)) {
            return self.emit(TokenKind::Operator, op.len());
        }
        if PUNCTUATION.contains(&c) {
            return self.emit(TokenKind::Punctuation, 1);
        }
        self.out.errors.push(LexError::UnexpectedChar(self.line, c));
        self.emit(TokenKind::Raw, c.len_utf8())
    }

    fn quoted(&mut self, quote: char) {
        let rest = self.rest();
        let mut escaped = false;
        for (i, ch) in rest.char_indices().skip(1) {
            if ch == '\n' || ch == '\r' {
                break;
            }
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == quote {
                let kind = if quote == '"' {
                    TokenKind::StringLiteral
                } else {
                    TokenKind::CharLiteral
                };
                return self.emit(kind, i + 1);
            }
        }
        let err = if quote == '"' {
            LexError::UnterminatedString(self.line)
        } else {
            LexError::UnterminatedChar(self.line)
        };
        self.out.errors.push(err);
        let len = line_comment_len(rest);
        self.emit(TokenKind::Raw, len)
    }
}

/// Length up to (not including) the next line terminator.
fn line_comment_len(rest: &str) -> usize {
    rest.find(['\n', '\r']).unwrap_or(rest.len())
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c == '$' || c.is_alphabetic()
}

fn is_ident_part(c: char) -> bool {
    c == '_' || c == '$' || c.is_alphanumeric()
}

fn number_len(rest: &str) -> usize {
    let bytes = rest.as_bytes();
    let mut i = 0;
    if rest.starts_with("0x") || rest.starts_with("0X") || rest.starts_with("0b") || rest.starts_with("0B") {
        i = 2;
        while i < bytes.len() && (bytes[i].is_ascii_hexdigit() || bytes[i] == b'_') {
            i += 1;
        }
    } else {
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit()) {
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
                i += 1;
            }
        } else if i < bytes.len() && bytes[i] == b'.' && i > 0 {
            // `1.` is a valid double literal, but `1..` or `1.foo` are not ours to take.
            if !bytes.get(i + 1).is_some_and(|b| b.is_ascii_alphabetic() || *b == b'.' || *b == b'_') {
                i += 1;
            }
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                i = j;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
        }
    }
    if i < bytes.len() && matches!(bytes[i], b'l' | b'L' | b'f' | b'F' | b'd' | b'D') {
        i += 1;
    }
    i.max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds_texts(src: &str) -> Vec<(TokenKind, String)> {
        tokenize_java(src)
            .tokens
            .into_iter()
            .filter(|t| t.kind != TokenKind::Whitespace)
            .map(|t| (t.kind, t.text))
            .collect()
    }

    #[test]
    fn simple_declaration() {
        use TokenKind::*;
        assert_eq!(
            kinds_texts("int x = 0;"),
            vec![
                (Keyword, "int".into()),
                (Identifier, "x".into()),
                (Operator, "=".into()),
                (NumberLiteral, "0".into()),
                (Punctuation, ";".into()),
            ]
        );
        // whitespace runs are interleaved
        let all = tokenize_java("int x = 0;").tokens;
        assert_eq!(all.len(), 8);
        assert_eq!(all[1].kind, Whitespace);
    }

    #[test]
    fn empty_input() {
        assert!(tokenize_java("").tokens.is_empty());
    }

    #[test]
    fn block_comment_then_ident() {
        assert_eq!(
            kinds_texts("/*c*/x"),
            vec![(TokenKind::Comment, "/*c*/".into()), (TokenKind::Identifier, "x".into())]
        );
    }

    #[test]
    fn line_comment_stops_at_newline() {
        let t = tokenize_java("a; // hi\nb;").tokens;
        assert!(t.iter().any(|t| t.kind == TokenKind::Comment && t.text == "// hi"));
        assert_eq!(t.last().unwrap().line, 2);
    }

    #[test]
    fn literals() {
        use TokenKind::*;
        let got = kinds_texts(r#"s = "a\"b"; c = '\''; n = 0x1F + 1.5e-3f + 10L;"#);
        assert!(got.contains(&(StringLiteral, r#""a\"b""#.into())));
        assert!(got.contains(&(CharLiteral, r"'\''".into())));
        assert!(got.contains(&(NumberLiteral, "0x1F".into())));
        assert!(got.contains(&(NumberLiteral, "1.5e-3f".into())));
        assert!(got.contains(&(NumberLiteral, "10L".into())));
    }

    #[test]
    fn maximal_munch_operators() {
        let got: Vec<String> = kinds_texts("a >>>= b->c; i++ != --j").into_iter().map(|t| t.1).collect();
        assert!(got.contains(&">>>=".to_string()));
        assert!(got.contains(&"->".to_string()));
        assert!(got.contains(&"++".to_string()));
        assert!(got.contains(&"!=".to_string()));
        assert!(got.contains(&"--".to_string()));
    }

    #[test]
    fn member_access_on_number_is_not_swallowed() {
        let got: Vec<String> = kinds_texts("x = 1.5; y = a.b;").into_iter().map(|t| t.1).collect();
        assert!(got.contains(&"1.5".to_string()));
        assert!(got.contains(&".".to_string()));
    }

    #[test]
    fn errors_degrade_and_stay_lossless() {
        for src in ["s = \"oops\nnext();", "/* never closed", "x = 'ab", "a # b"] {
            let lexed = tokenize_java(src);
            assert!(!lexed.errors.is_empty(), "{src}");
            let joined: String = lexed.tokens.iter().map(|t| t.text.as_str()).collect();
            assert_eq!(joined, src);
        }
    }

    #[test]
    fn crlf_is_one_newline() {
        let t = tokenize_java("a;\r\nb;").tokens;
        assert!(t.iter().any(|t| t.kind == TokenKind::Newline && t.text == "\r\n"));
        assert_eq!(t.last().unwrap().line, 2);
    }
}
