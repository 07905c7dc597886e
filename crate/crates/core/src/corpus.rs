//! Method-level fragment corpora: loading `.java` trees and generating
//! synthetic Java classes for benchmarks.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::is_method_header;
use crate::normalize::{tokenize_java, Token};
use crate::pair::CodeFragment;
use crate::Error;

/// Splits a Java file into one fragment per method found directly inside a
/// type body. A method runs from the first token after the previous member
/// (so annotations and modifiers are included) to its closing brace.
pub fn split_methods(source: &str, file_path: &str, min_lines: usize) -> Vec<CodeFragment> {
    let code: Vec<Token> = tokenize_java(source).tokens.into_iter().filter(|t| t.kind.is_code()).collect();
    let lines: Vec<&str> = source.lines().collect();
    let mut out = Vec::new();
    let mut depth = 0usize;
    // depth at which a member started being collected, with its first token line
    let mut member_start: Option<u32> = None;
    let mut open_method: Option<(usize, u32)> = None; // (body depth, start line)
    for (i, tok) in code.iter().enumerate() {
        if depth == 1 && open_method.is_none() && member_start.is_none() && !tok.is("}") && !tok.is(";") {
            member_start = Some(tok.line);
        }
        if tok.is("{") {
            if depth == 1 && open_method.is_none() && is_method_header(&code, i) {
                open_method = Some((depth + 1, member_start.unwrap_or(tok.line)));
            }
            depth += 1;
            if depth == 2 && open_method.is_none() {
                // nested type or initializer block: members inside are not collected
                member_start = None;
            }
        } else if tok.is("}") {
            if let Some((body, start)) = open_method {
                if depth == body {
                    let end = tok.line;
                    let (s, e) = (start as usize, end as usize);
                    if e >= s && e <= lines.len() && e - s + 1 >= min_lines {
                        let mut text = lines[s - 1..e].join("\n");
                        text.push('\n');
                        out.push(CodeFragment {
                            source_text: text,
                            file_path: Some(file_path.to_string()),
                            start_line: start,
                            end_line: end,
                            language: crate::pair::Language::Java,
                        });
                    }
                    open_method = None;
                }
            }
            depth = depth.saturating_sub(1);
            if depth <= 1 {
                member_start = None;
            }
        } else if tok.is(";") && depth == 1 {
            member_start = None;
        }
    }
    out
}

/// Recursively loads `.java` files under `dir` (sorted by path) and splits
/// them into method fragments. Paths in fragments are relative to `dir`.
pub fn load_java_dir(dir: &Path, min_lines: usize) -> Result<Vec<CodeFragment>, Error> {
    let mut files = Vec::new();
    collect_java(dir, &mut files)?;
    files.sort();
    let mut out = Vec::new();
    for f in files {
        let text = fs::read_to_string(&f)?;
        let rel = f.strip_prefix(dir).unwrap_or(&f).to_string_lossy().replace('\\', "/");
        out.extend(split_methods(&text, &rel, min_lines));
    }
    Ok(out)
}

fn collect_java(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), Error> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_java(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "java") {
            out.push(path);
        }
    }
    Ok(())
}

const NOUNS: &[&str] = &[
    "count", "total", "index", "buffer", "name", "value", "result", "item", "node", "list", "key", "size", "offset",
    "limit", "path", "text", "data", "flag", "score", "weight", "entry", "cache", "queue", "token", "line", "row",
    "col", "sum", "max", "min", "delta", "temp", "input", "output", "reader", "writer", "builder", "state", "config",
    "width", "height", "depth", "price", "amount", "user", "order", "account", "message", "payload", "channel",
];
const VERBS: &[&str] = &[
    "compute", "load", "parse", "update", "find", "read", "write", "build", "merge", "check", "process", "handle",
    "apply", "resolve", "collect", "filter", "scan", "render", "encode", "decode", "sort", "visit", "emit", "store",
    "fetch", "validate", "convert", "format", "register", "notify",
];
const CLASS_NOUNS: &[&str] = &[
    "Parser", "Cache", "Registry", "Buffer", "Report", "Session", "Matrix", "Ledger", "Index", "Scheduler", "Router",
    "Encoder", "Inventory", "Catalog", "Tracker", "Monitor", "Builder", "Loader", "Queue", "Graph",
];
const TYPES: &[&str] = &["int", "long", "double", "boolean", "String", "char"];
const MESSAGES: &[&str] = &[
    "value out of range", "missing entry", "done", "retrying", "invalid input", "skipping row", "cache miss",
    "unexpected state", "closing", "ready",
];
const COMMENTS: &[&str] = &[
    "// keep the previous value", "// TODO handle overflow", "// fast path", "// see caller", "/* bounds checked */",
    "// guard against empty input", "// NOTE: order matters",
];

struct MethodGen<'a> {
    rng: &'a mut ChaCha8Rng,
    locals: Vec<(String, &'static str)>,
    lines: Vec<String>,
}

impl MethodGen<'_> {
    fn ident(&mut self) -> String {
        let n = NOUNS.choose(self.rng).unwrap();
        if self.rng.gen_bool(0.3) {
            format!("{n}{}", self.rng.gen_range(1..10))
        } else {
            n.to_string()
        }
    }

    fn camel(&mut self) -> String {
        let v = VERBS.choose(self.rng).unwrap();
        let n = NOUNS.choose(self.rng).unwrap();
        let mut c = n.chars();
        let first = c.next().unwrap().to_ascii_uppercase();
        format!("{v}{first}{}", c.as_str())
    }

    fn local_of(&mut self, ty: &str) -> Option<String> {
        let cands: Vec<&String> = self.locals.iter().filter(|(_, t)| *t == ty).map(|(n, _)| n).collect();
        cands.choose(self.rng).map(|s| s.to_string())
    }

    fn int_operand(&mut self) -> String {
        match self.local_of("int") {
            Some(v) if self.rng.gen_bool(0.7) => v,
            _ => self.rng.gen_range(0..100).to_string(),
        }
    }

    fn push(&mut self, depth: usize, s: String) {
        self.lines.push(format!("{}{}", "    ".repeat(depth), s));
    }

    fn fresh_local(&mut self, ty: &'static str) -> String {
        let mut name = self.ident();
        while self.locals.iter().any(|(n, _)| *n == name) {
            name = format!("{name}{}", self.rng.gen_range(0..10));
        }
        self.locals.push((name.clone(), ty));
        name
    }

    fn statement(&mut self, depth: usize, nest: usize) {
        let choice = self.rng.gen_range(0..if nest < 2 { 15 } else { 11 });
        match choice {
            0 | 1 => {
                let a = self.int_operand();
                let b = self.int_operand();
                let op = ["+", "-", "*", "/", "%"].choose(self.rng).unwrap();
                let v = self.fresh_local("int");
                self.push(depth, format!("int {v} = {a} {op} {b};"));
            }
            2 => {
                if let Some(v) = self.local_of("int") {
                    let b = self.int_operand();
                    let op = ["+=", "-=", "*=", "="].choose(self.rng).unwrap();
                    self.push(depth, format!("{v} {op} {b};"));
                } else {
                    let v = self.fresh_local("int");
                    let n = self.rng.gen_range(0..50);
                    self.push(depth, format!("int {v} = {n};"));
                }
            }
            3 => {
                let v = self.fresh_local("String");
                let msg = MESSAGES.choose(self.rng).unwrap();
                let tail = self.int_operand();
                self.push(depth, format!("String {v} = \"{msg}: \" + {tail};"));
            }
            4 => {
                let target = self.ident();
                let m = self.camel();
                let a = self.int_operand();
                self.push(depth, format!("{target}.{m}({a});"));
            }
            5 => {
                let msg = MESSAGES.choose(self.rng).unwrap();
                let a = self.int_operand();
                self.push(depth, format!("System.out.println(\"{msg} \" + {a});"));
            }
            6 => {
                let v = self.fresh_local("boolean");
                let a = self.int_operand();
                let b = self.int_operand();
                let cmp = ["<", ">", "<=", ">=", "==", "!="].choose(self.rng).unwrap();
                self.push(depth, format!("boolean {v} = {a} {cmp} {b};"));
            }
            7 => {
                let v = self.fresh_local("char");
                let c = (b'a' + self.rng.gen_range(0..26)) as char;
                self.push(depth, format!("char {v} = '{c}';"));
            }
            8 => {
                let v = self.fresh_local("double");
                let a = self.int_operand();
                let f = self.rng.gen_range(1..100) as f64 / 10.0;
                self.push(depth, format!("double {v} = {a} * {f:.1};"));
            }
            9 => {
                let c = COMMENTS.choose(self.rng).unwrap();
                self.push(depth, c.to_string());
            }
            10 => {
                let list = self.ident();
                let a = self.int_operand();
                self.push(depth, format!("{list}.add({a});"));
            }
            11 => {
                let a = self.int_operand();
                let b = self.int_operand();
                let cmp = ["<", ">", "==", "!="].choose(self.rng).unwrap();
                self.push(depth, format!("if ({a} {cmp} {b}) {{"));
                self.block(depth + 1, nest + 1, 1, 3);
                if self.rng.gen_bool(0.4) {
                    self.push(depth, "} else {".into());
                    self.block(depth + 1, nest + 1, 1, 2);
                }
                self.push(depth, "}".into());
            }
            12 => {
                let i = ["i", "j", "k"][nest.min(2)];
                let n = self.int_operand();
                self.push(depth, format!("for (int {i} = 0; {i} < {n}; {i}++) {{"));
                self.locals.push((i.to_string(), "int"));
                self.block(depth + 1, nest + 1, 1, 3);
                self.locals.retain(|(n, _)| n != i);
                self.push(depth, "}".into());
            }
            13 => {
                let a = self.local_of("int").unwrap_or_else(|| "count".into());
                let n = self.rng.gen_range(1..1000);
                self.push(depth, format!("while ({a} < {n}) {{"));
                self.block(depth + 1, nest + 1, 1, 2);
                self.push(depth, format!("    {a}++;"));
                self.push(depth, "}".into());
            }
            _ => {
                self.push(depth, "try {".into());
                self.block(depth + 1, nest + 1, 1, 2);
                let ex = ["IOException", "IllegalStateException", "RuntimeException"].choose(self.rng).unwrap();
                self.push(depth, format!("}} catch ({ex} e) {{"));
                let msg = MESSAGES.choose(self.rng).unwrap();
                self.push(depth + 1, format!("log.warn(\"{msg}\", e);"));
                self.push(depth, "}".into());
            }
        }
    }

    fn block(&mut self, depth: usize, nest: usize, min: usize, max: usize) {
        let n = self.rng.gen_range(min..=max);
        let saved = self.locals.len();
        for _ in 0..n {
            self.statement(depth, nest);
        }
        self.locals.truncate(saved);
    }
}

fn generate_method(rng: &mut ChaCha8Rng, depth: usize) -> Vec<String> {
    let mut g = MethodGen { rng, locals: Vec::new(), lines: Vec::new() };
    let ret = if g.rng.gen_bool(0.3) { "void" } else { TYPES.choose(g.rng).unwrap() };
    let name = g.camel();
    let nparams = g.rng.gen_range(0..4);
    let mut params = Vec::new();
    for _ in 0..nparams {
        let ty = *TYPES.choose(g.rng).unwrap();
        let p = g.fresh_local(ty);
        params.push(format!("{ty} {p}"));
    }
    let vis = ["public ", "private ", "protected ", ""].choose(g.rng).unwrap();
    let stat = if g.rng.gen_bool(0.2) { "static " } else { "" };
    if g.rng.gen_bool(0.15) {
        g.push(depth, "@Override".into());
    }
    g.push(depth, format!("{vis}{stat}{ret} {name}({}) {{", params.join(", ")));
    let n = g.rng.gen_range(3..10);
    for _ in 0..n {
        g.statement(depth + 1, 0);
    }
    let value = match ret {
        "void" => None,
        "int" | "long" => Some(g.int_operand()),
        "double" => Some(format!("{}.5", g.rng.gen_range(0..10))),
        "boolean" => Some(["true", "false"].choose(g.rng).unwrap().to_string()),
        "char" => Some(format!("'{}'", (b'a' + g.rng.gen_range(0..26)) as char)),
        _ => Some(format!("\"{}\"", MESSAGES.choose(g.rng).unwrap())),
    };
    if let Some(v) = value {
        g.push(depth + 1, format!("return {v};"));
    }
    g.push(depth, "}".into());
    g.lines
}

/// Source text of one synthetic class.
pub fn synthetic_class(name: &str, methods: usize, rng: &mut ChaCha8Rng) -> String {
    let mut out = vec!["package bench.synthetic;".to_string(), String::new(), "import java.io.IOException;".into()];
    out.push(String::new());
    out.push(format!("public class {name} {{"));
    out.push(format!("    private int count = {};", rng.gen_range(0..10)));
    for _ in 0..methods {
        out.push(String::new());
        out.extend(generate_method(rng, 1));
    }
    out.push("}".into());
    let mut text = out.join("\n");
    text.push('\n');
    text
}

/// Files of synthetic Java classes as `(relative path, source)`.
pub fn synthetic_files(files: usize, methods_per_file: usize, seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..files)
        .map(|i| {
            let base = CLASS_NOUNS.choose(&mut rng).unwrap();
            let name = format!("{base}{i}");
            let text = synthetic_class(&name, methods_per_file, &mut rng);
            (format!("bench/synthetic/{name}.java"), text)
        })
        .collect()
}

/// Method fragments of a synthetic corpus.
pub fn synthetic_corpus(files: usize, methods_per_file: usize, seed: u64) -> Vec<CodeFragment> {
    synthetic_files(files, methods_per_file, seed)
        .into_iter()
        .flat_map(|(path, text)| split_methods(&text, &path, 3))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FILE: &str = "package p;\n\nclass A {\n    int x;\n\n    @Override\n    public String toString() {\n        return \"a\";\n    }\n\n    void f(int a) throws IOException {\n        if (a > 0) {\n            g(a);\n        }\n    }\n\n    static class B {\n        void inner() {\n            x();\n        }\n    }\n}\n";

    #[test]
    fn splits_top_level_methods() {
        let methods = split_methods(FILE, "A.java", 1);
        assert_eq!(methods.len(), 2);
        assert_eq!((methods[0].start_line, methods[0].end_line), (6, 9));
        assert!(methods[0].source_text.starts_with("    @Override\n"));
        assert_eq!((methods[1].start_line, methods[1].end_line), (11, 15));
        assert!(methods[1].source_text.trim_end().ends_with('}'));
    }

    #[test]
    fn synthetic_corpus_is_reproducible_and_parseable() {
        let a = synthetic_corpus(4, 5, 11);
        let b = synthetic_corpus(4, 5, 11);
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        for f in &a {
            let lexed = tokenize_java(&f.source_text);
            assert!(lexed.errors.is_empty());
            assert!(crate::features::count_unmatched_braces(f, f) == 0, "{}", f.source_text);
        }
        let files: std::collections::BTreeSet<_> = a.iter().map(|f| f.file_path.clone()).collect();
        assert_eq!(files.len(), 4);
    }

    #[test]
    fn loads_directory() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("sub/A.java"), FILE).unwrap();
        fs::write(dir.path().join("notes.txt"), "void f() {}").unwrap();
        let frags = load_java_dir(dir.path(), 1).unwrap();
        assert_eq!(frags.len(), 2);
        assert_eq!(frags[0].file_path.as_deref(), Some("sub/A.java"));
    }
}
