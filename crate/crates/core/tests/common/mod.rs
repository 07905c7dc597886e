//! Independent oracles and source fuzzers shared by the property and
//! acceptance suites. Nothing here calls the code under test except to read
//! tokens and layout-neutral positions.

#![allow(dead_code)]

use clonevet_core::classifiers::{Activation, NeuralNetModel};
use clonevet_core::normalize::{is_keyword, layout_neutral_boundaries, tokenize_java, Token, TokenKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Longest common subsequence length by the textbook table.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
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

/// Probability that a random positive outscores a random negative, ties half.
pub fn concordance(scores: &[f64], positive: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0usize;
    for (i, &si) in scores.iter().enumerate() {
        if !positive[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if positive[j] {
                continue;
            }
            pairs += 1;
            if si > sj {
                num += 1.0;
            } else if si == sj {
                num += 0.5;
            }
        }
    }
    num / pairs as f64
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Rule-of-thumb bandwidth with the same fallbacks the model documents:
/// IQR ignored when zero, floor 1e-6, single values get the floor.
pub fn rule_of_thumb_bandwidth(v: &[f64]) -> f64 {
    let m = v.len() as f64;
    if v.len() < 2 {
        return 1e-6;
    }
    let mean = v.iter().sum::<f64>() / m;
    let sd = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0)).sqrt();
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let iqr = percentile(&s, 0.75) - percentile(&s, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    (0.9 * spread * m.powf(-0.2)).max(1e-6)
}

/// Posterior of the true class by the plain product
/// `Pr(C) * prod_i (1/(m h)) sum_j phi((x_i - x_ij) / h)`, renormalized over
/// the two classes. `None` when both products underflow.
pub fn naive_bayes_posterior(rows: &[(Vec<f64>, bool)], x: &[f64]) -> Option<f64> {
    let n = rows.len() as f64;
    let mut score = [0.0f64; 2];
    for (c, class) in [true, false].into_iter().enumerate() {
        let members: Vec<&Vec<f64>> = rows.iter().filter(|r| r.1 == class).map(|r| &r.0).collect();
        let mut p = members.len() as f64 / n;
        for (i, &xi) in x.iter().enumerate() {
            let col: Vec<f64> = members.iter().map(|r| r[i]).collect();
            let h = rule_of_thumb_bandwidth(&col);
            let sum: f64 = col
                .iter()
                .map(|&v| {
                    let u = (xi - v) / h;
                    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
                })
                .sum();
            p *= sum / (col.len() as f64 * h);
        }
        score[c] = p;
    }
    let total = score[0] + score[1];
    (total > 1e-300).then(|| score[0] / total)
}

/// A random small network with uniform weights in [-1, 1], a batch of inputs
/// in [0, 1] and one-hot targets. ReLU networks are redrawn until no hidden
/// pre-activation lies within 1e-3 of the kink, so finite differences are valid.
pub fn random_network(rng: &mut ChaCha8Rng) -> (NeuralNetModel, Vec<Vec<f64>>, Vec<[f64; 2]>) {
    loop {
        let n = rng.gen_range(1..=4);
        let depth = rng.gen_range(1..=2);
        let mut sizes = vec![n];
        sizes.extend((0..depth).map(|_| rng.gen_range(1..=5)));
        sizes.push(2);
        let act = if rng.gen_bool(0.5) { Activation::Sigmoid } else { Activation::Relu };
        let mut net = NeuralNetModel::zeros(&sizes, act);
        let count = net.parameters().len();
        let params: Vec<f64> = (0..count).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        net.set_parameters(&params);
        let batch = rng.gen_range(1..=6);
        let xs: Vec<Vec<f64>> = (0..batch).map(|_| (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect()).collect();
        let ys: Vec<[f64; 2]> = (0..batch).map(|_| if rng.gen_bool(0.5) { [1.0, 0.0] } else { [0.0, 1.0] }).collect();
        if act == Activation::Relu && xs.iter().any(|x| near_kink(&net, x)) {
            continue;
        }
        return (net, xs, ys);
    }
}

fn hidden_preactivations(net: &NeuralNetModel, x: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut a = x.to_vec();
    let mut hidden = Vec::new();
    let last = net.layers.len() - 1;
    for (l, layer) in net.layers.iter().enumerate() {
        let mut z = layer.biases.clone();
        for (i, &ai) in a.iter().enumerate() {
            for (o, zo) in z.iter_mut().enumerate() {
                *zo += ai * layer.weights[i * layer.outputs + o];
            }
        }
        if l == last {
            return (hidden, z);
        }
        a = z
            .iter()
            .map(|&v| match net.hidden_activation {
                Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
                Activation::Relu => v.max(0.0),
            })
            .collect();
        hidden.push(z);
    }
    unreachable!()
}

fn near_kink(net: &NeuralNetModel, x: &[f64]) -> bool {
    hidden_preactivations(net, x).0.iter().flatten().any(|z| z.abs() < 1e-3)
}

/// Mean cross-entropy computed with a separate forward pass.
pub fn cross_entropy(net: &NeuralNetModel, xs: &[Vec<f64>], ys: &[[f64; 2]]) -> f64 {
    let mut total = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let (_, z) = hidden_preactivations(net, x);
        let m = z[0].max(z[1]);
        let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
        total -= y[0] * (z[0] - lse) + y[1] * (z[1] - lse);
    }
    total / xs.len() as f64
}

/// Worst relative error between backprop and central differences over all
/// parameters. The denominator is floored at 1e-6 so that vanishing partials
/// are judged on absolute error.
pub fn gradient_check(net: &NeuralNetModel, xs: &[Vec<f64>], ys: &[[f64; 2]], eps: f64) -> f64 {
    let (_, analytic) = net.loss_and_gradient(xs, ys);
    let base = net.parameters();
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] = base[k] + eps;
        probe.set_parameters(&p);
        let up = cross_entropy(&probe, xs, ys);
        p[k] = base[k] - eps;
        probe.set_parameters(&p);
        let down = cross_entropy(&probe, xs, ys);
        let numeric = (up - down) / (2.0 * eps);
        let denom = analytic[k].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[k] - numeric).abs() / denom);
    }
    worst
}

/// Code tokens and the layout text between them. `gaps[0]` precedes the first
/// code token and `gaps[len]` follows the last.
struct Split {
    code: Vec<Token>,
    gaps: Vec<Vec<Token>>,
}

fn split(src: &str) -> Split {
    let mut code = Vec::new();
    let mut gaps = vec![Vec::new()];
    for t in tokenize_java(src).tokens {
        if t.kind.is_code() {
            code.push(t);
            gaps.push(Vec::new());
        } else {
            gaps.last_mut().unwrap().push(t);
        }
    }
    Split { code, gaps }
}

fn spaces(rng: &mut ChaCha8Rng) -> String {
    (0..rng.gen_range(1..=4)).map(|_| if rng.gen_bool(0.8) { ' ' } else { '\t' }).collect()
}

fn word(rng: &mut ChaCha8Rng) -> String {
    (0..rng.gen_range(1..=6)).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
}

/// Rewrites one inter-token gap: whitespace widths change, block comments may
/// appear, a line comment may close a line, and at layout-neutral boundaries a
/// line break may be added or removed. Blank lines are left alone.
fn mutate_gap(gap: &[Token], neutral: bool, interior: bool, rng: &mut ChaCha8Rng) -> String {
    let newlines = gap.iter().filter(|t| t.kind == TokenKind::Newline).count();
    let has_comment = gap.iter().any(|t| t.kind == TokenKind::Comment);
    if interior && neutral && !has_comment && newlines <= 1 && rng.gen_bool(0.15) {
        return if newlines == 0 { format!("\n{}", spaces(rng)) } else { spaces(rng) };
    }
    let mut out = String::new();
    for t in gap {
        match t.kind {
            TokenKind::Whitespace => out.push_str(&spaces(rng)),
            TokenKind::Newline => {
                // only the first break in a gap ends a line that holds code
                if interior && !out.contains('\n') && rng.gen_bool(0.2) {
                    out.push_str(&format!(" // {}", word(rng)));
                }
                out.push_str(&t.text);
            }
            _ => out.push_str(&t.text),
        }
    }
    if interior && rng.gen_bool(0.2) {
        out.push_str(&format!(" /* {} */ ", word(rng)));
    } else if interior && gap.is_empty() && rng.gen_bool(0.3) {
        out.push_str(&spaces(rng));
    }
    out
}

/// A copy of `src` that differs only in comments, whitespace and line breaks.
pub fn layout_mutant(src: &str, rng: &mut ChaCha8Rng) -> String {
    rewrite(src, rng, false)
}

/// A layout mutant whose identifiers and literal values are also replaced.
pub fn rename_mutant(src: &str, rng: &mut ChaCha8Rng) -> String {
    rewrite(src, rng, true)
}

fn rewrite(src: &str, rng: &mut ChaCha8Rng, rename: bool) -> String {
    let s = split(src);
    let refs: Vec<&Token> = s.code.iter().collect();
    let neutral = if refs.len() > 1 { layout_neutral_boundaries(&refs) } else { Vec::new() };
    let mut out = String::new();
    for (i, gap) in s.gaps.iter().enumerate() {
        let interior = i > 0 && i < s.code.len();
        let is_neutral = interior && neutral[i - 1];
        out.push_str(&mutate_gap(gap, is_neutral, interior, rng));
        if let Some(t) = s.code.get(i) {
            if rename {
                out.push_str(&replacement(t, rng));
            } else {
                out.push_str(&t.text);
            }
        }
    }
    out
}

fn replacement(t: &Token, rng: &mut ChaCha8Rng) -> String {
    match t.kind {
        TokenKind::Identifier => loop {
            let w = format!("{}{}", word(rng), rng.gen_range(0..100));
            if !is_keyword(&w) {
                return w;
            }
        },
        TokenKind::StringLiteral => format!("\"{}\"", word(rng)),
        TokenKind::CharLiteral => format!("'{}'", rng.gen_range(b'a'..=b'z') as char),
        TokenKind::NumberLiteral => rng.gen_range(0..100_000).to_string(),
        _ => t.text.clone(),
    }
}
