//! The Weka try-block pair: normalization, line diff and similarity.

use clonevet_core::diff::{edit_script, fragment_similarity, Granularity};
use clonevet_core::features::extract_features;
use clonevet_core::normalize::{normalize, NormalizationLevel};
use clonevet_core::{ClonePair, CodeFragment};

// Fragment 1 as reported, with the three trailing blank lines the diff shows.
const FRAGMENT_1: &str = "try {
    if (args.length == 0) {
\tthrow new Exception(
\t    \"The first argument must be the class name of a kernel\");
    }
    String associator = args[0];
    args[0] = \">\";
    System.out.println(evaluate(associator, args));
}



";

const FRAGMENT_2: &str = "try {
    if (args.length == 0) {
\tthrow new Exception(
\t\"The first argument must be the name of a \"
\t+ \"clusterer\");
    }
    args[0] = \"?\";
    Clusterer newClusterer = AbstractClusterer.forName(ClustererString, null);//object from abstract clusterer
    System.out.println(evaluateClusterer(newClusterer, args));
}
";

const EXPECTED_1: [&str; 9] = [
    "try {",
    "if (X.X == 0) {",
    "throw new X(",
    "\"string\");",
    "}",
    "X X = X[0];",
    "X[0] = \"string\";",
    "X.X.X(X(X, X));",
    "}",
];

const EXPECTED_2: [&str; 10] = [
    "try {",
    "if (X.X == 0) {",
    "throw new X(",
    "\"string\"",
    "+ \"string\");",
    "}",
    "X[0] = \"string\";",
    "X X = X.X(X, null);",
    "X.X.X(X(X, X));",
    "}",
];

fn type2_lines(text: &str) -> Vec<String> {
    normalize(&CodeFragment::java(text), NormalizationLevel::Type2).unwrap().lines
}

#[test]
fn type2_transform_matches_expected_lines() {
    let a = type2_lines(FRAGMENT_1);
    assert_eq!(&a[..9], EXPECTED_1);
    assert_eq!(&a[9..], ["", "", ""]);
    assert_eq!(type2_lines(FRAGMENT_2), EXPECTED_2);
}

#[test]
fn line_diff_reproduces_the_published_hunks() {
    let a = type2_lines(FRAGMENT_1);
    let b = type2_lines(FRAGMENT_2);
    let script = edit_script(&a, &b);
    let hunks: Vec<String> = script.hunks().iter().map(|h| h.to_string()).collect();
    assert_eq!(hunks, ["4c4,5", "6d6", "7a8", "10,12d10"]);
    assert_eq!(script.deletions(), 5);
    assert_eq!(script.insertions(), 3);
    let diff = script.to_normal_diff(&a, &b);
    assert!(diff.starts_with("4c4,5\n< \"string\");\n---\n> \"string\"\n> + \"string\");\n"), "{diff}");
}

#[test]
fn similarity_of_the_pair() {
    let f1 = normalize(&CodeFragment::java(FRAGMENT_1), NormalizationLevel::Type2).unwrap();
    let f2 = normalize(&CodeFragment::java(FRAGMENT_2), NormalizationLevel::Type2).unwrap();
    let s = fragment_similarity(&f1, &f2, Granularity::Line).unwrap();
    assert_eq!((s.deletions, s.insertions, s.len1, s.len2), (5, 3, 12, 10));
    assert!((s.value - (1.0 - 5.0 / 12.0)).abs() < 1e-12);
    assert!((s.value - 0.583333).abs() < 1e-6);
}

#[test]
fn feature_vector_of_the_pair() {
    let pair = ClonePair::new("weka", CodeFragment::java(FRAGMENT_1), CodeFragment::java(FRAGMENT_2));
    let f = extract_features(&pair, true).unwrap();
    assert_eq!(f.len(), 10);
    assert!((f.get("lineSimT2").unwrap() - 7.0 / 12.0).abs() < 1e-12);
    for v in &f.values[..6] {
        assert!((0.0..=1.0).contains(v));
    }
    // Type1 keeps identifiers, so it can only be less similar than Type2.
    assert!(f.get("lineSimT1").unwrap() <= f.get("lineSimT2").unwrap());
    assert_eq!(f.get("functionsIntersected"), Some(0.0));
    assert_eq!(f.get("unmatchedBraces"), Some(0.0));
    assert_eq!(f.get("avgSize"), Some(11.0));
    assert_eq!(f.get("sizeDiff"), Some(2.0));
}
