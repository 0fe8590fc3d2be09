#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bandbatch_core::{save_embeddings, EmbeddingFormat, EmbeddingPair};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bandbatch"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn bandbatch")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Runs and insists on exit 0, returning stdout.
pub fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
    stdout(&o)
}

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

/// Writes `x.emb` and `y.emb` into `dir`.
pub fn write_pair(dir: &Path, pair: &EmbeddingPair) -> (String, String) {
    let x = dir.join("x.emb");
    let y = dir.join("y.emb");
    save_embeddings(pair.x(), &x, EmbeddingFormat::Emb1).unwrap();
    save_embeddings(pair.y(), &y, EmbeddingFormat::Emb1).unwrap();
    (x.display().to_string(), y.display().to_string())
}

pub fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text.trim()).expect("valid JSON")
}

pub const REPORT_KEYS: [&str; 12] = [
    "n",
    "k",
    "tau",
    "global_loss",
    "train_loss",
    "gap",
    "ub_gap_translation",
    "ub_gap_standard",
    "qbap_value",
    "qap_value",
    "strategy",
    "quantile",
];

/// Keys present and in the documented order.
pub fn check_report_schema(line: &str) {
    let mut at = 0;
    for key in REPORT_KEYS {
        let needle = format!("\"{key}\":");
        let found = line[at..]
            .find(&needle)
            .unwrap_or_else(|| panic!("{key} missing or out of order"));
        at += found + needle.len();
    }
    assert_eq!(json(line).as_object().unwrap().len(), REPORT_KEYS.len());
}
