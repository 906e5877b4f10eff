#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use wqscreen::records::{encode, FeatureMatrix, Labels};
use wqscreen::synth::{generate, SynthConfig};
use wqscreen::trees::LearnerConfig;

pub fn dataset(config: &SynthConfig) -> (FeatureMatrix, Labels) {
    let (records, _) = generate(config).unwrap();
    encode(&records).unwrap()
}

pub fn small(n_rows: usize, seed: u64) -> (FeatureMatrix, Labels) {
    dataset(&SynthConfig { n_rows, seed, ..SynthConfig::default() })
}

/// A cheaper boosting configuration for tests that only exercise plumbing.
pub fn quick(mut config: LearnerConfig) -> LearnerConfig {
    config.iteration_cap = 60;
    config.early_stopping_rounds = 10;
    config.learning_rate = 0.1;
    config
}

/// Run the binary inside `dir`; returns the exit code.
pub fn run_cli(dir: &Path, args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_wqscreen"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    out.status.code().expect("exited normally")
}

/// synth, train, evaluate, compare and explain on a small fixture, all with
/// paths relative to `dir`.
pub fn end_to_end(dir: &Path, n_rows: usize, seed: u64) {
    std::fs::write(dir.join("synth.json"), format!("{{\"n_rows\":{n_rows}}}")).unwrap();
    std::fs::write(
        dir.join("pipeline.json"),
        r#"{"stage1":{"iteration_cap":60,"early_stopping_rounds":10,"learning_rate":0.1},
            "stage2":{"growth":"depthwise","iteration_cap":60,"early_stopping_rounds":10,"learning_rate":0.1}}"#,
    )
    .unwrap();
    std::fs::write(dir.join("compare.json"), r#"{"n_boot":200}"#).unwrap();
    let seed = seed.to_string();
    let steps: [&[&str]; 5] = [
        &["synth", "--config", "synth.json", "--seed", &seed, "--out", "fixture.csv"],
        &["train", "--records", "fixture.csv", "--config", "pipeline.json", "--seed", &seed, "--out", "train"],
        &["evaluate", "--report", "train/cv_report.json", "--out", "evaluate"],
        &[
            "compare", "--reference", "train/cv_report_baseline.json", "--challenger", "train/cv_report.json",
            "--config", "compare.json", "--seed", &seed, "--out", "compare",
        ],
        &["explain", "--model", "train/model.json", "--records", "fixture.csv", "--out", "explain"],
    ];
    for args in steps {
        assert_eq!(run_cli(dir, args), 0, "{args:?}");
    }
}

/// Every file under `dir` keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, into: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, into);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                into.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut files = BTreeMap::new();
    walk(dir, dir, &mut files);
    files
}
