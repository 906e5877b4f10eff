use std::fs::File;

use wqscreen::qc::{evaluate_batch, BatchConfig, Category, QcVerdict, UuidRegistry};
use wqscreen::records::{parse_records, ColumnSchema, PlausibilityBounds};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/qc_golden.csv");
const EXPECTED: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/qc_golden_expected.jsonl");

#[test]
fn golden_fixture_produces_the_expected_verdicts() {
    let parsed = parse_records(File::open(FIXTURE).unwrap(), &ColumnSchema::default()).unwrap();
    assert_eq!(parsed.records.len(), 12);
    let (verdicts, flags) = evaluate_batch(
        &parsed.records,
        &BatchConfig::default(),
        &PlausibilityBounds::default(),
        &mut UuidRegistry::new(),
    );
    let expected: Vec<QcVerdict> = std::fs::read_to_string(EXPECTED)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(verdicts, expected);
    assert_eq!(flags.category_counts[&Category::Ok], 1);
    assert_eq!(flags.rule_counts["BATCH_FILLING"], 6);
    assert!(flags.any_alert());
}
