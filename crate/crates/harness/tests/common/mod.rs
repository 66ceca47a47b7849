//! Temp-dir fixtures shared by the integration tests.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use parley_harness::config::SweepConfig;
use serde_json::json;
use tempfile::TempDir;

/// Flat scenario records: `(id, listing, buyer target, seller target)` in
/// dollars. The last one has inverted targets and is skipped on load.
pub const SCENARIOS: [(&str, i64, i64, i64); 7] = [
    ("bike", 100, 50, 100),
    ("lamp", 60, 44, 46),
    ("desk", 200, 120, 180),
    ("sofa", 450, 400, 410),
    ("tv", 300, 200, 210),
    ("chair", 80, 30, 60),
    ("rug", 90, 95, 70),
];

pub fn scenario_jsonl(records: &[(&str, i64, i64, i64)]) -> String {
    records
        .iter()
        .map(|&(id, listing, buyer, seller)| {
            json!({
                "id": id,
                "title": format!("Used {id}"),
                "description": format!("A {id} in fair condition"),
                "category": "misc",
                "listing_price": listing,
                "buyer_target": buyer,
                "seller_target": seller,
            })
            .to_string()
                + "\n"
        })
        .collect()
}

/// Two buyers by two sellers over four sampled scenarios, all scripted.
pub const TWO_BY_TWO: &str = r#"
parallel = 3
output = "out"

[scenarios]
path = "scenarios.jsonl"
sample = 4
seed = 11

[backends.linear]
kind = "scripted"
policy = "linear_concession"

[backends.linear-high]
kind = "scripted"
policy = "linear_concession"
opening_fraction = 1.0

[backends.stubborn]
kind = "scripted"
policy = "stubborn"
opening_fraction = 1.0

[[buyers]]
name = "buyer"
backend = "linear"

[[buyers]]
name = "buyer-cot"
backend = "linear"
cot = true
personality = "aggressive"

[[sellers]]
name = "seller"
backend = "linear-high"

[[sellers]]
name = "holdout"
backend = "stubborn"
"#;

pub struct Fixture {
    pub dir: TempDir,
}

impl Fixture {
    pub fn new(config: &str, scenarios: &str) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("sweep.toml"), config).unwrap();
        fs::write(dir.path().join("scenarios.jsonl"), scenarios).unwrap();
        Fixture { dir }
    }

    pub fn two_by_two() -> Fixture {
        Fixture::new(TWO_BY_TWO, &scenario_jsonl(&SCENARIOS))
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn config_path(&self) -> PathBuf {
        self.path().join("sweep.toml")
    }

    pub fn config(&self) -> SweepConfig {
        SweepConfig::load(&self.config_path()).unwrap()
    }

    pub fn out(&self) -> PathBuf {
        self.path().join("out")
    }
}
