//! Result rows (CSV) and run transcripts (JSON lines).

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use parley_core::metrics::RunMetrics;
use parley_core::runner::RunFailure;
use parley_core::{AgentProfile, NegotiationRun, Outcome, Personality, Price, Scenario, Turn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::Exchange;

/// Version tag of the CSV column set and the transcript layout.
pub const SCHEMA_VERSION: &str = "parley-results/1";

/// CSV header, in column order.
pub const COLUMNS: [&str; 28] = [
    "run_id",
    "scenario_id",
    "buyer_name",
    "buyer_model",
    "buyer_personality",
    "buyer_cot",
    "seller_name",
    "seller_model",
    "seller_personality",
    "seller_cot",
    "outcome",
    "agreed_price",
    "dialogue_length",
    "accepted",
    "fairness",
    "aggressiveness",
    "bias",
    "bias_cond_length",
    "concession_rate",
    "buyer_concession_rate",
    "seller_concession_rate",
    "relative_efficiency",
    "probing_ratio",
    "listing_price",
    "buyer_target",
    "seller_target",
    "failure",
    "transcript",
];

#[derive(Debug, Error)]
pub enum ResultsError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: unexpected CSV header, expected the {SCHEMA_VERSION} columns")]
    Header { path: String },
    #[error("{path}:{line}: {source}")]
    Json {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
}

/// One CSV row per run. Metric cells are empty where undefined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub scenario_id: String,
    pub buyer_name: String,
    pub buyer_model: String,
    pub buyer_personality: Personality,
    pub buyer_cot: bool,
    pub seller_name: String,
    pub seller_model: String,
    pub seller_personality: Personality,
    pub seller_cot: bool,
    pub outcome: Outcome,
    pub agreed_price: Option<Price>,
    pub dialogue_length: u32,
    pub accepted: bool,
    pub fairness: Option<f64>,
    pub aggressiveness: Option<f64>,
    pub bias: Option<f64>,
    pub bias_cond_length: Option<f64>,
    pub concession_rate: Option<f64>,
    pub buyer_concession_rate: Option<f64>,
    pub seller_concession_rate: Option<f64>,
    pub relative_efficiency: Option<f64>,
    pub probing_ratio: Option<f64>,
    pub listing_price: Price,
    pub buyer_target: Price,
    pub seller_target: Price,
    pub failure: Option<String>,
    /// Transcript file, relative to the results directory.
    pub transcript: String,
}

pub fn run_id(combination: &str, scenario_id: &str) -> String {
    format!("{combination}/{scenario_id}")
}

impl ResultRow {
    pub fn from_run(run_id: String, run: &NegotiationRun, transcript: String) -> ResultRow {
        let metrics = RunMetrics::compute(run).ok();
        let m = |f: fn(&RunMetrics) -> Option<f64>| metrics.as_ref().and_then(f);
        let failure = run
            .failure
            .as_ref()
            .map(|f| format!("turn {}: {}: {}", f.turn, f.kind, f.message))
            .or_else(|| run.diagnostic.clone());
        ResultRow {
            run_id,
            scenario_id: run.scenario.id.clone(),
            buyer_name: run.buyer.name.clone(),
            buyer_model: run.buyer.model_ref.clone(),
            buyer_personality: run.buyer.personality,
            buyer_cot: run.buyer.cot,
            seller_name: run.seller.name.clone(),
            seller_model: run.seller.model_ref.clone(),
            seller_personality: run.seller.personality,
            seller_cot: run.seller.cot,
            outcome: run.outcome,
            agreed_price: run.agreed_price,
            dialogue_length: run.turns.len() as u32,
            accepted: run.is_accepted(),
            fairness: m(|r| r.fairness),
            aggressiveness: m(|r| r.aggressiveness),
            bias: m(|r| r.bias),
            bias_cond_length: m(|r| r.bias_cond_length),
            concession_rate: m(|r| Some(r.concession_rate)),
            buyer_concession_rate: m(|r| Some(r.buyer_concession_rate)),
            seller_concession_rate: m(|r| Some(r.seller_concession_rate)),
            relative_efficiency: m(|r| r.relative_efficiency),
            probing_ratio: m(|r| Some(r.probing_ratio)),
            listing_price: run.scenario.listing_price,
            buyer_target: run.scenario.buyer_target,
            seller_target: run.scenario.seller_target,
            failure,
            transcript,
        }
    }

    pub fn combination(&self) -> String {
        crate::config::combination_id(&self.buyer_name, &self.seller_name)
    }

    /// Either side runs with chain-of-thought.
    pub fn uses_cot(&self) -> bool {
        self.buyer_cot || self.seller_cot
    }

    /// Per-run metrics, or `None` for runs that never produced a turn.
    pub fn metrics(&self) -> Option<RunMetrics> {
        if self.dialogue_length == 0 {
            return None;
        }
        Some(RunMetrics {
            accepted: self.accepted,
            dialogue_length: self.dialogue_length,
            fairness: self.fairness,
            aggressiveness: self.aggressiveness,
            bias: self.bias,
            bias_cond_length: self.bias_cond_length,
            concession_rate: self.concession_rate.unwrap_or(0.0),
            buyer_concession_rate: self.buyer_concession_rate.unwrap_or(0.0),
            seller_concession_rate: self.seller_concession_rate.unwrap_or(0.0),
            relative_efficiency: self.relative_efficiency,
            probing_ratio: self.probing_ratio.unwrap_or(0.0),
        })
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<(), csv::Error> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(COLUMNS)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn render_csv(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("writing CSV to memory");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

pub fn parse_csv<R: io::Read>(input: R) -> Result<Vec<ResultRow>, csv::Error> {
    let mut reader = csv::Reader::from_reader(input);
    reader.deserialize().collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>, ResultsError> {
    let shown = path.display().to_string();
    let file = File::open(path).map_err(|source| ResultsError::Io {
        path: shown.clone(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers().map_err(|source| ResultsError::Csv {
        path: shown.clone(),
        source,
    })?;
    if !headers.iter().eq(COLUMNS) {
        return Err(ResultsError::Header { path: shown });
    }
    reader
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|source| ResultsError::Csv { path: shown, source })
}

/// One line of a transcript file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub run_id: String,
    pub scenario: Scenario,
    pub buyer: AgentProfile,
    pub seller: AgentProfile,
    pub turns: Vec<Turn>,
    pub outcome: Outcome,
    pub agreed_price: Option<Price>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<RunFailure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    /// Wall-clock start, milliseconds since the Unix epoch.
    pub started_at_ms: u64,
    pub elapsed_ms: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exchanges: Vec<Exchange>,
}

impl TranscriptRecord {
    pub fn new(run_id: String, run: NegotiationRun, started_at_ms: u64, elapsed_ms: u64, exchanges: Vec<Exchange>) -> Self {
        TranscriptRecord {
            run_id,
            scenario: run.scenario,
            buyer: run.buyer,
            seller: run.seller,
            turns: run.turns,
            outcome: run.outcome,
            agreed_price: run.agreed_price,
            failure: run.failure,
            diagnostic: run.diagnostic,
            started_at_ms,
            elapsed_ms,
            exchanges,
        }
    }

    pub fn run(&self) -> NegotiationRun {
        NegotiationRun {
            scenario: self.scenario.clone(),
            buyer: self.buyer.clone(),
            seller: self.seller.clone(),
            turns: self.turns.clone(),
            outcome: self.outcome,
            agreed_price: self.agreed_price,
            failure: self.failure.clone(),
            diagnostic: self.diagnostic.clone(),
        }
    }
}

/// Reads a transcript file. Truncated lines (from an interrupted write,
/// which a resumed sweep leaves mid-file) are dropped; any other malformed
/// line is an error.
pub fn read_transcripts(path: &Path) -> Result<Vec<TranscriptRecord>, ResultsError> {
    let shown = path.display().to_string();
    let file = File::open(path).map_err(|source| ResultsError::Io {
        path: shown.clone(),
        source,
    })?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|source| ResultsError::Io {
            path: shown.clone(),
            source,
        })?;
    let mut records = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => records.push(r),
            Err(source) if source.is_eof() => {
                tracing::warn!("{}: dropping truncated line {}", shown, i + 1);
            }
            Err(source) => {
                return Err(ResultsError::Json {
                    path: shown,
                    line: i + 1,
                    source,
                })
            }
        }
    }
    Ok(records)
}
