//! Scenario files: JSON lines, JSON arrays and CSV, mapped onto [`Scenario`]
//! through a [`SchemaMap`].
//!
//! Field paths are dotted. A numeric segment indexes an array and a
//! `name[key=value]` segment picks the first array element whose `key`
//! (itself a dotted path) equals `value`, case-insensitively:
//!
//! ```text
//! scenario.kbs[personal.Role=seller].personal.Target
//! ```
//!
//! CSV columns are addressed by header name; paths do not apply there.

use std::fs;
use std::path::Path;

use parley_core::{Price, Scenario, ScenarioError};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read scenario file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("scenario file {path} is not a JSON array: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("scenario file {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("schema map field `{field}` cannot be resolved: {reason}")]
    Unmappable { field: &'static str, reason: String },
}

/// Where each [`Scenario`] field lives in a source record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaMap {
    /// Falls back to the 1-based record number when unset.
    #[serde(default)]
    pub id: Option<String>,
    pub title: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub category: Option<String>,
    pub listing_price: String,
    pub buyer_target: String,
    pub seller_target: String,
}

impl Default for SchemaMap {
    /// Flat records whose keys are the field names themselves.
    fn default() -> Self {
        SchemaMap {
            id: Some("id".into()),
            title: "title".into(),
            description: Some("description".into()),
            category: Some("category".into()),
            listing_price: "listing_price".into(),
            buyer_target: "buyer_target".into(),
            seller_target: "seller_target".into(),
        }
    }
}

impl SchemaMap {
    /// Records in the Craigslist Bargaining JSON layout.
    pub fn craigslist() -> Self {
        let kb = |role: &str, rest: &str| format!("scenario.kbs[personal.Role={role}].{rest}");
        SchemaMap {
            id: Some("uuid".into()),
            title: kb("seller", "item.Title"),
            description: Some(kb("seller", "item.Description")),
            category: Some("scenario.category".into()),
            listing_price: kb("seller", "item.Price"),
            buyer_target: kb("buyer", "personal.Target"),
            seller_target: kb("seller", "personal.Target"),
        }
    }

    fn paths(&self) -> [(&'static str, Option<&str>); 7] {
        [
            ("id", self.id.as_deref()),
            ("title", Some(&self.title)),
            ("description", self.description.as_deref()),
            ("category", self.category.as_deref()),
            ("listing_price", Some(&self.listing_price)),
            ("buyer_target", Some(&self.buyer_target)),
            ("seller_target", Some(&self.seller_target)),
        ]
    }

    /// Checks that every path parses.
    pub fn validate(&self) -> Result<(), LoadError> {
        for (field, path) in self.paths() {
            if let Some(path) = path {
                parse_path(path).map_err(|reason| LoadError::Unmappable { field, reason })?;
            }
        }
        Ok(())
    }
}

/// A record that did not become a scenario.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RecordIssue {
    /// 1-based position in the file (data rows for CSV).
    pub record: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub scenarios: Vec<Scenario>,
    /// Records that failed validation.
    pub rejected: Vec<RecordIssue>,
    /// Valid records skipped with a warning (targets not ordered).
    pub skipped: Vec<RecordIssue>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Key(String),
    Index(usize),
    Filter { key: String, path: Vec<Segment>, value: String },
}

fn parse_path(path: &str) -> Result<Vec<Segment>, String> {
    let mut segments = Vec::new();
    let mut rest = path.trim();
    if rest.is_empty() {
        return Err("empty path".into());
    }
    while !rest.is_empty() {
        let end = match (rest.find('.'), rest.find('[')) {
            (Some(dot), Some(br)) if br < dot => {
                let close = rest[br..].find(']').ok_or_else(|| format!("unclosed `[` in `{path}`"))? + br;
                close + 1
            }
            (Some(dot), _) => dot,
            (None, Some(br)) => {
                let close = rest[br..].find(']').ok_or_else(|| format!("unclosed `[` in `{path}`"))? + br;
                close + 1
            }
            (None, None) => rest.len(),
        };
        let segment = &rest[..end];
        rest = rest[end..].strip_prefix('.').unwrap_or(&rest[end..]);
        if segment.is_empty() {
            return Err(format!("empty segment in `{path}`"));
        }
        if let Some(open) = segment.find('[') {
            let key = &segment[..open];
            let inner = &segment[open + 1..segment.len() - 1];
            let (sub, value) = inner
                .split_once('=')
                .ok_or_else(|| format!("filter `[{inner}]` needs `key=value`"))?;
            if key.is_empty() {
                return Err(format!("filter without an array name in `{path}`"));
            }
            segments.push(Segment::Filter {
                key: key.into(),
                path: parse_path(sub)?,
                value: value.trim().into(),
            });
        } else if let Ok(i) = segment.parse() {
            segments.push(Segment::Index(i));
        } else {
            segments.push(Segment::Key(segment.into()));
        }
    }
    Ok(segments)
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn resolve<'a>(value: &'a Value, path: &[Segment]) -> Option<&'a Value> {
    let mut current = value;
    for segment in path {
        current = match segment {
            Segment::Key(k) => current.get(k.as_str())?,
            Segment::Index(i) => current.get(*i)?,
            Segment::Filter { key, path, value } => current
                .get(key.as_str())?
                .as_array()?
                .iter()
                .find(|item| {
                    resolve(item, path)
                        .and_then(scalar_text)
                        .is_some_and(|s| s.trim().eq_ignore_ascii_case(value))
                })?,
        };
    }
    Some(current)
}

/// Flattens a record into one text or price cell per field.
trait Record {
    fn text(&self, path: &str) -> Result<Option<String>, String>;
    fn price(&self, path: &str) -> Result<Option<Price>, String>;
}

impl Record for Value {
    fn text(&self, path: &str) -> Result<Option<String>, String> {
        let segments = parse_path(path)?;
        Ok(match resolve(self, &segments) {
            None | Some(Value::Null) => None,
            Some(Value::Array(items)) => Some(
                items
                    .iter()
                    .filter_map(scalar_text)
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect::<Vec<_>>()
                    .join(" "),
            ),
            Some(v) => scalar_text(v),
        })
    }

    fn price(&self, path: &str) -> Result<Option<Price>, String> {
        let segments = parse_path(path)?;
        match resolve(self, &segments) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Number(n)) => n
                .as_f64()
                .and_then(Price::from_f64)
                .map(Some)
                .ok_or_else(|| format!("`{path}` is out of range: {n}")),
            Some(Value::String(s)) => s
                .parse()
                .map(Some)
                .map_err(|_| format!("`{path}` is not a price: {s:?}")),
            Some(other) => Err(format!("`{path}` is not a price: {other}")),
        }
    }
}

struct CsvRecord<'a> {
    headers: &'a csv::StringRecord,
    row: &'a csv::StringRecord,
}

impl CsvRecord<'_> {
    fn cell(&self, column: &str) -> Option<&str> {
        let i = self.headers.iter().position(|h| h.trim() == column)?;
        self.row.get(i)
    }
}

impl Record for CsvRecord<'_> {
    fn text(&self, column: &str) -> Result<Option<String>, String> {
        Ok(self.cell(column).map(|s| s.trim().to_string()))
    }

    fn price(&self, column: &str) -> Result<Option<Price>, String> {
        match self.cell(column).map(str::trim) {
            None | Some("") => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| format!("`{column}` is not a price: {s:?}")),
        }
    }
}

enum Verdict {
    Keep(Scenario),
    Skip(RecordIssue),
    Reject(RecordIssue),
}

fn convert(record: &dyn Record, schema: &SchemaMap, number: usize) -> Verdict {
    let id = match &schema.id {
        Some(path) => record.text(path).ok().flatten().filter(|s| !s.is_empty()),
        None => Some(number.to_string()),
    };
    let issue = |reason: String| RecordIssue {
        record: number,
        id: id.clone(),
        reason,
    };
    let build = || -> Result<Scenario, String> {
        let Some(id) = id.clone() else {
            return Err("missing id".into());
        };
        let required_text = |field: &str, path: &str| {
            record
                .text(path)?
                .ok_or_else(|| format!("missing {field} (`{path}`)"))
        };
        let optional_text = |field: &str, path: &Option<String>| match path {
            Some(path) => required_text(field, path),
            None => Ok(String::new()),
        };
        let price = |field: &str, path: &str| {
            record
                .price(path)?
                .ok_or_else(|| format!("missing {field} (`{path}`)"))
        };
        Ok(Scenario {
            id,
            title: required_text("title", &schema.title)?,
            description: optional_text("description", &schema.description)?,
            category: optional_text("category", &schema.category)?,
            listing_price: price("listing_price", &schema.listing_price)?,
            buyer_target: price("buyer_target", &schema.buyer_target)?,
            seller_target: price("seller_target", &schema.seller_target)?,
        })
    };
    match build() {
        Err(reason) => Verdict::Reject(issue(reason)),
        Ok(scenario) => match scenario.validate() {
            Ok(()) => Verdict::Keep(scenario),
            Err(err @ ScenarioError::TargetsNotOrdered { .. }) => Verdict::Skip(issue(err.to_string())),
            Err(err) => Verdict::Reject(issue(err.to_string())),
        },
    }
}

impl LoadReport {
    fn push(&mut self, verdict: Verdict) {
        match verdict {
            Verdict::Keep(s) if self.scenarios.iter().any(|k| k.id == s.id) => {
                let issue = RecordIssue {
                    record: self.scenarios.len() + self.rejected.len() + self.skipped.len() + 1,
                    id: Some(s.id.clone()),
                    reason: "duplicate id".into(),
                };
                tracing::warn!(record = issue.record, id = ?issue.id, "rejecting scenario: duplicate id");
                self.rejected.push(issue);
            }
            Verdict::Keep(s) => self.scenarios.push(s),
            Verdict::Skip(issue) => {
                tracing::warn!(record = issue.record, id = ?issue.id, "skipping scenario: {}", issue.reason);
                self.skipped.push(issue);
            }
            Verdict::Reject(issue) => {
                tracing::warn!(record = issue.record, id = ?issue.id, "rejecting scenario: {}", issue.reason);
                self.rejected.push(issue);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    JsonLines,
    JsonArray,
}

fn detect(path: &Path, text: &str) -> Format {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("csv") => Format::Csv,
        Some("json") if text.trim_start().starts_with('[') => Format::JsonArray,
        _ => Format::JsonLines,
    }
}

/// Reads every record of `path`, keeping valid scenarios and reporting the
/// rest with reasons.
pub fn load_scenarios(path: &Path, schema: &SchemaMap) -> Result<LoadReport, LoadError> {
    schema.validate()?;
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: display.clone(),
        source,
    })?;
    let mut report = LoadReport::default();
    match detect(path, &text) {
        Format::JsonArray => {
            let records: Vec<Value> = serde_json::from_str(&text).map_err(|source| LoadError::Json {
                path: display,
                source,
            })?;
            for (i, record) in records.iter().enumerate() {
                report.push(convert(record, schema, i + 1));
            }
        }
        Format::JsonLines => {
            let lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
            for (number, (_, line)) in lines.enumerate().map(|(n, l)| (n + 1, l)) {
                match serde_json::from_str::<Value>(line) {
                    Ok(record) => report.push(convert(&record, schema, number)),
                    Err(err) => report.push(Verdict::Reject(RecordIssue {
                        record: number,
                        id: None,
                        reason: format!("invalid JSON: {err}"),
                    })),
                }
            }
        }
        Format::Csv => {
            let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
            let headers = reader
                .headers()
                .map_err(|source| LoadError::Csv {
                    path: display.clone(),
                    source,
                })?
                .clone();
            for (field, column) in schema.paths() {
                if let Some(column) = column {
                    if !headers.iter().any(|h| h.trim() == column) {
                        return Err(LoadError::Unmappable {
                            field,
                            reason: format!("no column `{column}` in {display}"),
                        });
                    }
                }
            }
            for (i, row) in reader.records().enumerate() {
                let row = row.map_err(|source| LoadError::Csv {
                    path: display.clone(),
                    source,
                })?;
                let record = CsvRecord { headers: &headers, row: &row };
                report.push(convert(&record, schema, i + 1));
            }
        }
    }
    Ok(report)
}
