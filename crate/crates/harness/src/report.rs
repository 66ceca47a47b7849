//! Aggregate reports over a results directory.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use parley_core::metrics::{aggregate, AggregateMetrics, Mean};
use parley_core::DialogueAct;
use serde::Serialize;

use crate::results::{read_csv, read_transcripts, ResultRow, ResultsError, TranscriptRecord};
use crate::sweep::RESULTS_FILE;

/// Rows grouped by combination, in order of first appearance.
fn group(rows: &[ResultRow]) -> Vec<(String, Vec<&ResultRow>)> {
    let mut order: Vec<(String, Vec<&ResultRow>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for row in rows {
        let key = row.combination();
        let i = *index.entry(key.clone()).or_insert_with(|| {
            order.push((key, Vec::new()));
            order.len() - 1
        });
        order[i].1.push(row);
    }
    order
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgreementCell {
    pub combination: String,
    pub buyer: String,
    pub seller: String,
    pub runs: usize,
    pub accepted: usize,
    pub agreement_rate: f64,
    /// Runs that failed before the first turn; not counted in `runs`.
    pub empty_runs: usize,
}

/// Agreement rate per combination: accepted runs over runs with at least
/// one turn.
pub fn agreement_matrix(rows: &[ResultRow]) -> Vec<AgreementCell> {
    group(rows)
        .into_iter()
        .filter_map(|(combination, rows)| {
            let counted: Vec<_> = rows.iter().filter(|r| r.dialogue_length > 0).collect();
            let accepted = counted.iter().filter(|r| r.accepted).count();
            (!counted.is_empty()).then(|| AgreementCell {
                buyer: rows[0].buyer_name.clone(),
                seller: rows[0].seller_name.clone(),
                combination,
                runs: counted.len(),
                accepted,
                agreement_rate: accepted as f64 / counted.len() as f64,
                empty_runs: rows.len() - counted.len(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CombinationSummary {
    pub combination: String,
    pub buyer: String,
    pub seller: String,
    pub cot: bool,
    pub metrics: AggregateMetrics,
}

pub fn combination_summaries(rows: &[ResultRow]) -> Vec<CombinationSummary> {
    group(rows)
        .into_iter()
        .filter_map(|(combination, rows)| {
            let metrics: Vec<_> = rows.iter().filter_map(|r| r.metrics()).collect();
            let metrics = aggregate(&metrics).ok()?;
            Some(CombinationSummary {
                buyer: rows[0].buyer_name.clone(),
                seller: rows[0].seller_name.clone(),
                cot: rows[0].uses_cot(),
                combination,
                metrics,
            })
        })
        .collect()
}

/// Means of per-combination means for one side of the CoT split.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CotColumn {
    pub combinations: usize,
    pub runs: usize,
    pub aggressiveness: Option<f64>,
    pub bias: Option<f64>,
    pub dialogue_length: Option<f64>,
    pub fairness: Option<f64>,
    pub concession_rate: Option<f64>,
    pub probing_ratio: Option<f64>,
    pub relative_efficiency: Option<f64>,
}

/// A combination counts as CoT when either agent uses it. A side with no
/// combinations is `None` rather than zeros.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CotComparison {
    pub with_cot: Option<CotColumn>,
    pub without_cot: Option<CotColumn>,
}

fn column(summaries: &[&CombinationSummary]) -> Option<CotColumn> {
    if summaries.is_empty() {
        return None;
    }
    let mean = |f: fn(&AggregateMetrics) -> Option<Mean>| {
        Mean::of(summaries.iter().filter_map(|s| f(&s.metrics)).map(|m| m.value)).map(|m| m.value)
    };
    Some(CotColumn {
        combinations: summaries.len(),
        runs: summaries.iter().map(|s| s.metrics.runs).sum(),
        aggressiveness: mean(|m| m.aggressiveness),
        bias: mean(|m| m.bias),
        dialogue_length: mean(|m| m.dialogue_length),
        fairness: mean(|m| m.fairness),
        concession_rate: mean(|m| m.concession_rate),
        probing_ratio: mean(|m| m.probing_ratio),
        relative_efficiency: mean(|m| m.relative_efficiency),
    })
}

pub fn cot_comparison(rows: &[ResultRow]) -> CotComparison {
    let summaries = combination_summaries(rows);
    let (with, without): (Vec<_>, Vec<_>) = summaries.iter().partition(|s| s.cot);
    CotComparison {
        with_cot: column(&with),
        without_cot: column(&without),
    }
}

type Field = fn(&CotColumn) -> Option<f64>;

impl CotComparison {
    /// `(metric, with CoT, without CoT)` in table order.
    pub fn rows(&self) -> Vec<(&'static str, Option<f64>, Option<f64>)> {
        let pick = |f: Field| {
            (self.with_cot.as_ref().and_then(f), self.without_cot.as_ref().and_then(f))
        };
        let table: [(&'static str, Field); 7] = [
            ("Aggressiveness", |c| c.aggressiveness),
            ("Bias", |c| c.bias),
            ("Dialogue Length", |c| c.dialogue_length),
            ("Fairness", |c| c.fairness),
            ("Concession Rate", |c| c.concession_rate),
            ("Probing Ratio", |c| c.probing_ratio),
            ("Relative Efficiency", |c| c.relative_efficiency),
        ];
        table
            .into_iter()
            .map(|(name, f)| {
                let (a, b) = pick(f);
                (name, a, b)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActCount {
    pub act: DialogueAct,
    pub count: usize,
    pub share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActionDistribution {
    pub combination: String,
    pub runs: usize,
    pub turns: usize,
    /// All eleven acts, in taxonomy order.
    pub acts: Vec<ActCount>,
}

impl ActionDistribution {
    pub fn share(&self, act: DialogueAct) -> f64 {
        self.acts.iter().find(|a| a.act == act).map_or(0.0, |a| a.share)
    }
}

/// Act histogram per combination. Rows whose transcript is missing are
/// skipped and listed in the second return value.
pub fn action_distribution(
    rows: &[ResultRow],
    transcripts: &HashMap<String, TranscriptRecord>,
) -> (Vec<ActionDistribution>, Vec<String>) {
    let mut skipped = Vec::new();
    let mut out = Vec::new();
    for (combination, rows) in group(rows) {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        let (mut runs, mut turns) = (0, 0);
        for row in rows {
            let Some(record) = transcripts.get(&row.run_id) else {
                tracing::warn!(run_id = %row.run_id, "no transcript; skipped in action distribution");
                skipped.push(row.run_id.clone());
                continue;
            };
            runs += 1;
            for turn in &record.turns {
                let i = DialogueAct::ALL.iter().position(|a| *a == turn.act).unwrap_or(0);
                *counts.entry(i).or_default() += 1;
                turns += 1;
            }
        }
        if runs == 0 {
            continue;
        }
        let acts = DialogueAct::ALL
            .iter()
            .enumerate()
            .map(|(i, &act)| {
                let count = counts.get(&i).copied().unwrap_or(0);
                let share = if turns == 0 { 0.0 } else { count as f64 / turns as f64 };
                ActCount { act, count, share }
            })
            .collect();
        out.push(ActionDistribution {
            combination,
            runs,
            turns,
            acts,
        });
    }
    (out, skipped)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PriceProgression {
    pub combination: String,
    pub runs: usize,
    /// Mean extracted price at turn `i + 1`; `None` where no run had one.
    pub mean_price: Vec<Option<f64>>,
}

/// Mean extracted price per turn index and combination.
pub fn price_progression<'a>(records: impl IntoIterator<Item = &'a TranscriptRecord>) -> Vec<PriceProgression> {
    let mut order: Vec<String> = Vec::new();
    let mut sums: HashMap<String, (usize, Vec<(f64, usize)>)> = HashMap::new();
    for record in records {
        let key = crate::config::combination_id(&record.buyer.name, &record.seller.name);
        let entry = sums.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (0, Vec::new())
        });
        entry.0 += 1;
        for turn in &record.turns {
            let i = turn.index.saturating_sub(1) as usize;
            if entry.1.len() <= i {
                entry.1.resize(i + 1, (0.0, 0));
            }
            if let Some(p) = turn.price {
                entry.1[i].0 += p.to_f64();
                entry.1[i].1 += 1;
            }
        }
    }
    order
        .into_iter()
        .map(|combination| {
            let (runs, cells) = sums.remove(&combination).unwrap_or_default();
            let mean_price = cells
                .into_iter()
                .map(|(sum, n)| (n > 0).then(|| sum / n as f64))
                .collect();
            PriceProgression {
                combination,
                runs,
                mean_price,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub agreement: Vec<AgreementCell>,
    pub combinations: Vec<CombinationSummary>,
    pub cot: CotComparison,
    pub actions: Vec<ActionDistribution>,
    pub prices: Vec<PriceProgression>,
    /// Run ids whose transcript could not be found.
    pub missing_transcripts: Vec<String>,
}

/// Loads every transcript the rows reference, keyed by run id. Missing
/// files are logged and left out.
pub fn load_transcripts(dir: &Path, rows: &[ResultRow]) -> Result<HashMap<String, TranscriptRecord>, ResultsError> {
    let mut files: Vec<&str> = rows.iter().map(|r| r.transcript.as_str()).collect();
    files.sort_unstable();
    files.dedup();
    let mut out = HashMap::new();
    for file in files {
        let path = dir.join(file);
        if !path.is_file() {
            tracing::warn!("transcript file {} is missing", path.display());
            continue;
        }
        for record in read_transcripts(&path)? {
            out.entry(record.run_id.clone()).or_insert(record);
        }
    }
    Ok(out)
}

pub fn build_report(rows: &[ResultRow], transcripts: &HashMap<String, TranscriptRecord>) -> Report {
    let (actions, missing_transcripts) = action_distribution(rows, transcripts);
    let records = rows.iter().filter_map(|r| transcripts.get(&r.run_id));
    Report {
        agreement: agreement_matrix(rows),
        combinations: combination_summaries(rows),
        cot: cot_comparison(rows),
        actions,
        prices: price_progression(records),
        missing_transcripts,
    }
}

/// Reads `results.csv` and the transcripts under `dir`.
pub fn report_dir(dir: &Path) -> Result<Report, ResultsError> {
    let rows = read_csv(&dir.join(RESULTS_FILE))?;
    let transcripts = load_transcripts(dir, &rows)?;
    Ok(build_report(&rows, &transcripts))
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn table(out: &mut String, headers: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |out: &mut String, cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(out, &mut headers.iter().copied());
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "{}", rule.join("  "));
    for row in rows {
        line(out, &mut row.iter().map(String::as_str));
    }
    out.push('\n');
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("Agreement rate by combination\n\n");
        let rows: Vec<Vec<String>> = self
            .agreement
            .iter()
            .map(|c| {
                vec![
                    c.combination.clone(),
                    c.runs.to_string(),
                    c.accepted.to_string(),
                    format!("{:.4}", c.agreement_rate),
                ]
            })
            .collect();
        table(&mut out, &["Combination", "Runs", "Accepted", "Agreement"], &rows);

        out.push_str("Metric means by combination\n\n");
        let rows: Vec<Vec<String>> = self
            .combinations
            .iter()
            .map(|s| {
                let m = &s.metrics;
                let v = |x: Option<Mean>| fmt(x.map(|m| m.value));
                vec![
                    s.combination.clone(),
                    if s.cot { "yes".into() } else { "no".into() },
                    v(m.dialogue_length),
                    v(m.fairness),
                    v(m.bias),
                    v(m.aggressiveness),
                    v(m.concession_rate),
                    v(m.probing_ratio),
                    v(m.relative_efficiency),
                ]
            })
            .collect();
        table(
            &mut out,
            &["Combination", "CoT", "Length", "Fairness", "Bias", "Aggr.", "Concession", "Probing", "Rel. eff."],
            &rows,
        );

        out.push_str("Combinations with and without CoT\n\n");
        let rows: Vec<Vec<String>> = self
            .cot
            .rows()
            .into_iter()
            .map(|(name, a, b)| vec![name.to_string(), fmt(a), fmt(b)])
            .collect();
        table(&mut out, &["Metric", "With CoT", "Without CoT"], &rows);

        out.push_str("Action distribution (share of turns)\n\n");
        let mut headers = vec!["Combination"];
        headers.extend(DialogueAct::ALL.iter().map(|a| a.label()));
        let rows: Vec<Vec<String>> = self
            .actions
            .iter()
            .map(|d| {
                let mut row = vec![d.combination.clone()];
                row.extend(d.acts.iter().map(|a| format!("{:.3}", a.share)));
                row
            })
            .collect();
        table(&mut out, &headers, &rows);

        out.push_str("Mean price by turn\n\n");
        let turns = self.prices.iter().map(|p| p.mean_price.len()).max().unwrap_or(0);
        let labels: Vec<String> = (1..=turns).map(|t| t.to_string()).collect();
        let mut headers = vec!["Combination"];
        headers.extend(labels.iter().map(String::as_str));
        let rows: Vec<Vec<String>> = self
            .prices
            .iter()
            .map(|p| {
                let mut row = vec![p.combination.clone()];
                row.extend((0..turns).map(|i| p.mean_price.get(i).copied().flatten().map_or("-".into(), |v| format!("{v:.2}"))));
                row
            })
            .collect();
        table(&mut out, &headers, &rows);

        if !self.missing_transcripts.is_empty() {
            let _ = writeln!(out, "{} run(s) had no transcript and were left out of the action distribution.", self.missing_transcripts.len());
        }
        out
    }
}
