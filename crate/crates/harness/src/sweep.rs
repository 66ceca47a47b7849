//! Sweeps over combinations × scenarios.
//!
//! Layout of a results directory:
//!
//! ```text
//! metadata.json            sweep plan, decoding parameters, schema version
//! manifest.jsonl           one line per finished run (the resume record)
//! results.csv              final rows, canonical order
//! transcripts/<combo>.jsonl
//! ```
//!
//! Workers run negotiations; a single writer appends each finished run to
//! its transcript file and then to the manifest. When all cells are done the
//! CSV and transcript files are rewritten in canonical order (combination
//! order, then scenario sample order) with duplicates removed, so repeated
//! scripted sweeps produce identical bytes.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use parley_core::corpus::{sample_scenarios, SampleError};
use parley_core::runner::{run_negotiation, RunError};
use parley_core::{Agent, AgentError, RunConfig, Scenario, ScriptedAgent, ScriptedPolicy, TurnRequest};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::backend::{BackendConfigError, Exchange, HttpAgent, HttpBackend};
use crate::config::{combination_id, BackendSpec, Combination, ConfigError, SweepConfig};
use crate::results::{self, ResultRow, ResultsError, TranscriptRecord, SCHEMA_VERSION};
use crate::scenario_io::{load_scenarios, LoadError, LoadReport};

pub const METADATA_FILE: &str = "metadata.json";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const RESULTS_FILE: &str = "results.csv";
pub const TRANSCRIPT_DIR: &str = "transcripts";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("sampling scenarios: {0}")]
    Sample(#[from] SampleError),
    #[error("backend `{name}`: {source}")]
    Backend {
        name: String,
        source: BackendConfigError,
    },
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Results(#[from] ResultsError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("cannot resume: {0}")]
    ResumeMismatch(String),
    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SweepError + '_ {
    move |source| SweepError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A backend ready to hand out agents.
#[derive(Clone)]
pub enum Backend {
    Http(HttpBackend),
    Scripted(ScriptedPolicy),
}

impl Backend {
    pub fn agent(&self) -> RunAgent {
        match self {
            Backend::Http(b) => RunAgent::Http(HttpAgent::new(b.clone())),
            Backend::Scripted(p) => RunAgent::Scripted(ScriptedAgent::new(*p)),
        }
    }
}

pub enum RunAgent {
    Http(HttpAgent),
    Scripted(ScriptedAgent),
}

impl RunAgent {
    fn take_exchanges(&mut self) -> Vec<Exchange> {
        match self {
            RunAgent::Http(a) => a.take_exchanges(),
            RunAgent::Scripted(_) => Vec::new(),
        }
    }
}

impl Agent for RunAgent {
    fn respond(&mut self, request: &TurnRequest<'_>) -> Result<String, AgentError> {
        match self {
            RunAgent::Http(a) => a.respond(request),
            RunAgent::Scripted(a) => a.respond(request),
        }
    }
}

pub fn build_backends(config: &SweepConfig) -> Result<BTreeMap<String, Backend>, SweepError> {
    config
        .backends
        .iter()
        .map(|(name, spec)| {
            let backend = match spec {
                BackendSpec::Openai(c) => Backend::Http(HttpBackend::new(c.clone()).map_err(|source| {
                    SweepError::Backend {
                        name: name.clone(),
                        source,
                    }
                })?),
                BackendSpec::Scripted(s) => Backend::Scripted(s.policy()),
            };
            Ok((name.clone(), backend))
        })
        .collect()
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn transcript_file(combination: &str) -> String {
    format!("{TRANSCRIPT_DIR}/{combination}.jsonl")
}

/// Runs one negotiation and wraps it as a transcript record.
pub fn execute(
    combination: &Combination,
    scenario: &Scenario,
    backends: &BTreeMap<String, Backend>,
    run_config: &RunConfig,
) -> Result<TranscriptRecord, SweepError> {
    let backend = |name: &str| {
        backends.get(name).ok_or_else(|| SweepError::Unknown {
            what: "backend",
            name: name.into(),
        })
    };
    let mut buyer = backend(&combination.buyer.model_ref)?.agent();
    let mut seller = backend(&combination.seller.model_ref)?.agent();
    let started_at = now_ms();
    let clock = Instant::now();
    let run = run_negotiation(
        scenario,
        (&combination.buyer, &mut buyer),
        (&combination.seller, &mut seller),
        run_config,
    )?;
    let elapsed = clock.elapsed().as_millis() as u64;
    let mut exchanges = buyer.take_exchanges();
    exchanges.extend(seller.take_exchanges());
    exchanges.sort_by_key(|e| (e.turn, e.attempt));
    let run_id = results::run_id(&combination.id(), &scenario.id);
    Ok(TranscriptRecord::new(run_id, run, started_at, elapsed, exchanges))
}

/// Everything fixed before the first negotiation starts.
pub struct Plan {
    pub config: SweepConfig,
    pub scenarios: Vec<Scenario>,
    pub load: LoadReport,
    pub combinations: Vec<Combination>,
    pub run_config: RunConfig,
    pub backends: BTreeMap<String, Backend>,
}

impl Plan {
    pub fn new(config: &SweepConfig) -> Result<Plan, SweepError> {
        config.validate()?;
        let mut load = load_scenarios(&config.scenarios.path, &config.scenarios.schema.resolve())?;
        let scenarios = sample_scenarios(&load.scenarios, config.scenarios.sample, config.scenarios.seed)?;
        load.scenarios.clear();
        Ok(Plan {
            config: config.clone(),
            scenarios,
            load,
            combinations: config.combinations(),
            run_config: RunConfig {
                max_turns: config.max_turns,
                prompts: config.prompt_config()?,
            },
            backends: build_backends(config)?,
        })
    }

    fn cells(&self) -> Vec<(usize, usize)> {
        (0..self.combinations.len())
            .flat_map(|c| (0..self.scenarios.len()).map(move |s| (c, s)))
            .collect()
    }

    fn run_id(&self, (c, s): (usize, usize)) -> String {
        results::run_id(&self.combinations[c].id(), &self.scenarios[s].id)
    }

    pub fn metadata(&self) -> Metadata {
        Metadata {
            schema_version: SCHEMA_VERSION.into(),
            generator: format!("parley {}", env!("CARGO_PKG_VERSION")),
            scenario_file: self.config.scenarios.path.display().to_string(),
            seed: self.config.scenarios.seed,
            sample: self.config.scenarios.sample,
            scenario_ids: self.scenarios.iter().map(|s| s.id.clone()).collect(),
            loaded_rejected: self.load.rejected.len(),
            loaded_skipped: self.load.skipped.len(),
            combinations: self.combinations.iter().map(Combination::id).collect(),
            max_turns: self.run_config.max_turns,
            prompt_version: self.run_config.prompts.version.clone(),
            backends: self
                .config
                .backends
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::to_value(v).unwrap_or(Value::Null)))
                .collect(),
            decoding_note: "temperature and max_tokens are harness defaults unless set per backend".into(),
        }
    }
}

/// Contents of `metadata.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub schema_version: String,
    pub generator: String,
    pub scenario_file: String,
    pub seed: u64,
    pub sample: usize,
    pub scenario_ids: Vec<String>,
    pub loaded_rejected: usize,
    pub loaded_skipped: usize,
    pub combinations: Vec<String>,
    pub max_turns: u32,
    pub prompt_version: String,
    pub backends: BTreeMap<String, Value>,
    pub decoding_note: String,
}

impl Metadata {
    fn same_cells(&self, other: &Metadata) -> Result<(), String> {
        if self.schema_version != other.schema_version {
            return Err(format!("schema {} vs {}", self.schema_version, other.schema_version));
        }
        if self.scenario_ids != other.scenario_ids {
            return Err("the sampled scenarios differ".into());
        }
        if self.combinations != other.combinations {
            return Err("the combinations differ".into());
        }
        if self.max_turns != other.max_turns {
            return Err("max_turns differs".into());
        }
        if self.backends != other.backends || self.prompt_version != other.prompt_version {
            return Err("backends or prompts differ".into());
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    run_id: String,
    row: ResultRow,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SweepSummary {
    pub cells: usize,
    pub resumed: usize,
    pub executed: usize,
    pub failures: usize,
    pub output: PathBuf,
}

fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, SweepError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut entries = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        match serde_json::from_str(&line) {
            Ok(entry) => entries.push(entry),
            Err(_) if line.trim().is_empty() => {}
            Err(err) => tracing::warn!("{}: ignoring unreadable manifest line: {err}", path.display()),
        }
    }
    Ok(entries)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), SweepError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// True when `path` exists, is non-empty and lacks a final newline.
fn ends_mid_line(path: &Path) -> io::Result<bool> {
    let mut file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(false),
        Err(e) => return Err(e),
    };
    if file.metadata()?.len() == 0 {
        return Ok(false);
    }
    file.seek(SeekFrom::End(-1))?;
    let mut last = [0];
    file.read_exact(&mut last)?;
    Ok(last[0] != b'\n')
}

fn append_line(files: &mut HashMap<PathBuf, BufWriter<File>>, path: &Path, line: &str) -> Result<(), SweepError> {
    if !files.contains_key(path) {
        let torn = ends_mid_line(path).map_err(io_err(path))?;
        let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
        if torn {
            file.write_all(b"\n").map_err(io_err(path))?;
        }
        files.insert(path.to_path_buf(), BufWriter::new(file));
    }
    let writer = files.get_mut(path).expect("inserted above");
    writeln!(writer, "{line}").and_then(|_| writer.flush()).map_err(io_err(path))
}

/// Runs every pending cell of `config`. With `resume`, cells recorded in an
/// existing manifest are kept; otherwise previous results are discarded.
pub fn run_sweep(config: &SweepConfig, resume: bool) -> Result<SweepSummary, SweepError> {
    let plan = Plan::new(config)?;
    config.check_output()?;
    let out = config.output.clone();
    let metadata = plan.metadata();
    let metadata_path = out.join(METADATA_FILE);
    let manifest_path = out.join(MANIFEST_FILE);
    let transcripts = out.join(TRANSCRIPT_DIR);

    let mut done: Vec<ManifestEntry> = Vec::new();
    if resume && metadata_path.exists() {
        let text = fs::read_to_string(&metadata_path).map_err(io_err(&metadata_path))?;
        let previous: Metadata = serde_json::from_str(&text)
            .map_err(|e| SweepError::ResumeMismatch(format!("unreadable {METADATA_FILE}: {e}")))?;
        previous.same_cells(&metadata).map_err(SweepError::ResumeMismatch)?;
        done = read_manifest(&manifest_path)?;
    } else {
        for path in [&manifest_path, &out.join(RESULTS_FILE)] {
            match fs::remove_file(path) {
                Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(io_err(path)(e)),
                _ => {}
            }
        }
        if transcripts.exists() {
            fs::remove_dir_all(&transcripts).map_err(io_err(&transcripts))?;
        }
    }
    fs::create_dir_all(&transcripts).map_err(io_err(&transcripts))?;
    let metadata_json = serde_json::to_string_pretty(&metadata).expect("metadata serializes");
    write_atomic(&metadata_path, format!("{metadata_json}\n").as_bytes())?;

    let completed: HashSet<&str> = done.iter().map(|e| e.run_id.as_str()).collect();
    let cells = plan.cells();
    let pending: Vec<(usize, usize)> = cells
        .iter()
        .copied()
        .filter(|&cell| !completed.contains(plan.run_id(cell).as_str()))
        .collect();
    let resumed = cells.len() - pending.len();
    tracing::info!(cells = cells.len(), resumed, pending = pending.len(), "starting sweep");

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<Result<TranscriptRecord, SweepError>>();
    let workers = config.parallel.min(pending.len()).max(1);
    let mut executed = 0;
    let mut failures = 0;
    let mut first_error = None;
    thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (plan, pending, next) = (&plan, &pending, &next);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(c, s)) = pending.get(i) else { break };
                let record = execute(&plan.combinations[c], &plan.scenarios[s], &plan.backends, &plan.run_config);
                if tx.send(record).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut files = HashMap::new();
        for record in rx {
            let written = record.and_then(|record| {
                let combination = combination_id(&record.buyer.name, &record.seller.name);
                let transcript = transcript_file(&combination);
                let row = ResultRow::from_run(record.run_id.clone(), &record.run(), transcript.clone());
                let line = serde_json::to_string(&record).expect("transcript serializes");
                append_line(&mut files, &out.join(&transcript), &line)?;
                let entry = ManifestEntry {
                    run_id: record.run_id.clone(),
                    row,
                };
                let line = serde_json::to_string(&entry).expect("manifest entry serializes");
                append_line(&mut files, &manifest_path, &line)?;
                Ok(record.failure.is_some())
            });
            match written {
                Ok(failed) => {
                    executed += 1;
                    failures += usize::from(failed);
                }
                Err(err) => {
                    if first_error.is_none() {
                        first_error = Some(err);
                    }
                    next.store(usize::MAX / 2, Ordering::Relaxed);
                }
            }
        }
    });
    if let Some(err) = first_error {
        return Err(err);
    }

    finalize(&plan, &out)?;
    Ok(SweepSummary {
        cells: cells.len(),
        resumed,
        executed,
        failures,
        output: out,
    })
}

/// Rewrites `results.csv` and the transcript files from the manifest in
/// canonical order, dropping records the manifest lacks. A repeated
/// transcript line keeps the later copy.
fn finalize(plan: &Plan, out: &Path) -> Result<(), SweepError> {
    let order: HashMap<String, usize> = plan
        .cells()
        .into_iter()
        .enumerate()
        .map(|(i, cell)| (plan.run_id(cell), i))
        .collect();
    let mut rows: BTreeMap<usize, ResultRow> = BTreeMap::new();
    for entry in read_manifest(&out.join(MANIFEST_FILE))? {
        if let Some(&i) = order.get(&entry.run_id) {
            rows.entry(i).or_insert(entry.row);
        }
    }
    let rows: Vec<ResultRow> = rows.into_values().collect();
    let kept: HashSet<&str> = rows.iter().map(|r| r.run_id.as_str()).collect();
    write_atomic(&out.join(RESULTS_FILE), results::render_csv(&rows).as_bytes())?;

    for combination in &plan.combinations {
        let path = out.join(transcript_file(&combination.id()));
        if !path.exists() {
            continue;
        }
        let mut records: BTreeMap<usize, TranscriptRecord> = BTreeMap::new();
        for record in results::read_transcripts(&path)? {
            match order.get(&record.run_id) {
                Some(&i) if kept.contains(record.run_id.as_str()) => {
                    records.insert(i, record);
                }
                _ => {}
            }
        }
        let mut text = String::new();
        for record in records.values() {
            text.push_str(&serde_json::to_string(record).expect("transcript serializes"));
            text.push('\n');
        }
        write_atomic(&path, text.as_bytes())?;
    }
    Ok(())
}
