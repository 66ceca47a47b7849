use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use parley_harness::config::{Overrides, SweepConfig};
use parley_harness::report::report_dir;
use parley_harness::sweep::{execute, run_sweep, Plan};
use tracing_subscriber::EnvFilter;

/// Buyer/seller negotiation benchmark.
#[derive(Parser)]
#[command(name = "parley", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single negotiation and print its transcript as JSON.
    Run {
        #[command(flatten)]
        common: Common,
        /// Buyer profile name; the first combination's buyer by default.
        #[arg(long)]
        buyer: Option<String>,
        /// Seller profile name; the first combination's seller by default.
        #[arg(long)]
        seller: Option<String>,
        /// Scenario id from the sampled set; the first sampled one by default.
        #[arg(long)]
        scenario: Option<String>,
        /// Append the transcript record to this JSONL file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every combination over the sampled scenarios.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Results directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long)]
        parallel: Option<usize>,
        /// Keep runs already recorded in the results directory.
        #[arg(long)]
        resume: bool,
    },
    /// Summarize a results directory.
    Report {
        /// Sweep config; its output directory is reported unless --out is given.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Results directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Check a sweep config, its scenario file and its prompt config.
    ValidateConfig {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        parallel: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// Sweep config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Scenario sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Scenario file.
    #[arg(long)]
    scenarios: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn load(common: &Common, out: Option<PathBuf>, parallel: Option<usize>) -> Result<SweepConfig> {
    let mut config = SweepConfig::load(&common.config)?;
    config.apply(&Overrides {
        seed: common.seed,
        scenarios: common.scenarios.clone(),
        out,
        parallel,
    });
    Ok(config)
}

fn run_one(config: &SweepConfig, buyer: Option<&str>, seller: Option<&str>, scenario: Option<&str>, out: Option<&Path>) -> Result<()> {
    let plan = Plan::new(config)?;
    let combination = plan
        .combinations
        .iter()
        .find(|c| buyer.is_none_or(|b| c.buyer.name == b) && seller.is_none_or(|s| c.seller.name == s))
        .ok_or("no combination matches --buyer/--seller")?;
    let scenario = match scenario {
        Some(id) => plan.scenarios.iter().find(|s| s.id == id).ok_or_else(|| format!("scenario `{id}` is not in the sampled set"))?,
        None => plan.scenarios.first().ok_or("no scenarios")?,
    };
    let record = execute(combination, scenario, &plan.backends, &plan.run_config)?;
    eprintln!(
        "{}: {} after {} turn(s){}",
        record.run_id,
        record.outcome.as_str(),
        record.turns.len(),
        record.agreed_price.map(|p| format!(" at ${p}")).unwrap_or_default()
    );
    match out {
        Some(path) => {
            let mut file = fs::OpenOptions::new().create(true).append(true).open(path)?;
            writeln!(file, "{}", serde_json::to_string(&record)?)?;
        }
        None => println!("{}", serde_json::to_string_pretty(&record)?),
    }
    Ok(())
}

fn validate(config: &SweepConfig) -> Result<()> {
    let plan = Plan::new(config)?;
    config.check_output()?;
    println!("config ok");
    println!(
        "  scenarios: {} sampled (seed {}), {} rejected and {} skipped while loading",
        plan.scenarios.len(),
        config.scenarios.seed,
        plan.load.rejected.len(),
        plan.load.skipped.len()
    );
    println!("  combinations: {}", plan.combinations.len());
    println!("  runs: {}", plan.combinations.len() * plan.scenarios.len());
    println!("  output: {}", config.output.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            common,
            buyer,
            seller,
            scenario,
            out,
        } => {
            let config = load(&common, None, None)?;
            run_one(&config, buyer.as_deref(), seller.as_deref(), scenario.as_deref(), out.as_deref())
        }
        Command::Sweep {
            common,
            out,
            parallel,
            resume,
        } => {
            let config = load(&common, out, parallel)?;
            let summary = run_sweep(&config, resume)?;
            println!(
                "{} cells: {} resumed, {} run, {} backend failure(s); results in {}",
                summary.cells,
                summary.resumed,
                summary.executed,
                summary.failures,
                summary.output.display()
            );
            Ok(())
        }
        Command::Report { config, out, format } => {
            let dir = match (out, config) {
                (Some(dir), _) => dir,
                (None, Some(path)) => SweepConfig::load(&path)?.output,
                (None, None) => return Err("report needs --out or --config".into()),
            };
            let report = report_dir(&dir)?;
            match format {
                Format::Text => print!("{}", report.to_text()),
                Format::Json => println!("{}", report.to_json()),
            }
            Ok(())
        }
        Command::ValidateConfig { common, out, parallel } => validate(&load(&common, out, parallel)?),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
