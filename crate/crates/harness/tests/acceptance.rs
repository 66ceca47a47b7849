//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Scripted agents only; no model server needed.
//!
//! Run alone with `cargo test -p parley-harness --test acceptance`.

use std::collections::HashMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use parley_core::corpus::build_knowledge_bases;
use parley_core::metrics::{aggressiveness, aggregate, bias, fairness, RunMetrics};
use parley_core::prompting::{build_prompt, HistoryEntry};
use parley_core::protocol::{extract_price, parse_turn};
use parley_core::runner::{resolve_agreed_price, run_negotiation, RunFailure};
use parley_core::{
    AgentProfile, DialogueAct, NegotiationRun, Outcome, Personality, PolicyKind, Price, PromptConfig, Role,
    RunConfig, Scenario, ScriptedAgent, ScriptedPolicy, Turn,
};
use parley_harness::config::SweepConfig;
use parley_harness::report::{agreement_matrix, report_dir};
use parley_harness::results::{read_csv, write_csv, ResultRow, TranscriptRecord};
use parley_harness::sweep::{run_sweep, RESULTS_FILE};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

type Checked = Result<String, String>;
type Criterion = (&'static str, fn() -> Checked);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn runner() -> TestRunner {
    TestRunner::new_with_rng(Config::default(), TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn draw<S: Strategy>(strategy: &S, runner: &mut TestRunner) -> S::Value {
    strategy.new_tree(runner).expect("strategy yields a value").current()
}

fn profile(name: &str, role: Role, personality: Personality, cot: bool) -> AgentProfile {
    AgentProfile {
        name: name.into(),
        role,
        personality,
        cot,
        model_ref: "fixture".into(),
    }
}

fn scenario(id: String, listing: i64, buyer: i64, seller: i64) -> Scenario {
    Scenario {
        id,
        title: "Item".into(),
        description: "Used item".into(),
        category: "misc".into(),
        listing_price: Price::from_cents(listing),
        buyer_target: Price::from_cents(buyer),
        seller_target: Price::from_cents(seller),
    }
}

fn turn(index: u32, act: DialogueAct, utterance: String) -> Turn {
    Turn {
        index,
        speaker: if index % 2 == 1 { Role::Buyer } else { Role::Seller },
        act,
        price: extract_price(&utterance),
        utterance,
        reasoning: None,
    }
}

/// Writes `results.csv` and transcripts for `runs` the way a sweep does.
fn write_results(dir: &Path, runs: &[NegotiationRun]) {
    let mut rows = Vec::new();
    let mut files: HashMap<String, String> = HashMap::new();
    for run in runs {
        let combination = format!("{}__{}", run.buyer.name, run.seller.name);
        let run_id = format!("{combination}/{}", run.scenario.id);
        let transcript = format!("transcripts/{combination}.jsonl");
        rows.push(ResultRow::from_run(run_id.clone(), run, transcript.clone()));
        let record = TranscriptRecord::new(run_id, run.clone(), 0, 0, Vec::new());
        let text = files.entry(transcript).or_default();
        text.push_str(&serde_json::to_string(&record).unwrap());
        text.push('\n');
    }
    fs::create_dir_all(dir.join("transcripts")).unwrap();
    for (file, text) in files {
        fs::write(dir.join(file), text).unwrap();
    }
    write_csv(fs::File::create(dir.join(RESULTS_FILE)).unwrap(), &rows).unwrap();
}

// Metric oracle ------------------------------------------------------------

fn synthetic_run() -> impl Strategy<Value = NegotiationRun> {
    let turn = (0..DialogueAct::ALL.len(), proptest::option::weighted(0.7, 1..2_000_000i64));
    (
        100..500_000i64,
        1..500_000i64,
        100..1_000_000i64,
        proptest::collection::vec(turn, 1..=15),
        proptest::bool::weighted(0.6),
    )
        .prop_map(|(buyer, gap, listing, raw, accept)| {
            let n = raw.len() as u32;
            let turns: Vec<Turn> = raw
                .into_iter()
                .zip(1..)
                .map(|((act, price), index)| {
                    let act = match DialogueAct::ALL[act] {
                        _ if index == n && accept => DialogueAct::Accept,
                        DialogueAct::Accept => DialogueAct::Inquire,
                        other => other,
                    };
                    Turn {
                        index,
                        speaker: if index % 2 == 1 { Role::Buyer } else { Role::Seller },
                        act,
                        utterance: "synthetic".into(),
                        reasoning: None,
                        price: price.map(Price::from_cents),
                    }
                })
                .collect();
            let agreed_price = resolve_agreed_price(&turns).ok();
            NegotiationRun {
                scenario: scenario("r".into(), listing, buyer, buyer + gap),
                buyer: profile("b", Role::Buyer, Personality::None, false),
                seller: profile("s", Role::Seller, Personality::None, false),
                turns,
                outcome: if agreed_price.is_some() { Outcome::Accepted } else { Outcome::Rejected },
                agreed_price,
                failure: None,
                diagnostic: None,
            }
        })
}

/// Brute-force metrics from decimal strings and plain lists.
fn oracle(run: &NegotiationRun) -> [Option<f64>; 10] {
    let d = |p: Price| -> f64 { p.to_string().parse().unwrap() };
    let n = run.turns.len() as f64;
    let path = |who: Option<Role>| {
        let prices: Vec<f64> = run
            .turns
            .iter()
            .filter(|t| who.is_none_or(|r| t.speaker == r))
            .filter_map(|t| t.price.map(d))
            .collect();
        prices.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / n
    };
    let (st, bt, l) = (d(run.scenario.seller_target), d(run.scenario.buyer_target), d(run.scenario.listing_price));
    let a = run.agreed_price.map(d);
    let fair = a.map(|a| 1.0 - 2.0 * (a - (st + bt) / 2.0).abs() / (st - bt));
    let bias = a.map(|a| 2.0 * (st - a).abs() / (st - bt) - 1.0);
    let inquiries = run.turns.iter().filter(|t| t.act == DialogueAct::Inquire).count() as f64;
    [
        Some(n),
        fair,
        bias,
        a.map(|a| (a - l).abs() / l),
        Some(path(None)),
        Some(path(Some(Role::Buyer))),
        Some(path(Some(Role::Seller))),
        fair.map(|f| f / n),
        bias.map(|b| b / n),
        Some(inquiries / n),
    ]
}

fn measured(m: &RunMetrics) -> [Option<f64>; 10] {
    [
        Some(f64::from(m.dialogue_length)),
        m.fairness,
        m.bias,
        m.aggressiveness,
        Some(m.concession_rate),
        Some(m.buyer_concession_rate),
        Some(m.seller_concession_rate),
        m.relative_efficiency,
        m.bias_cond_length,
        Some(m.probing_ratio),
    ]
}

fn metric_oracle() -> Checked {
    const NAMES: [&str; 10] = [
        "length",
        "fairness",
        "bias",
        "aggressiveness",
        "concession",
        "buyer concession",
        "seller concession",
        "relative efficiency",
        "bias/length",
        "probing",
    ];
    let clock = Instant::now();
    let mut rng = runner();
    let strategy = synthetic_run();
    let mut all = Vec::new();
    let mut sums = [(0.0, 0usize); 10];
    for i in 0..1000 {
        let run = draw(&strategy, &mut rng);
        let got = RunMetrics::compute(&run).map_err(|e| format!("run {i}: {e}"))?;
        let want = oracle(&run);
        for (k, (g, w)) in measured(&got).into_iter().zip(want).enumerate() {
            match (g, w) {
                (Some(g), Some(w)) if (g - w).abs() <= 1e-9 => {
                    sums[k].0 += w;
                    sums[k].1 += 1;
                }
                (None, None) => {}
                _ => return Err(format!("run {i}: {} is {g:?}, oracle {w:?}", NAMES[k])),
            }
        }
        all.push(got);
    }
    let agg = aggregate(&all).map_err(|e| e.to_string())?;
    let means = [agg.dialogue_length, agg.fairness, agg.bias, agg.aggressiveness, agg.concession_rate];
    for (k, mean) in means.into_iter().enumerate() {
        let mean = mean.ok_or("missing aggregate")?;
        let want = sums[k].0 / sums[k].1 as f64;
        ensure(mean.count == sums[k].1 && (mean.value - want).abs() <= 1e-9, || {
            format!("mean {}: {} over {} vs {want} over {}", NAMES[k], mean.value, mean.count, sums[k].1)
        })?;
    }
    let accepted = all.iter().filter(|m| m.accepted).count();
    ensure((agg.agreement_rate - accepted as f64 / 1000.0).abs() <= 1e-12, || "agreement rate".into())?;
    let secs = clock.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("1000 runs ({accepted} accepted), 10 metrics within 1e-9, {secs:.2} s"))
}

// Anchor values -------------------------------------------------------------

fn anchor_values() -> Checked {
    let (bt, st, listing) = (Price::dollars(80), Price::dollars(120), Price::dollars(150));
    let cases = [
        ("fairness at midpoint", fairness(Price::dollars(100), st, bt), 1.0),
        ("bias at seller target", bias(st, st, bt), -1.0),
        ("bias at buyer target", bias(bt, st, bt), 1.0),
        ("aggressiveness at listing", aggressiveness(listing, listing), 0.0),
    ];
    for (name, got, want) in cases {
        let got = got.map_err(|e| format!("{name}: {e}"))?;
        ensure(got == want, || format!("{name}: {got} != {want}"))?;
    }
    Ok("midpoint fairness 1, bias -1/+1 at the targets, aggressiveness 0 at listing".into())
}

// Agreement rates -----------------------------------------------------------

fn outcome_run(buyer: &AgentProfile, seller: &AgentProfile, id: usize, accepted: bool) -> NegotiationRun {
    let sc = scenario(format!("s{id}"), 15_000, 10_000, 12_000);
    let turns = if accepted {
        vec![
            turn(1, DialogueAct::InitPrice, "Would you take $105?".into()),
            turn(2, DialogueAct::CounterPrice, "I could do $115.".into()),
            turn(3, DialogueAct::Accept, "Deal at $110.".into()),
        ]
    } else {
        (1..=15).map(|i| turn(i, DialogueAct::Insist, "No.".into())).collect()
    };
    NegotiationRun {
        scenario: sc,
        buyer: buyer.clone(),
        seller: seller.clone(),
        outcome: if accepted { Outcome::Accepted } else { Outcome::Rejected },
        agreed_price: accepted.then(|| Price::dollars(110)),
        turns,
        failure: None,
        diagnostic: None,
    }
}

fn table_one() -> Checked {
    use Personality::{Aggressive, Fair, Passive};
    let cells = [
        (Aggressive, Fair, 17, 20, 0.85),
        (Aggressive, Passive, 18, 25, 0.72),
        (Fair, Aggressive, 39, 50, 0.78),
        (Passive, Passive, 16, 25, 0.64),
        (Passive, Fair, 16, 20, 0.80),
    ];
    let mut runs = Vec::new();
    let mut expected = HashMap::new();
    for &(bp, sp, accepted, total, rate) in &cells {
        let buyer = profile(&format!("{bp}-buyer"), Role::Buyer, bp, false);
        let seller = profile(&format!("{sp}-seller"), Role::Seller, sp, false);
        for i in 0..total {
            runs.push(outcome_run(&buyer, &seller, i, i < accepted));
        }
        expected.insert(format!("{}__{}", buyer.name, seller.name), rate);
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_results(dir.path(), &runs);
    let rows = read_csv(&dir.path().join(RESULTS_FILE)).map_err(|e| e.to_string())?;
    let matrix = agreement_matrix(&rows);
    ensure(matrix.len() == 5, || format!("{} cells", matrix.len()))?;
    let mut shown = Vec::new();
    for cell in &matrix {
        let want = expected[&cell.combination];
        ensure(cell.agreement_rate == want, || format!("{}: {} != {want}", cell.combination, cell.agreement_rate))?;
        shown.push(format!("{:.2}", cell.agreement_rate));
    }
    let report = report_dir(dir.path()).map_err(|e| e.to_string())?;
    ensure(report.agreement == matrix, || "report disagrees with the matrix".into())?;
    Ok(format!("agreement rates {} exact", shown.join(", ")))
}

// CoT comparison ------------------------------------------------------------

struct Column {
    cot: bool,
    /// (length, accepted price, listing price), cents.
    pattern: [(u32, i64, i64); 5],
    repeats: usize,
    filler: u32,
    long_rejected: usize,
    inquiries: &'static [u32],
    swing: i64,
    /// Reference values in column order.
    means: [f64; 7],
}

const WITH_COT: Column = Column {
    cot: true,
    pattern: [
        (2, 1_117_620, 1_415_964),
        (2, 1_110_000, 1_406_309),
        (3, 1_161_680, 1_471_785),
        (15, 870_050, 1_102_306),
        (15, 700_000, 886_862),
    ],
    repeats: 16,
    filler: 13,
    long_rejected: 58,
    inquiries: &[0, 0, 0, 0, 2, 7, 2, 2, 2, 5, 5, 5, 5, 5],
    swing: 2_746_250,
    means: [0.2107, 1.0813, 10.6115, -0.4385, 184.4005, 0.0197, 0.1406],
};

const WITHOUT_COT: Column = Column {
    cot: false,
    pattern: [
        (2, 1_173_575, 1_354_073),
        (4, 1_159_125, 1_337_400),
        (8, 903_750, 1_042_748),
        (12, 1_090_000, 1_257_644),
        (15, 1_090_000, 1_257_644),
    ],
    repeats: 3,
    filler: 14,
    long_rejected: 14,
    inquiries: &[0, 0, 1, 0, 0, 4],
    swing: 607_202,
    means: [0.1333, 0.1671, 11.5667, 0.3021, 188.9073, 0.0137, 0.0498],
};

const BUYER_TARGET: i64 = 1_000_000;
const SELLER_TARGET: i64 = 1_200_000;

fn filler_turns(length: u32, inquiries: u32) -> Vec<Turn> {
    (1..=length)
        .map(|i| {
            if i <= inquiries {
                turn(i, DialogueAct::Inquire, "Is it still available?".into())
            } else {
                turn(i, DialogueAct::Inform, "It has a few scratches.".into())
            }
        })
        .collect()
}

fn column_runs(c: &Column) -> Vec<NegotiationRun> {
    let tag = if c.cot { "cot" } else { "plain" };
    let buyer = profile(&format!("{tag}-buyer"), Role::Buyer, Personality::None, c.cot);
    let seller = profile(&format!("{tag}-seller"), Role::Seller, Personality::None, false);
    let mut inquiries = c.inquiries.iter().copied();
    let mut runs = Vec::new();
    let mut push = |listing: i64, turns: Vec<Turn>, agreed: Option<Price>, failure: Option<RunFailure>| {
        let id = format!("s{}", runs.len());
        runs.push(NegotiationRun {
            scenario: scenario(id, listing, BUYER_TARGET, SELLER_TARGET),
            buyer: buyer.clone(),
            seller: seller.clone(),
            outcome: if agreed.is_some() { Outcome::Accepted } else { Outcome::Rejected },
            agreed_price: agreed,
            turns,
            failure,
            diagnostic: None,
        });
    };
    for copy in 0..c.repeats {
        for &(length, accepted, listing) in &c.pattern {
            let q = if copy == 0 { inquiries.next().unwrap_or(0) } else { 0 };
            let price = Price::from_cents(accepted);
            let mut turns = filler_turns(length - 1, q);
            turns.push(turn(length, DialogueAct::Accept, format!("Deal at ${price}.")));
            push(listing, turns, Some(price), None);
        }
    }
    let failure = RunFailure {
        turn: c.filler + 1,
        kind: "timeout".into(),
        message: "timed out after 3 attempt(s)".into(),
    };
    push(1_100_000, filler_turns(c.filler, inquiries.next().unwrap_or(0)), None, Some(failure));
    for _ in 0..c.long_rejected - 1 {
        push(1_100_000, filler_turns(15, inquiries.next().unwrap_or(0)), None, None);
    }
    let swing: Vec<Turn> = (1..=15)
        .map(|i| {
            let p = Price::from_cents(BUYER_TARGET + if i % 2 == 0 { c.swing } else { 0 });
            turn(i, DialogueAct::CounterPrice, format!("How about ${p}?"))
        })
        .collect();
    push(1_100_000, swing, None, None);
    runs
}

fn table_three() -> Checked {
    let mut runs = column_runs(&WITH_COT);
    runs.extend(column_runs(&WITHOUT_COT));
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_results(dir.path(), &runs);
    let report = report_dir(dir.path()).map_err(|e| e.to_string())?;
    let rows = report.cot.rows();
    let mut worst: f64 = 0.0;
    for (i, (name, with, without)) in rows.iter().enumerate() {
        for (got, want, side) in [(with, WITH_COT.means[i], "with"), (without, WITHOUT_COT.means[i], "without")] {
            let got = got.ok_or_else(|| format!("{name} {side} CoT missing"))?;
            worst = worst.max((got - want).abs());
            ensure((got - want).abs() <= 1e-4, || format!("{name} {side} CoT: {got:.6} vs {want}"))?;
        }
    }
    let runs_in = |c: &Option<parley_harness::report::CotColumn>| c.as_ref().map_or(0, |c| c.runs);
    ensure(runs_in(&report.cot.with_cot) == 139 && runs_in(&report.cot.without_cot) == 30, || {
        "fixture run counts".into()
    })?;
    Ok(format!("14 cells over 139 + 30 runs, max deviation {worst:.1e}"))
}

// Deterministic end to end --------------------------------------------------

fn play(sc: &Scenario, buyer: ScriptedPolicy, seller: ScriptedPolicy) -> Result<NegotiationRun, String> {
    let (b, s) = (
        profile("b", Role::Buyer, Personality::None, false),
        profile("s", Role::Seller, Personality::None, false),
    );
    run_negotiation(
        sc,
        (&b, &mut ScriptedAgent::new(buyer)),
        (&s, &mut ScriptedAgent::new(seller)),
        &RunConfig::default(),
    )
    .map_err(|e| e.to_string())
}

const SWEEP: &str = r#"
output = "out"

[scenarios]
path = "scenarios.jsonl"
sample = 30
seed = 20241215

[backends.linear]
kind = "scripted"
policy = "linear_concession"

[backends.high]
kind = "scripted"
policy = "linear_concession"
opening_fraction = 1.0

[backends.stubborn]
kind = "scripted"
policy = "stubborn"

[[buyers]]
name = "linear"
backend = "linear"

[[buyers]]
name = "stubborn"
backend = "stubborn"

[[sellers]]
name = "linear"
backend = "high"

[[sellers]]
name = "stubborn"
backend = "stubborn"
"#;

fn end_to_end() -> Checked {
    let sc = scenario("bike".into(), 10_000, 5_000, 10_000);
    let linear = ScriptedPolicy::new(PolicyKind::LinearConcession, 0.5, 0.1, 0.05);
    // The buyer opens at min(0.5 * 100.00, 50.00) and the bot accepts it.
    let derived = Price::from_cents((10_000f64 * 0.5).round() as i64).min(Price::from_cents(5_000));
    let run = play(&sc, linear, ScriptedPolicy::accept_bot())?;
    ensure(run.outcome == Outcome::Accepted && run.turns.len() == 2 && run.agreed_price == Some(derived), || {
        format!("linear vs accept bot: {:?} after {} turns at {:?}", run.outcome, run.turns.len(), run.agreed_price)
    })?;
    let stubborn = |opening| ScriptedPolicy::new(PolicyKind::Stubborn, opening, 0.1, 0.05);
    let run = play(&sc, stubborn(0.5), stubborn(1.0))?;
    ensure(run.outcome == Outcome::Rejected && run.turns.len() == 15, || {
        format!("stubborn pair: {:?} after {} turns", run.outcome, run.turns.len())
    })?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenarios: String = (0..40)
        .map(|i: i64| {
            let listing = 2_000 + i * 731 % 40_000;
            let buyer = listing * (40 + i % 30) / 100;
            let seller = buyer + 1 + listing * (i % 13) / 100;
            format!(
                "{{\"id\":\"item-{i}\",\"title\":\"Item {i}\",\"description\":\"\",\"category\":\"misc\",\
                 \"listing_price\":\"{}\",\"buyer_target\":\"{}\",\"seller_target\":\"{}\"}}\n",
                Price::from_cents(listing),
                Price::from_cents(buyer),
                Price::from_cents(seller)
            )
        })
        .collect();
    fs::write(dir.path().join("scenarios.jsonl"), scenarios).map_err(|e| e.to_string())?;
    fs::write(dir.path().join("sweep.toml"), SWEEP).map_err(|e| e.to_string())?;
    let mut config = SweepConfig::load(&dir.path().join("sweep.toml")).map_err(|e| e.to_string())?;

    let clock = Instant::now();
    let summary = run_sweep(&config, false).map_err(|e| e.to_string())?;
    let secs = clock.elapsed().as_secs_f64();
    ensure(summary.cells == 120 && summary.failures == 0, || format!("{summary:?}"))?;
    ensure(secs < 5.0, || format!("4 x 30 sweep took {secs:.2} s"))?;
    let first = fs::read(config.output.join(RESULTS_FILE)).map_err(|e| e.to_string())?;
    let accepted = read_csv(&config.output.join(RESULTS_FILE)).map_err(|e| e.to_string())?.iter().filter(|r| r.accepted).count();

    config.output = dir.path().join("again");
    config.parallel = 1;
    run_sweep(&config, false).map_err(|e| e.to_string())?;
    let second = fs::read(config.output.join(RESULTS_FILE)).map_err(|e| e.to_string())?;
    ensure(first == second, || "repeated sweeps differ".into())?;
    Ok(format!(
        "accept bot turn 2 at ${derived}, stubborn pair 15 turns, 120-run sweep ({accepted} deals) in {secs:.2} s, byte-identical rerun"
    ))
}

// Parser totality -----------------------------------------------------------

fn grammar_noise() -> impl Strategy<Value = String> {
    let key = prop_oneof![
        Just("ACTION:"),
        Just("Action -"),
        Just("**ACTION**:"),
        Just("UTTERANCE:"),
        Just("utterance:"),
        Just("REASONING:"),
        Just(""),
    ];
    let value = prop_oneof![
        proptest::sample::select(DialogueAct::ALL.to_vec()).prop_map(|a| a.label().to_string()),
        "\\PC{0,30}",
        "[$0-9.,]{0,12}",
        ".{0,40}",
    ];
    proptest::collection::vec((key, value), 0..6)
        .prop_map(|parts| parts.into_iter().map(|(k, v)| format!("{k} {v}")).collect::<Vec<_>>().join("\n"))
}

fn parser_totality() -> Checked {
    let mut rng = runner();
    let arbitrary = any::<String>();
    let noise = grammar_noise();
    let hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut failure = None;
    for i in 0..10_000 {
        let raw = if i % 2 == 0 { draw(&arbitrary, &mut rng) } else { draw(&noise, &mut rng) };
        let cot = i % 3 == 0;
        let result = panic::catch_unwind(AssertUnwindSafe(|| {
            parse_turn(&raw, Role::Seller, cot, 1).map(|t| t.price == extract_price(&t.utterance))
        }));
        match result {
            Err(_) => failure = Some(format!("parse_turn panicked on {raw:?}")),
            Ok(Ok(false)) => failure = Some(format!("turn price differs from its utterance for {raw:?}")),
            Ok(_) => continue,
        }
        break;
    }
    panic::set_hook(hook);
    if let Some(failure) = failure {
        return Err(failure);
    }

    for act in DialogueAct::ALL {
        for cot in [false, true] {
            let original = Turn {
                index: 4,
                speaker: Role::Buyer,
                act,
                utterance: "Could you do $42.50 for it?".into(),
                reasoning: cot.then(|| "Leave room to move.".into()),
                price: Some(Price::from_cents(4_250)),
            };
            let parsed = parse_turn(&original.to_wire(), Role::Buyer, cot, 4)
                .map_err(|e| format!("{}: {e}", act.label()))?;
            ensure(parsed == original, || format!("round trip of {} (cot {cot}): {parsed:?}", act.label()))?;
        }
    }

    for (utterance, cents) in [("I'll meet you at $8.", 800), ("a price of $10 or $11?", 1_000)] {
        let got = extract_price(utterance);
        ensure(got == Some(Price::from_cents(cents)), || format!("{utterance:?} gave {got:?}"))?;
    }
    Ok("10000 fuzzed inputs, 11 acts round-trip, $8 -> 8.00 and $10 or $11 -> 10.00".into())
}

// Information hiding --------------------------------------------------------

fn hiding_case() -> impl Strategy<Value = (Scenario, Personality, bool, u32, Vec<String>)> {
    let personality = proptest::sample::select(vec![
        Personality::Aggressive,
        Personality::Fair,
        Personality::Passive,
        Personality::None,
    ]);
    (
        (10_000i64..10_000_000, 10_000i64..10_000_000, 10_000i64..10_000_000)
            .prop_filter("distinct", |(l, a, b)| l != a && l != b && a != b),
        "[A-Za-z ]{1,30}",
        "[A-Za-z ,.]{0,120}",
        personality,
        any::<bool>(),
        0u32..=15,
        proptest::collection::vec("[A-Za-z ]{1,40}", 0..6),
    )
        .prop_map(|((listing, a, b), title, description, personality, cot, left, chatter)| {
            let mut sc = scenario("h".into(), listing, a.min(b), a.max(b));
            sc.title = title;
            sc.description = description;
            (sc, personality, cot, left, chatter)
        })
}

fn numeric_tokens(text: &str) -> impl Iterator<Item = Price> + '_ {
    text.split(|c: char| !(c.is_ascii_digit() || c == '.' || c == ','))
        .map(|t| t.trim_matches(['.', ',']))
        .filter(|t| !t.is_empty())
        .filter_map(|t| t.parse().ok())
}

fn information_hiding() -> Checked {
    let mut rng = runner();
    let strategy = hiding_case();
    let config = PromptConfig::default();
    let mut prompts = 0;
    for case in 0..200 {
        let (sc, personality, cot, left, chatter) = draw(&strategy, &mut rng);
        let history: Vec<HistoryEntry> = chatter
            .into_iter()
            .enumerate()
            .map(|(i, utterance)| HistoryEntry {
                speaker: if i % 2 == 0 { Role::Buyer } else { Role::Seller },
                utterance,
            })
            .collect();
        let (buyer_kb, seller_kb) = build_knowledge_bases(&sc);
        for (kb, hidden) in [(&buyer_kb, sc.seller_target), (&seller_kb, sc.buyer_target)] {
            let who = profile("p", kb.role, personality, cot);
            let prompt = build_prompt(&config, &who, kb, &history, left).map_err(|e| e.to_string())?;
            let own = prompt.system.contains(&kb.target_price.to_string());
            ensure(own, || format!("case {case}: {} prompt lacks its own target", kb.role))?;
            for message in prompt.chat_messages() {
                let leak = message.content.contains(&hidden.to_string()) || numeric_tokens(&message.content).any(|p| p == hidden);
                ensure(!leak, || format!("case {case}: {} prompt shows {hidden}", kb.role))?;
            }
            prompts += 1;
        }
    }
    Ok(format!("200 scenarios, {prompts} prompts, no counterpart target"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("metric oracle equivalence", metric_oracle),
        ("metric anchor values", anchor_values),
        ("agreement-rate fixture", table_one),
        ("cot comparison fixture", table_three),
        ("deterministic end to end", end_to_end),
        ("parser totality", parser_totality),
        ("information hiding", information_hiding),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name}: {reason}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
