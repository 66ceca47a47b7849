//! Per-run negotiation metrics and their aggregation.
//!
//! Metrics that need an agreed price (fairness, bias, aggressiveness and the
//! ratios built on them) are `None` for rejected runs rather than zero, so
//! means are taken over the runs where they are defined.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Role;
use crate::price::Price;
use crate::protocol::{DialogueAct, Turn};
use crate::runner::NegotiationRun;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("seller and buyer targets coincide")]
    ZeroTargetSpread,
    #[error("listing price must be positive")]
    NonPositiveListing,
    #[error("run has no turns")]
    EmptyRun,
    #[error("no runs to aggregate")]
    NoRuns,
}

fn spread(seller_target: Price, buyer_target: Price) -> Result<f64, MetricsError> {
    let spread = seller_target.to_f64() - buyer_target.to_f64();
    if spread == 0.0 {
        return Err(MetricsError::ZeroTargetSpread);
    }
    Ok(spread)
}

/// `1 - 2|accepted - midpoint| / (seller_target - buyer_target)`: 1 at the
/// midpoint of the targets, 0 at either target, negative outside them.
pub fn fairness(accepted: Price, seller_target: Price, buyer_target: Price) -> Result<f64, MetricsError> {
    let spread = spread(seller_target, buyer_target)?;
    let midpoint = (seller_target.to_f64() + buyer_target.to_f64()) / 2.0;
    Ok(1.0 - 2.0 * (accepted.to_f64() - midpoint).abs() / spread)
}

/// `2|seller_target - accepted| / (seller_target - buyer_target) - 1`:
/// -1 at the seller's target, +1 at the buyer's. The absolute value is kept
/// as published, so prices above the seller target also read as positive.
pub fn bias(accepted: Price, seller_target: Price, buyer_target: Price) -> Result<f64, MetricsError> {
    let spread = spread(seller_target, buyer_target)?;
    Ok(2.0 * (seller_target.to_f64() - accepted.to_f64()).abs() / spread - 1.0)
}

/// `|accepted - listing| / listing`.
pub fn aggressiveness(accepted: Price, listing: Price) -> Result<f64, MetricsError> {
    if !listing.is_positive() {
        return Err(MetricsError::NonPositiveListing);
    }
    let listing = listing.to_f64();
    Ok((accepted.to_f64() - listing).abs() / listing)
}

fn total_movement(prices: impl Iterator<Item = Price>) -> f64 {
    let mut prev: Option<Price> = None;
    let mut total = 0.0;
    for p in prices {
        if let Some(q) = prev {
            total += p.abs_diff(q).to_f64();
        }
        prev = Some(p);
    }
    total
}

/// Summed absolute change between consecutive prices (both agents pooled,
/// in turn order) divided by the dialogue length.
pub fn concession_rate(turns: &[Turn]) -> f64 {
    if turns.is_empty() {
        return 0.0;
    }
    total_movement(turns.iter().filter_map(|t| t.price)) / turns.len() as f64
}

/// Like [`concession_rate`] but over one agent's own prices only.
pub fn concession_rate_for(turns: &[Turn], role: Role) -> f64 {
    if turns.is_empty() {
        return 0.0;
    }
    let own = turns.iter().filter(|t| t.speaker == role).filter_map(|t| t.price);
    total_movement(own) / turns.len() as f64
}

pub fn probing_ratio(turns: &[Turn]) -> f64 {
    if turns.is_empty() {
        return 0.0;
    }
    turns.iter().filter(|t| t.act == DialogueAct::Inquire).count() as f64 / turns.len() as f64
}

/// Metrics that do not depend on the dialogue length.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CoreMetrics {
    pub fairness: Option<f64>,
    pub bias: Option<f64>,
    pub aggressiveness: Option<f64>,
    pub concession_rate: f64,
    pub buyer_concession_rate: f64,
    pub seller_concession_rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub accepted: bool,
    pub dialogue_length: u32,
    pub fairness: Option<f64>,
    pub aggressiveness: Option<f64>,
    pub bias: Option<f64>,
    pub bias_cond_length: Option<f64>,
    pub concession_rate: f64,
    pub buyer_concession_rate: f64,
    pub seller_concession_rate: f64,
    pub relative_efficiency: Option<f64>,
    pub probing_ratio: f64,
}

pub fn core_metrics(run: &NegotiationRun) -> Result<CoreMetrics, MetricsError> {
    let s = &run.scenario;
    let (fairness, bias, aggressiveness) = match run.agreed_price.filter(|_| run.is_accepted()) {
        Some(p) => (
            Some(fairness(p, s.seller_target, s.buyer_target)?),
            Some(bias(p, s.seller_target, s.buyer_target)?),
            Some(aggressiveness(p, s.listing_price)?),
        ),
        None => (None, None, None),
    };
    Ok(CoreMetrics {
        fairness,
        bias,
        aggressiveness,
        concession_rate: concession_rate(&run.turns),
        buyer_concession_rate: concession_rate_for(&run.turns, Role::Buyer),
        seller_concession_rate: concession_rate_for(&run.turns, Role::Seller),
    })
}

/// Adds the per-turn ratios: relative efficiency (fairness per turn), bias
/// per turn and the share of `inquire` acts.
pub fn derived_ratios(run: &NegotiationRun, core: CoreMetrics) -> Result<RunMetrics, MetricsError> {
    let length = run.turns.len();
    if length == 0 {
        return Err(MetricsError::EmptyRun);
    }
    let per_turn = |v: Option<f64>| v.map(|v| v / length as f64);
    Ok(RunMetrics {
        accepted: run.is_accepted(),
        dialogue_length: length as u32,
        fairness: core.fairness,
        aggressiveness: core.aggressiveness,
        bias: core.bias,
        bias_cond_length: per_turn(core.bias),
        concession_rate: core.concession_rate,
        buyer_concession_rate: core.buyer_concession_rate,
        seller_concession_rate: core.seller_concession_rate,
        relative_efficiency: per_turn(core.fairness),
        probing_ratio: probing_ratio(&run.turns),
    })
}

impl RunMetrics {
    pub fn compute(run: &NegotiationRun) -> Result<RunMetrics, MetricsError> {
        derived_ratios(run, core_metrics(run)?)
    }
}

/// A mean together with the number of runs it was taken over.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mean {
    pub value: f64,
    pub count: usize,
}

impl Mean {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Mean> {
        let (sum, count) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        (count > 0).then(|| Mean {
            value: sum / count as f64,
            count,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub runs: usize,
    pub accepted: usize,
    pub agreement_rate: f64,
    pub dialogue_length: Option<Mean>,
    pub fairness: Option<Mean>,
    pub aggressiveness: Option<Mean>,
    pub bias: Option<Mean>,
    pub bias_cond_length: Option<Mean>,
    pub concession_rate: Option<Mean>,
    pub buyer_concession_rate: Option<Mean>,
    pub seller_concession_rate: Option<Mean>,
    pub relative_efficiency: Option<Mean>,
    pub probing_ratio: Option<Mean>,
}

/// Aggregates per-run metrics of one combination.
pub fn aggregate(runs: &[RunMetrics]) -> Result<AggregateMetrics, MetricsError> {
    if runs.is_empty() {
        return Err(MetricsError::NoRuns);
    }
    let accepted = runs.iter().filter(|r| r.accepted).count();
    let all = |f: fn(&RunMetrics) -> f64| Mean::of(runs.iter().map(f));
    let defined = |f: fn(&RunMetrics) -> Option<f64>| Mean::of(runs.iter().filter_map(f));
    Ok(AggregateMetrics {
        runs: runs.len(),
        accepted,
        agreement_rate: accepted as f64 / runs.len() as f64,
        dialogue_length: all(|r| f64::from(r.dialogue_length)),
        fairness: defined(|r| r.fairness),
        aggressiveness: defined(|r| r.aggressiveness),
        bias: defined(|r| r.bias),
        bias_cond_length: defined(|r| r.bias_cond_length),
        concession_rate: all(|r| r.concession_rate),
        buyer_concession_rate: all(|r| r.buyer_concession_rate),
        seller_concession_rate: all(|r| r.seller_concession_rate),
        relative_efficiency: defined(|r| r.relative_efficiency),
        probing_ratio: all(|r| r.probing_ratio),
    })
}

/// Collects metrics for every run that has at least one turn.
pub fn metrics_for(runs: &[NegotiationRun]) -> Result<Vec<RunMetrics>, MetricsError> {
    runs.iter()
        .filter(|r| !r.turns.is_empty())
        .map(RunMetrics::compute)
        .collect()
}
