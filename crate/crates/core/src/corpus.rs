//! Negotiation scenarios and the per-role knowledge bases derived from them.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::price::Price;

/// Sample size of the reference evaluation set.
pub const DEFAULT_SAMPLE_SIZE: usize = 30;
/// Seed that reproduces the canonical evaluation set.
pub const DEFAULT_SEED: u64 = 20241215;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Buyer,
    Seller,
}

impl Role {
    pub fn counterpart(self) -> Role {
        match self {
            Role::Buyer => Role::Seller,
            Role::Seller => Role::Buyer,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Buyer => "buyer",
            Role::Seller => "seller",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One marketplace listing plus both parties' private target prices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub title: String,
    pub description: String,
    pub category: String,
    pub listing_price: Price,
    pub buyer_target: Price,
    pub seller_target: Price,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("{field} must be positive, got {value}")]
    NonPositivePrice { field: &'static str, value: Price },
    #[error("buyer target {buyer} is not below seller target {seller}")]
    TargetsNotOrdered { buyer: Price, seller: Price },
}

impl ScenarioError {
    /// Inverted or equal targets are skipped with a warning by loaders
    /// rather than treated as malformed input.
    pub fn is_skippable(&self) -> bool {
        matches!(self, ScenarioError::TargetsNotOrdered { .. })
    }
}

impl Scenario {
    /// Checks the price invariants every loaded scenario must satisfy.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        for (field, value) in [
            ("listing_price", self.listing_price),
            ("buyer_target", self.buyer_target),
            ("seller_target", self.seller_target),
        ] {
            if !value.is_positive() {
                return Err(ScenarioError::NonPositivePrice { field, value });
            }
        }
        if self.buyer_target >= self.seller_target {
            return Err(ScenarioError::TargetsNotOrdered {
                buyer: self.buyer_target,
                seller: self.seller_target,
            });
        }
        Ok(())
    }

    pub fn target_for(&self, role: Role) -> Price {
        match role {
            Role::Buyer => self.buyer_target,
            Role::Seller => self.seller_target,
        }
    }

    /// Rebuilds a scenario from a buyer and a seller knowledge base of the
    /// same listing. Returns `None` if the pair does not match.
    pub fn from_knowledge_bases(buyer: &KnowledgeBase, seller: &KnowledgeBase) -> Option<Scenario> {
        let shared = |b: &KnowledgeBase, s: &KnowledgeBase| {
            b.scenario_id == s.scenario_id
                && b.title == s.title
                && b.description == s.description
                && b.category == s.category
                && b.listing_price == s.listing_price
        };
        if buyer.role != Role::Buyer || seller.role != Role::Seller || !shared(buyer, seller) {
            return None;
        }
        Some(Scenario {
            id: buyer.scenario_id.clone(),
            title: buyer.title.clone(),
            description: buyer.description.clone(),
            category: buyer.category.clone(),
            listing_price: buyer.listing_price,
            buyer_target: buyer.target_price,
            seller_target: seller.target_price,
        })
    }
}

/// Private context handed to one agent: the listing and its own target only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub scenario_id: String,
    pub role: Role,
    pub title: String,
    pub description: String,
    pub category: String,
    pub listing_price: Price,
    pub target_price: Price,
}

pub fn knowledge_base(scenario: &Scenario, role: Role) -> KnowledgeBase {
    KnowledgeBase {
        scenario_id: scenario.id.clone(),
        role,
        title: scenario.title.clone(),
        description: scenario.description.clone(),
        category: scenario.category.clone(),
        listing_price: scenario.listing_price,
        target_price: scenario.target_for(role),
    }
}

/// Splits a scenario into `(buyer, seller)` knowledge bases.
pub fn build_knowledge_bases(scenario: &Scenario) -> (KnowledgeBase, KnowledgeBase) {
    (
        knowledge_base(scenario, Role::Buyer),
        knowledge_base(scenario, Role::Seller),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot sample {requested} scenarios from {available}")]
pub struct SampleError {
    pub requested: usize,
    pub available: usize,
}

/// Draws `n` distinct scenarios uniformly at random.
///
/// The selection depends only on `(scenarios, n, seed)`; the chosen
/// scenarios keep their relative order from the input.
pub fn sample_scenarios(scenarios: &[Scenario], n: usize, seed: u64) -> Result<Vec<Scenario>, SampleError> {
    if n > scenarios.len() {
        return Err(SampleError {
            requested: n,
            available: scenarios.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, scenarios.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| scenarios[i].clone()).collect())
}
