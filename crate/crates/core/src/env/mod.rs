//! The conversational-recommendation MDP and its user simulator.

mod rules;
mod scoring;
mod step;
mod trace;

pub(crate) use rules::top_entropy_attribute as rules_top_attribute;
pub use rules::{preferred_action_type, rule_counterfactuals, rule_judge, Judgement, RuleInputs};
pub use scoring::{
    attribute_entropy_score, entropy_scores, item_score, ranked_candidates, select_action_space, target_rank,
    weighted_entropy, ActionSpace,
};
pub use step::{step, StepOutcome};
pub use trace::{write_trace_jsonl, TraceRecord};

use crate::catalog::Catalog;
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::ids::{AttrId, ItemId, UserId};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Read-only world shared by every episode.
#[derive(Clone, Copy, Debug)]
pub struct World<'a> {
    pub catalog: &'a Catalog,
    pub emb: &'a EmbeddingTable,
}

impl<'a> World<'a> {
    pub fn new(catalog: &'a Catalog, emb: &'a EmbeddingTable) -> Result<Self> {
        emb.covers(catalog)?;
        Ok(World { catalog, emb })
    }
}

/// Turn budget, recommendation list size and pre-selection caps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub t_max: usize,
    pub k: usize,
    pub k_v: usize,
    pub k_p: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig { t_max: 15, k: 10, k_v: 10, k_p: 10 }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 || self.k == 0 {
            return Err(Error::invalid("t_max and k must be at least 1"));
        }
        if self.k_v < self.k {
            return Err(Error::invalid(format!("k_v {} must be at least k {}", self.k_v, self.k)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    AskAttribute(AttrId),
    RecommendItems(Vec<ItemId>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionType {
    Ask,
    Recommend,
}

impl Action {
    pub fn kind(&self) -> ActionType {
        match self {
            Action::AskAttribute(_) => ActionType::Ask,
            Action::RecommendItems(_) => ActionType::Recommend,
        }
    }
}

/// Conversation state `(P⁺, P⁻, V⁻, V^cand, turn)` for one user.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConversationState {
    pub user: UserId,
    pub accepted: BTreeSet<AttrId>,
    pub rejected_attrs: BTreeSet<AttrId>,
    pub rejected_items: BTreeSet<ItemId>,
    /// `V_{P⁺} \ V⁻`, ascending.
    pub candidates: Vec<ItemId>,
    pub turn: usize,
    /// Set once a step reports `done`.
    pub finished: bool,
}

impl ConversationState {
    /// Builds a state and derives its candidate set from the catalog.
    pub fn new(
        user: UserId,
        accepted: BTreeSet<AttrId>,
        rejected_attrs: BTreeSet<AttrId>,
        rejected_items: BTreeSet<ItemId>,
        turn: usize,
        catalog: &Catalog,
    ) -> Self {
        let candidates = candidate_items(&accepted, &rejected_items, catalog);
        ConversationState { user, accepted, rejected_attrs, rejected_items, candidates, turn, finished: false }
    }

    pub fn is_candidate(&self, v: ItemId) -> bool {
        self.candidates.binary_search(&v).is_ok()
    }

    pub fn candidate_attributes(&self, catalog: &Catalog) -> Vec<AttrId> {
        candidate_attributes(self, catalog)
    }

    pub(crate) fn refresh_candidates(&mut self, catalog: &Catalog) {
        self.candidates = candidate_items(&self.accepted, &self.rejected_items, catalog);
    }
}

/// The simulated user: every attribute of the target item is accepted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserSimulator {
    pub target: ItemId,
    pub oracle_attrs: BTreeSet<AttrId>,
}

impl UserSimulator {
    pub fn new(target: ItemId, catalog: &Catalog) -> Result<Self> {
        if !catalog.contains_item(target) {
            return Err(Error::invalid(format!("unknown target item {target}")));
        }
        Ok(UserSimulator { target, oracle_attrs: catalog.item_attrs(target).iter().copied().collect() })
    }

    pub fn accepts(&self, p: AttrId) -> bool {
        self.oracle_attrs.contains(&p)
    }
}

/// Per-event values of the handcrafted reward.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandcraftedRewards {
    pub rec_suc: f64,
    pub rec_fail: f64,
    pub ask_suc: f64,
    pub ask_fail: f64,
    pub quit: f64,
}

impl Default for HandcraftedRewards {
    fn default() -> Self {
        HandcraftedRewards { rec_suc: 1.0, rec_fail: -0.1, ask_suc: 0.1, ask_fail: -0.1, quit: -0.3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RewardScheme {
    Sparse { success_reward: f64, failure_reward: f64 },
    Handcrafted(HandcraftedRewards),
    RuleBased,
}

impl Default for RewardScheme {
    fn default() -> Self {
        RewardScheme::sparse()
    }
}

impl RewardScheme {
    pub fn sparse() -> Self {
        RewardScheme::Sparse { success_reward: 1.0, failure_reward: -1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RewardScheme::Sparse { success_reward, failure_reward } => {
                if success_reward > 0.0 && failure_reward < 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("sparse rewards need success > 0 > failure"))
                }
            }
            RewardScheme::Handcrafted(h) => {
                if [h.rec_suc, h.rec_fail, h.ask_suc, h.ask_fail, h.quit].iter().all(|x| x.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::invalid("handcrafted rewards must be finite"))
                }
            }
            RewardScheme::RuleBased => Ok(()),
        }
    }
}

/// Starts a conversation: the user volunteers one attribute of the target,
/// drawn uniformly from `P_v`.
pub fn initial_state<R: Rng + ?Sized>(
    user: UserId,
    sim: &UserSimulator,
    catalog: &Catalog,
    rng: &mut R,
) -> Result<ConversationState> {
    if !catalog.contains_user(user) {
        return Err(Error::invalid(format!("unknown user {user}")));
    }
    if sim.oracle_attrs.is_empty() {
        return Err(Error::invalid(format!("target {} has no attributes", sim.target)));
    }
    let idx = rng.gen_range(0..sim.oracle_attrs.len());
    let first = *sim.oracle_attrs.iter().nth(idx).expect("index in range");
    Ok(ConversationState::new(user, BTreeSet::from([first]), BTreeSet::new(), BTreeSet::new(), 0, catalog))
}

/// `V_{P⁺} \ V⁻` in ascending id order.
pub fn candidate_items(
    accepted: &BTreeSet<AttrId>,
    rejected_items: &BTreeSet<ItemId>,
    catalog: &Catalog,
) -> Vec<ItemId> {
    let base: Vec<ItemId> = match accepted.iter().min_by_key(|p| catalog.items_with_attr(**p).len()) {
        None => catalog.items().collect(),
        Some(&rarest) => catalog
            .items_with_attr(rarest)
            .iter()
            .copied()
            .filter(|&v| accepted.iter().all(|&p| catalog.item_has_attr(v, p)))
            .collect(),
    };
    base.into_iter().filter(|v| !rejected_items.contains(v)).collect()
}

/// Attributes held by at least one candidate, minus `P⁺ ∪ P⁻`; ascending.
pub fn candidate_attributes(state: &ConversationState, catalog: &Catalog) -> Vec<AttrId> {
    let mut out = BTreeSet::new();
    for &v in &state.candidates {
        for &p in catalog.item_attrs(v) {
            if !state.accepted.contains(&p) && !state.rejected_attrs.contains(&p) {
                out.insert(p);
            }
        }
    }
    out.into_iter().collect()
}
