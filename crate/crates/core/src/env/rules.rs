//! Rule-based judgement of whether asking or recommending is preferable.

use super::scoring::{entropy_scores, ranked_candidates, target_rank};
use super::{candidate_attributes, ActionType, ConversationState, UserSimulator, World};
use crate::error::{Error, Result};
use crate::ids::AttrId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Judgement {
    AskBetter,
    RecommendBetter,
}

/// Candidate-set sizes and target ranks before (`b`), after asking (`a`) and
/// after recommending (`r`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RuleInputs {
    pub l_b: u64,
    pub k_b: u64,
    pub l_a: u64,
    pub k_a: u64,
    pub l_r: u64,
    pub k_r: u64,
}

pub fn rule_judge(x: &RuleInputs) -> Judgement {
    let margin = |after: u64, before: u64| after as i64 - before as i64;
    let k_a = margin(x.k_a, x.k_b);
    let l_a = margin(x.l_a, x.l_b);
    let k_r = margin(x.k_r, x.k_b);
    let l_r = margin(x.l_r, x.l_b);
    if x.l_b <= 50 {
        if x.l_b <= 10 {
            Judgement::RecommendBetter
        } else if k_a > k_r {
            Judgement::AskBetter
        } else {
            Judgement::RecommendBetter
        }
    } else if k_a as f64 + 0.5 * l_a as f64 > k_r as f64 + 0.5 * l_r as f64 {
        Judgement::AskBetter
    } else {
        Judgement::RecommendBetter
    }
}

/// The attribute the two-action heuristic would ask: the candidate attribute
/// with the largest entropy score, lowest id on ties.
pub(crate) fn top_entropy_attribute(state: &ConversationState, world: World<'_>) -> Result<Option<AttrId>> {
    let attrs = candidate_attributes(state, world.catalog);
    let scores = entropy_scores(state, &attrs, world)?;
    let mut best: Option<(AttrId, f64)> = None;
    for (p, s) in attrs.into_iter().zip(scores) {
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((p, s));
        }
    }
    Ok(best.map(|(p, _)| p))
}

/// Simulates both branches from `state` to produce the judge's inputs.
pub fn rule_counterfactuals(
    state: &ConversationState,
    sim: &UserSimulator,
    k: usize,
    world: World<'_>,
) -> Result<RuleInputs> {
    let target = sim.target;
    if !state.is_candidate(target) {
        return Err(Error::NotACandidate(target.0));
    }
    let l_b = state.candidates.len() as u64;
    let k_b = target_rank(state, target, world)? as u64;

    let (l_a, k_a) = match top_entropy_attribute(state, world)? {
        None => (l_b, k_b),
        Some(p) => {
            let mut asked = state.clone();
            if sim.accepts(p) {
                asked.accepted.insert(p);
                asked.refresh_candidates(world.catalog);
            } else {
                asked.rejected_attrs.insert(p);
            }
            (asked.candidates.len() as u64, target_rank(&asked, target, world)? as u64)
        }
    };

    let top: Vec<_> = ranked_candidates(state, world)?.into_iter().take(k).map(|(v, _)| v).collect();
    let (l_r, k_r) = if top.contains(&target) {
        (l_b, k_b)
    } else {
        let mut recommended = state.clone();
        recommended.rejected_items.extend(top);
        recommended.refresh_candidates(world.catalog);
        (recommended.candidates.len() as u64, target_rank(&recommended, target, world)? as u64)
    };
    Ok(RuleInputs { l_b, k_b, l_a, k_a, l_r, k_r })
}

/// The action type the rules prefer in `state`; recommending is forced when
/// no candidate attribute remains.
pub fn preferred_action_type(
    state: &ConversationState,
    sim: &UserSimulator,
    k: usize,
    world: World<'_>,
) -> Result<ActionType> {
    if candidate_attributes(state, world.catalog).is_empty() {
        return Ok(ActionType::Recommend);
    }
    Ok(match rule_judge(&rule_counterfactuals(state, sim, k, world)?) {
        Judgement::AskBetter => ActionType::Ask,
        Judgement::RecommendBetter => ActionType::Recommend,
    })
}
