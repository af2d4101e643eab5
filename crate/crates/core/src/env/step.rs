use super::rules::preferred_action_type;
use super::{candidate_attributes, Action, ConversationState, EnvConfig, RewardScheme, UserSimulator, World};
use crate::error::{Error, Result};
use std::collections::BTreeSet;

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: ConversationState,
    pub reward: f64,
    pub done: bool,
    pub success: bool,
}

fn validate(state: &ConversationState, action: &Action, cfg: &EnvConfig, world: World<'_>) -> Result<()> {
    match action {
        Action::AskAttribute(p) => {
            if !world.catalog.contains_attr(*p) {
                return Err(Error::invalid(format!("unknown attribute {p}")));
            }
            if !candidate_attributes(state, world.catalog).contains(p) {
                return Err(Error::invalid(format!("attribute {p} is not a candidate attribute")));
            }
        }
        Action::RecommendItems(list) => {
            if list.is_empty() || list.len() > cfg.k {
                return Err(Error::invalid(format!(
                    "recommendation list has {} items, expected 1..={}",
                    list.len(),
                    cfg.k
                )));
            }
            let mut seen = BTreeSet::new();
            for &v in list {
                if !world.catalog.contains_item(v) {
                    return Err(Error::invalid(format!("unknown item {v}")));
                }
                if !seen.insert(v) {
                    return Err(Error::invalid(format!("item {v} recommended twice")));
                }
                if !state.is_candidate(v) {
                    return Err(Error::invalid(format!("item {v} is not a candidate")));
                }
            }
        }
    }
    Ok(())
}

/// Applies the user's response to `action` and pays the scheme's reward.
pub fn step(
    state: &ConversationState,
    action: &Action,
    sim: &UserSimulator,
    scheme: &RewardScheme,
    cfg: &EnvConfig,
    world: World<'_>,
) -> Result<StepOutcome> {
    if state.finished || state.turn >= cfg.t_max {
        return Err(Error::EpisodeFinished);
    }
    validate(state, action, cfg, world)?;

    // the rules judge the state the action was taken in
    let rule_reward = match scheme {
        RewardScheme::RuleBased => {
            let preferred = preferred_action_type(state, sim, cfg.k, world)?;
            Some(if preferred == action.kind() { 1.0 } else { 0.0 })
        }
        _ => None,
    };

    let mut next = state.clone();
    next.turn += 1;
    let mut success = false;
    let mut accepted_attr = false;
    match action {
        Action::AskAttribute(p) => {
            if sim.accepts(*p) {
                next.accepted.insert(*p);
                next.refresh_candidates(world.catalog);
                accepted_attr = true;
            } else {
                next.rejected_attrs.insert(*p);
            }
        }
        Action::RecommendItems(list) => {
            if list.contains(&sim.target) {
                success = true;
            } else {
                next.rejected_items.extend(list.iter().copied());
                next.refresh_candidates(world.catalog);
            }
        }
    }
    let done = success || next.turn >= cfg.t_max;
    next.finished = done;
    let quit = done && !success;

    let reward = match scheme {
        RewardScheme::Sparse { success_reward, failure_reward } => {
            if success {
                *success_reward
            } else if quit {
                *failure_reward
            } else {
                0.0
            }
        }
        RewardScheme::Handcrafted(h) => {
            if quit {
                h.quit
            } else {
                match action {
                    Action::RecommendItems(_) if success => h.rec_suc,
                    Action::RecommendItems(_) => h.rec_fail,
                    Action::AskAttribute(_) if accepted_attr => h.ask_suc,
                    Action::AskAttribute(_) => h.ask_fail,
                }
            }
        }
        RewardScheme::RuleBased => rule_reward.unwrap_or(0.0),
    };
    Ok(StepOutcome { next_state: next, reward, done, success })
}
