//! Non-learning policies and the greedy wrapper around a learned one.

use super::{policy_actions, PolicyNet, PolicyParams};
use crate::env::{
    candidate_attributes, preferred_action_type, Action, ActionSpace, ActionType, ConversationState, EnvConfig,
    UserSimulator, World,
};
use crate::error::{Error, Result};
use rand::{Rng, RngCore};

/// Everything a policy may look at when choosing an action.
pub struct ActContext<'a> {
    pub state: &'a ConversationState,
    pub space: &'a ActionSpace,
    pub sim: &'a UserSimulator,
    pub cfg: &'a EnvConfig,
    pub world: World<'a>,
}

pub trait ConversationPolicy: Send + Sync {
    fn name(&self) -> &str;
    fn act(&self, ctx: &ActContext<'_>, rng: &mut dyn RngCore) -> Result<Action>;
}

/// Asks the highest-entropy attribute while one remains, else recommends.
pub fn max_entropy_policy(space: &ActionSpace, k: usize) -> Result<Action> {
    if space.is_empty() {
        return Err(Error::NoActions);
    }
    Ok(match space.best_attr() {
        Some(p) => Action::AskAttribute(p),
        None => Action::RecommendItems(space.top_items(k)),
    })
}

/// Always recommends the top-`k` items.
pub fn abs_greedy_policy(space: &ActionSpace, k: usize) -> Result<Action> {
    if space.items.is_empty() {
        return Err(Error::NoActions);
    }
    Ok(Action::RecommendItems(space.top_items(k)))
}

/// Asks or recommends as the rule judge prefers.
pub fn two_action_rule_policy(
    state: &ConversationState,
    sim: &UserSimulator,
    k: usize,
    world: World<'_>,
) -> Result<Action> {
    let top_k = || -> Result<Vec<_>> {
        Ok(crate::env::ranked_candidates(state, world)?.into_iter().take(k).map(|(v, _)| v).collect())
    };
    if candidate_attributes(state, world.catalog).is_empty() {
        return Ok(Action::RecommendItems(top_k()?));
    }
    match preferred_action_type(state, sim, k, world)? {
        ActionType::Recommend => Ok(Action::RecommendItems(top_k()?)),
        ActionType::Ask => {
            let p = crate::env::rules_top_attribute(state, world)?.ok_or(Error::NoActions)?;
            Ok(Action::AskAttribute(p))
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MaxEntropy;

impl ConversationPolicy for MaxEntropy {
    fn name(&self) -> &str {
        "maxent"
    }

    fn act(&self, ctx: &ActContext<'_>, _rng: &mut dyn RngCore) -> Result<Action> {
        max_entropy_policy(ctx.space, ctx.cfg.k)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AbsGreedy;

impl ConversationPolicy for AbsGreedy {
    fn name(&self) -> &str {
        "absgreedy"
    }

    fn act(&self, ctx: &ActContext<'_>, _rng: &mut dyn RngCore) -> Result<Action> {
        abs_greedy_policy(ctx.space, ctx.cfg.k)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TwoActionRules;

impl ConversationPolicy for TwoActionRules {
    fn name(&self) -> &str {
        "rulejudge"
    }

    fn act(&self, ctx: &ActContext<'_>, _rng: &mut dyn RngCore) -> Result<Action> {
        two_action_rule_policy(ctx.state, ctx.sim, ctx.cfg.k, ctx.world)
    }
}

/// Uniform choice over the pre-selected action list.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformRandom;

impl ConversationPolicy for UniformRandom {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&self, ctx: &ActContext<'_>, rng: &mut dyn RngCore) -> Result<Action> {
        let actions = policy_actions(ctx.space);
        if actions.is_empty() {
            return Err(Error::NoActions);
        }
        let i = rng.gen_range(0..actions.len());
        Ok(actions[i].to_env(ctx.space, ctx.cfg.k))
    }
}

/// Learned policy acting greedily (argmax probability).
#[derive(Clone, Debug)]
pub struct GreedyLearned {
    pub net: PolicyNet,
    pub theta: PolicyParams,
    pub label: String,
}

impl ConversationPolicy for GreedyLearned {
    fn name(&self) -> &str {
        &self.label
    }

    fn act(&self, ctx: &ActContext<'_>, _rng: &mut dyn RngCore) -> Result<Action> {
        let actions = policy_actions(ctx.space);
        let dist = self.net.action_distribution(&self.theta, ctx.state, &actions, ctx.world)?;
        Ok(actions[dist.argmax()].to_env(ctx.space, ctx.cfg.k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingTable;
    use crate::env::fixtures::{catalog, state};
    use crate::ids::{AttrId, ItemId};

    fn space(items: &[(u32, f64)], attrs: &[(u32, f64)]) -> ActionSpace {
        ActionSpace {
            items: items.iter().map(|&(v, s)| (ItemId(v), s)).collect(),
            attrs: attrs.iter().map(|&(p, s)| (AttrId(p), s)).collect(),
        }
    }

    #[test]
    fn max_entropy_asks_best_attribute() {
        let sp = space(&[(0, 1.0)], &[(1, 0.3), (2, 0.1)]);
        assert_eq!(max_entropy_policy(&sp, 3).unwrap(), Action::AskAttribute(AttrId(1)));
        let tie = space(&[(0, 1.0)], &[(2, 0.3), (5, 0.3)]);
        assert_eq!(max_entropy_policy(&tie, 3).unwrap(), Action::AskAttribute(AttrId(2)));
    }

    #[test]
    fn max_entropy_recommends_without_attributes() {
        let sp = space(&[(4, 2.0), (1, 1.0), (3, 0.5)], &[]);
        assert_eq!(max_entropy_policy(&sp, 2).unwrap(), Action::RecommendItems(vec![ItemId(4), ItemId(1)]));
        assert!(matches!(max_entropy_policy(&space(&[], &[]), 2), Err(Error::NoActions)));
    }

    #[test]
    fn abs_greedy_takes_top_k() {
        let sp = space(&[(0, 3.0), (1, 1.0)], &[(0, 0.5)]);
        assert_eq!(abs_greedy_policy(&sp, 1).unwrap(), Action::RecommendItems(vec![ItemId(0)]));
        let three = space(&[(0, 3.0), (1, 1.0), (2, 0.0)], &[]);
        assert_eq!(
            abs_greedy_policy(&three, 10).unwrap(),
            Action::RecommendItems(vec![ItemId(0), ItemId(1), ItemId(2)])
        );
    }

    #[test]
    fn rules_recommend_small_candidate_sets() {
        let items: Vec<&[u32]> = vec![&[0, 1]; 8];
        let c = catalog(1, 2, &items);
        let e = EmbeddingTable::zeros(&c, 2);
        let w = World { catalog: &c, emb: &e };
        let sim = UserSimulator::new(ItemId(7), &c).unwrap();
        let s = state(&c, &[0], &[], &[]);
        assert!(matches!(two_action_rule_policy(&s, &sim, 3, w).unwrap(), Action::RecommendItems(v) if v.len() == 3));
    }

    #[test]
    fn rules_ask_top_entropy_attribute() {
        // twelve candidates: p1 on half, p2 on two; target is the last item
        let mut items: Vec<&[u32]> = vec![&[0, 1]; 6];
        items.extend([&[0, 2][..], &[0, 2]]);
        items.extend(vec![&[0][..]; 4]);
        let c = catalog(1, 3, &items);
        let e = EmbeddingTable::zeros(&c, 2);
        let w = World { catalog: &c, emb: &e };
        let sim = UserSimulator::new(ItemId(11), &c).unwrap();
        let s = state(&c, &[0], &[], &[]);
        assert_eq!(two_action_rule_policy(&s, &sim, 1, w).unwrap(), Action::AskAttribute(AttrId(1)));
    }

    #[test]
    fn rules_recommend_when_no_attribute_left() {
        let items: Vec<&[u32]> = vec![&[0]; 20];
        let c = catalog(1, 1, &items);
        let e = EmbeddingTable::zeros(&c, 2);
        let w = World { catalog: &c, emb: &e };
        let sim = UserSimulator::new(ItemId(19), &c).unwrap();
        let s = state(&c, &[0], &[], &[]);
        assert!(matches!(two_action_rule_policy(&s, &sim, 2, w).unwrap(), Action::RecommendItems(_)));
    }
}
