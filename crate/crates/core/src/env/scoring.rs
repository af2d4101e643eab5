//! Item ranking scores, weighted-entropy attribute scores and action
//! pre-selection.

use super::{candidate_attributes, ConversationState, EnvConfig, World};
use crate::error::{Error, Result};
use crate::ids::{AttrId, ItemId};
use crate::math::dot;
use std::cmp::Ordering;

/// The pre-selected action set: top items by ranking score and top
/// attributes by weighted entropy, each sorted best first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ActionSpace {
    pub items: Vec<(ItemId, f64)>,
    pub attrs: Vec<(AttrId, f64)>,
}

impl ActionSpace {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty() && self.attrs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len() + self.attrs.len()
    }

    /// The recommendation list: the first `k` pre-selected items.
    pub fn top_items(&self, k: usize) -> Vec<ItemId> {
        self.items.iter().take(k).map(|(v, _)| *v).collect()
    }

    pub fn best_attr(&self) -> Option<AttrId> {
        self.attrs.first().map(|(p, _)| *p)
    }
}

fn missing(what: &str, id: impl std::fmt::Display) -> Error {
    Error::invalid(format!("no embedding for {what} {id}"))
}

/// `w(v) = e_u·e_v + Σ_{p∈P⁺} e_v·e_p − Σ_{p∈P⁻∩P_v} e_v·e_p`.
pub fn item_score(state: &ConversationState, v: ItemId, world: World<'_>) -> Result<f64> {
    let emb = world.emb;
    let ev = emb.item(v).ok_or_else(|| missing("item", v))?;
    let eu = emb.user(state.user).ok_or_else(|| missing("user", state.user))?;
    let mut w = dot(eu, ev);
    for &p in &state.accepted {
        w += dot(ev, emb.attr(p).ok_or_else(|| missing("attribute", p))?);
    }
    if world.catalog.contains_item(v) {
        for &p in &state.rejected_attrs {
            if world.catalog.item_has_attr(v, p) {
                w -= dot(ev, emb.attr(p).ok_or_else(|| missing("attribute", p))?);
            }
        }
    }
    Ok(w)
}

fn desc_then_id<T: Ord>(a: &(T, f64), b: &(T, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Candidates with their scores, best first, ties by ascending id.
pub fn ranked_candidates(state: &ConversationState, world: World<'_>) -> Result<Vec<(ItemId, f64)>> {
    let mut scored =
        state.candidates.iter().map(|&v| item_score(state, v, world).map(|s| (v, s))).collect::<Result<Vec<_>>>()?;
    scored.sort_by(desc_then_id);
    Ok(scored)
}

/// 1-based rank of `target` among the ranked candidates.
pub fn target_rank(state: &ConversationState, target: ItemId, world: World<'_>) -> Result<usize> {
    if !state.is_candidate(target) {
        return Err(Error::NotACandidate(target.0));
    }
    let ts = item_score(state, target, world)?;
    let mut rank = 1;
    for &v in &state.candidates {
        if v == target {
            continue;
        }
        let s = item_score(state, v, world)?;
        if s > ts || (s == ts && v < target) {
            rank += 1;
        }
    }
    Ok(rank)
}

/// `−prob·ln(prob)`, with the limit value 0 at prob ∈ {0, 1}.
pub fn weighted_entropy(prob: f64) -> f64 {
    if prob <= 0.0 || prob >= 1.0 {
        0.0
    } else {
        -prob * prob.ln()
    }
}

struct CandidateWeights {
    weights: Vec<f64>,
    total: f64,
}

fn candidate_weights(state: &ConversationState, world: World<'_>) -> Result<CandidateWeights> {
    let weights = state.candidates.iter().map(|&v| item_score(state, v, world)).collect::<Result<Vec<_>>>()?;
    let total = weights.iter().sum();
    Ok(CandidateWeights { weights, total })
}

fn weighted_prob(state: &ConversationState, p: AttrId, cw: &CandidateWeights, world: World<'_>) -> f64 {
    let covered: f64 = state
        .candidates
        .iter()
        .zip(&cw.weights)
        .filter(|(v, _)| world.catalog.item_has_attr(**v, p))
        .map(|(_, w)| w)
        .sum();
    covered / cw.total
}

fn unweighted_prob(state: &ConversationState, p: AttrId, world: World<'_>) -> f64 {
    if state.candidates.is_empty() {
        return 0.0;
    }
    let n = state.candidates.iter().filter(|v| world.catalog.item_has_attr(**v, p)).count();
    n as f64 / state.candidates.len() as f64
}

/// Weighted-entropy score of asking `p`.
///
/// Fails with [`Error::DegenerateWeights`] when the candidates' total ranking
/// weight is not positive, or when mixed-sign weights push the weighted
/// coverage outside `[0, 1]`.
pub fn attribute_entropy_score(state: &ConversationState, p: AttrId, world: World<'_>) -> Result<f64> {
    if !world.catalog.contains_attr(p) {
        return Err(Error::invalid(format!("unknown attribute {p}")));
    }
    let cw = candidate_weights(state, world)?;
    if cw.total.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::DegenerateWeights(cw.total));
    }
    let prob = weighted_prob(state, p, &cw, world);
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::DegenerateWeights(cw.total));
    }
    Ok(weighted_entropy(prob))
}

/// Entropy scores for `attrs`. If the weighted form is degenerate for any
/// attribute, every attribute falls back to the unweighted coverage
/// `|cand ∩ V_p| / |cand|`.
pub fn entropy_scores(state: &ConversationState, attrs: &[AttrId], world: World<'_>) -> Result<Vec<f64>> {
    let cw = candidate_weights(state, world)?;
    if cw.total > 0.0 {
        let probs: Vec<f64> = attrs.iter().map(|&p| weighted_prob(state, p, &cw, world)).collect();
        if probs.iter().all(|p| (0.0..=1.0).contains(p)) {
            return Ok(probs.into_iter().map(weighted_entropy).collect());
        }
    }
    Ok(attrs.iter().map(|&p| weighted_entropy(unweighted_prob(state, p, world))).collect())
}

/// Top-`k_v` candidate items and top-`k_p` candidate attributes.
pub fn select_action_space(state: &ConversationState, cfg: &EnvConfig, world: World<'_>) -> Result<ActionSpace> {
    if cfg.k_v < cfg.k {
        return Err(Error::invalid(format!("k_v {} < k {}", cfg.k_v, cfg.k)));
    }
    let mut items = ranked_candidates(state, world)?;
    items.truncate(cfg.k_v);

    let cand_attrs = candidate_attributes(state, world.catalog);
    let scores = entropy_scores(state, &cand_attrs, world)?;
    let mut attrs: Vec<(AttrId, f64)> = cand_attrs.into_iter().zip(scores).collect();
    attrs.sort_by(desc_then_id);
    attrs.truncate(cfg.k_p);
    Ok(ActionSpace { items, attrs })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::{catalog, state};
    use super::*;
    use crate::catalog::Catalog;
    use crate::embedding::EmbeddingTable;
    use crate::ids::UserId;

    /// Embedding table with explicit rows; relations zero.
    pub(crate) fn table(dim: usize, users: &[&[f64]], items: &[&[f64]], attrs: &[&[f64]]) -> EmbeddingTable {
        EmbeddingTable::new(dim, users.concat(), items.concat(), attrs.concat(), [vec![0.0; dim], vec![0.0; dim]])
            .unwrap()
    }

    /// Makes `item_score` equal `scores[v]` when nothing is accepted:
    /// e_u = (1, 0) and e_v = (score, 0).
    fn scored_world(scores: &[f64], attrs: &[&[u32]], n_attrs: usize) -> (Catalog, EmbeddingTable) {
        let c = catalog(1, n_attrs, attrs);
        let items: Vec<Vec<f64>> = scores.iter().map(|&s| vec![s, 0.0]).collect();
        let item_refs: Vec<&[f64]> = items.iter().map(|v| v.as_slice()).collect();
        let attr_rows = vec![vec![0.0, 0.0]; n_attrs];
        let attr_refs: Vec<&[f64]> = attr_rows.iter().map(|v| v.as_slice()).collect();
        (c, table(2, &[&[1.0, 0.0]], &item_refs, &attr_refs))
    }

    #[test]
    fn item_score_zero_embeddings() {
        let c = catalog(1, 2, &[&[0, 1]]);
        let e = EmbeddingTable::zeros(&c, 3);
        let s = state(&c, &[0], &[1], &[]);
        assert_eq!(item_score(&s, ItemId(0), World { catalog: &c, emb: &e }).unwrap(), 0.0);
    }

    #[test]
    fn item_score_hand_example() {
        // v0 holds p1 (accepted) and p2 (rejected)
        let c = catalog(1, 3, &[&[1, 2]]);
        let e = table(2, &[&[1.0, 0.0]], &[&[1.0, 1.0]], &[&[9.0, 9.0], &[0.0, 1.0], &[1.0, 0.0]]);
        let mut s = state(&c, &[1], &[], &[]);
        s.rejected_attrs.insert(AttrId(2));
        let w = World { catalog: &c, emb: &e };
        assert!((item_score(&s, ItemId(0), w).unwrap() - 1.0).abs() < 1e-15);

        let bare = state(&c, &[], &[], &[]);
        assert_eq!(item_score(&bare, ItemId(0), w).unwrap(), 1.0);
    }

    #[test]
    fn item_score_missing_embedding() {
        let c = catalog(1, 1, &[&[0]]);
        let e = table(2, &[&[1.0, 0.0]], &[], &[&[0.0, 0.0]]);
        let s = state(&c, &[], &[], &[]);
        assert!(matches!(item_score(&s, ItemId(0), World { catalog: &c, emb: &e }), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn entropy_values() {
        assert_eq!(weighted_entropy(1.0), 0.0);
        assert_eq!(weighted_entropy(0.0), 0.0);
        assert!((weighted_entropy(0.5) - 0.34657359).abs() < 1e-8);
        let peak = weighted_entropy(1.0 / std::f64::consts::E);
        assert!((peak - 0.36787944).abs() < 1e-8);
        for i in 1..1000 {
            assert!(weighted_entropy(i as f64 / 1000.0) <= peak + 1e-15);
        }
    }

    #[test]
    fn attribute_in_every_candidate_scores_zero() {
        let (c, e) = scored_world(&[1.0, 2.0], &[&[0, 1], &[0]], 2);
        let s = state(&c, &[], &[], &[]);
        let w = World { catalog: &c, emb: &e };
        assert_eq!(attribute_entropy_score(&s, AttrId(0), w).unwrap(), 0.0);
    }

    #[test]
    fn weighted_half_coverage() {
        let (c, e) = scored_world(&[1.0, 1.0], &[&[0, 1], &[0]], 2);
        let s = state(&c, &[], &[], &[]);
        let w = World { catalog: &c, emb: &e };
        let h = attribute_entropy_score(&s, AttrId(1), w).unwrap();
        assert!((h - 0.5f64.ln().abs() * 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_weights_fall_back_to_counts() {
        let (c, e) = scored_world(&[-1.0, -2.0], &[&[0, 1], &[0]], 2);
        let s = state(&c, &[], &[], &[]);
        let w = World { catalog: &c, emb: &e };
        assert!(matches!(attribute_entropy_score(&s, AttrId(1), w), Err(Error::DegenerateWeights(_))));
        let scores = entropy_scores(&s, &[AttrId(1)], w).unwrap();
        assert!((scores[0] - weighted_entropy(0.5)).abs() < 1e-15);
    }

    #[test]
    fn select_action_space_caps_and_ties() {
        let (c, e) = scored_world(&[1.0; 5], &[&[0], &[0], &[0], &[0], &[0]], 1);
        let s = state(&c, &[], &[], &[]);
        let w = World { catalog: &c, emb: &e };
        let cfg = EnvConfig { t_max: 15, k: 3, k_v: 10, k_p: 10 };
        let space = select_action_space(&s, &cfg, w).unwrap();
        let ids: Vec<u32> = space.items.iter().map(|(v, _)| v.0).collect();
        assert_eq!(ids, vec![0, 1, 2, 3, 4]);

        let (c, e) = scored_world(&[3.0, 1.0, 2.0], &[&[0], &[0], &[0]], 1);
        let s = state(&c, &[], &[], &[]);
        let cfg = EnvConfig { t_max: 15, k: 1, k_v: 2, k_p: 10 };
        let space = select_action_space(&s, &cfg, World { catalog: &c, emb: &e }).unwrap();
        assert_eq!(space.top_items(2), vec![ItemId(0), ItemId(2)]);
    }

    #[test]
    fn select_action_space_requires_kv_at_least_k() {
        let (c, e) = scored_world(&[1.0], &[&[0]], 1);
        let s = state(&c, &[], &[], &[]);
        let cfg = EnvConfig { t_max: 15, k: 10, k_v: 5, k_p: 10 };
        assert!(select_action_space(&s, &cfg, World { catalog: &c, emb: &e }).is_err());
    }

    #[test]
    fn target_rank_cases() {
        let (c, e) = scored_world(&[2.0, 5.0], &[&[0], &[0]], 1);
        let w = World { catalog: &c, emb: &e };
        let s = state(&c, &[], &[], &[]);
        assert_eq!(target_rank(&s, ItemId(0), w).unwrap(), 2);

        let single = state(&c, &[], &[], &[1]);
        assert_eq!(target_rank(&single, ItemId(0), w).unwrap(), 1);
        assert!(matches!(target_rank(&single, ItemId(1), w), Err(Error::NotACandidate(1))));

        let (c, e) = scored_world(&[1.0, 1.0], &[&[0], &[0]], 1);
        let s = state(&c, &[], &[], &[]);
        assert_eq!(target_rank(&s, ItemId(0), World { catalog: &c, emb: &e }).unwrap(), 1);
        let _ = UserId(0);
    }
}
