//! The softmax policy over the pre-selected action space.
//!
//! Each pre-selected attribute or item is an action. An action's score is
//! `w_2ᵀ tanh(W_1 [h; e_a] + b_1) + b_2`, where `h` is the encoded state and
//! `e_a` the action's embedding; the policy is the softmax of the scores.
//! Choosing an item action recommends the top-`K` pre-selected items.

mod adam;
mod baselines;
mod encoder;

pub use adam::{apply_gradient, OptimizerState};
pub use baselines::{
    abs_greedy_policy, max_entropy_policy, two_action_rule_policy, AbsGreedy, ActContext, ConversationPolicy,
    GreedyLearned, MaxEntropy, TwoActionRules, UniformRandom,
};
pub use encoder::{MeanPoolEncoder, StateEncoder};

use crate::checkpoint::NamedArrays;
use crate::env::{Action, ActionSpace, ConversationState, World};
use crate::error::{Error, Result};
use crate::ids::{AttrId, ItemId};
use crate::math::{axpy, dot, log_sum_exp, softmax};
use crate::params::{self, ParamBlock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::sync::Arc;

/// One entry of the policy's action list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolicyAction {
    Ask(AttrId),
    Item(ItemId),
}

impl PolicyAction {
    /// The environment action this entry stands for.
    pub fn to_env(self, space: &ActionSpace, k: usize) -> Action {
        match self {
            PolicyAction::Ask(p) => Action::AskAttribute(p),
            PolicyAction::Item(_) => Action::RecommendItems(space.top_items(k)),
        }
    }

    fn embedding<'w>(self, world: World<'w>) -> Result<&'w [f64]> {
        match self {
            PolicyAction::Ask(p) => {
                world.emb.attr(p).ok_or_else(|| Error::invalid(format!("no embedding for attribute {p}")))
            }
            PolicyAction::Item(v) => {
                world.emb.item(v).ok_or_else(|| Error::invalid(format!("no embedding for item {v}")))
            }
        }
    }
}

/// Attributes first, then items, each in pre-selection order.
pub fn policy_actions(space: &ActionSpace) -> Vec<PolicyAction> {
    space
        .attrs
        .iter()
        .map(|(p, _)| PolicyAction::Ask(*p))
        .chain(space.items.iter().map(|(v, _)| PolicyAction::Item(*v)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionDistribution {
    pub actions: Vec<PolicyAction>,
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl ActionDistribution {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

/// Flat policy parameter vector `θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams(pub Vec<f64>);

impl PolicyParams {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Architecture of the policy: a state encoder plus the scoring head.
#[derive(Clone, Debug)]
pub struct PolicyNet {
    encoder: Arc<dyn StateEncoder>,
    dim: usize,
    head_hidden: usize,
}

/// Intermediate values of one forward pass.
struct Forward {
    x: Vec<f64>,
    h: Vec<f64>,
    /// `[h; e_a]` per action.
    inputs: Vec<Vec<f64>>,
    /// `tanh(W_1 [h; e_a] + b_1)` per action.
    hidden: Vec<Vec<f64>>,
    scores: Vec<f64>,
}

struct HeadView<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
}

impl PolicyNet {
    /// Mean-pool encoder over embeddings of dimension `dim`.
    pub fn mean_pool(dim: usize, hidden: usize, head_hidden: usize, pool_top_n: usize) -> Self {
        PolicyNet::with_encoder(Arc::new(MeanPoolEncoder { dim, hidden, pool_top_n }), dim, head_hidden)
    }

    pub fn with_encoder(encoder: Arc<dyn StateEncoder>, dim: usize, head_hidden: usize) -> Self {
        PolicyNet { encoder, dim, head_hidden }
    }

    pub fn encoder(&self) -> &dyn StateEncoder {
        self.encoder.as_ref()
    }

    fn head_input_dim(&self) -> usize {
        self.encoder.output_dim() + self.dim
    }

    pub fn param_blocks(&self) -> Vec<ParamBlock> {
        let m = self.head_hidden;
        let mut blocks = self.encoder.param_blocks();
        blocks.push(ParamBlock::new("W_1", &[m, self.head_input_dim()]));
        blocks.push(ParamBlock::new("b_1", &[m]));
        blocks.push(ParamBlock::new("w_2", &[m]));
        blocks.push(ParamBlock::new("b_2", &[1]));
        blocks
    }

    pub fn param_count(&self) -> usize {
        self.param_blocks().iter().map(ParamBlock::len).sum()
    }

    /// Uniform `±1/√fan_in` weights, zero biases.
    pub fn init(&self, seed: u64) -> PolicyParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(self.param_count());
        for b in self.param_blocks() {
            if b.shape.len() == 2 {
                let bound = 1.0 / (b.shape[1] as f64).sqrt();
                out.extend((0..b.len()).map(|_| rng.gen_range(-bound..bound)));
            } else if b.name == "w_2" {
                let bound = 1.0 / (b.len() as f64).sqrt();
                out.extend((0..b.len()).map(|_| rng.gen_range(-bound..bound)));
            } else {
                out.extend(std::iter::repeat_n(0.0, b.len()));
            }
        }
        PolicyParams(out)
    }

    fn check(&self, theta: &PolicyParams) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::invalid(format!(
                "policy has {} parameters, expected {}",
                theta.len(),
                self.param_count()
            )));
        }
        Ok(())
    }

    fn head<'a>(&self, theta: &'a [f64]) -> HeadView<'a> {
        let off = self.encoder.param_count();
        let m = self.head_hidden;
        let n_w1 = m * self.head_input_dim();
        HeadView {
            w1: &theta[off..off + n_w1],
            b1: &theta[off + n_w1..off + n_w1 + m],
            w2: &theta[off + n_w1 + m..off + n_w1 + 2 * m],
        }
    }

    /// `h = encoder(state)`.
    pub fn encode_state(&self, theta: &PolicyParams, state: &ConversationState, world: World<'_>) -> Result<Vec<f64>> {
        self.check(theta)?;
        let x = self.encoder.input_features(state, world)?;
        Ok(self.encoder.forward(&theta.0[..self.encoder.param_count()], &x))
    }

    fn forward(
        &self,
        theta: &PolicyParams,
        state: &ConversationState,
        actions: &[PolicyAction],
        world: World<'_>,
    ) -> Result<Forward> {
        self.check(theta)?;
        if actions.is_empty() {
            return Err(Error::NoActions);
        }
        let enc_n = self.encoder.param_count();
        let x = self.encoder.input_features(state, world)?;
        let h = self.encoder.forward(&theta.0[..enc_n], &x);
        let head = self.head(&theta.0);
        let b2 = theta.0[theta.len() - 1];
        let m = self.head_hidden;
        let mut inputs = Vec::with_capacity(actions.len());
        let mut hidden = Vec::with_capacity(actions.len());
        let mut scores = Vec::with_capacity(actions.len());
        for a in actions {
            let mut input = h.clone();
            input.extend_from_slice(a.embedding(world)?);
            let mut y = vec![0.0; m];
            crate::math::affine(head.w1, head.b1, &input, &mut y);
            y.iter_mut().for_each(|v| *v = v.tanh());
            scores.push(dot(head.w2, &y) + b2);
            inputs.push(input);
            hidden.push(y);
        }
        Ok(Forward { x, h, inputs, hidden, scores })
    }

    /// Raw action scores (logits).
    pub fn action_scores(
        &self,
        theta: &PolicyParams,
        state: &ConversationState,
        actions: &[PolicyAction],
        world: World<'_>,
    ) -> Result<Vec<f64>> {
        Ok(self.forward(theta, state, actions, world)?.scores)
    }

    pub fn action_distribution(
        &self,
        theta: &PolicyParams,
        state: &ConversationState,
        actions: &[PolicyAction],
        world: World<'_>,
    ) -> Result<ActionDistribution> {
        let f = self.forward(theta, state, actions, world)?;
        Ok(distribution_from_scores(actions.to_vec(), &f.scores))
    }

    /// `ln π(chosen | state)` and its gradient in `θ`.
    pub fn log_prob_and_grad(
        &self,
        theta: &PolicyParams,
        state: &ConversationState,
        actions: &[PolicyAction],
        chosen: usize,
        world: World<'_>,
    ) -> Result<(f64, Vec<f64>)> {
        if chosen >= actions.len() {
            return Err(Error::invalid(format!("action index {chosen} out of range {}", actions.len())));
        }
        let f = self.forward(theta, state, actions, world)?;
        let probs = softmax(&f.scores);
        let log_prob = f.scores[chosen] - log_sum_exp(&f.scores);
        let coef = softmax_log_prob_grad(&probs, chosen);

        let enc_n = self.encoder.param_count();
        let m = self.head_hidden;
        let in_dim = self.head_input_dim();
        let h_dim = self.encoder.output_dim();
        let head = self.head(&theta.0);
        let mut grad = vec![0.0; theta.len()];
        let mut dh = vec![0.0; h_dim];
        {
            let (_, head_grad) = grad.split_at_mut(enc_n);
            let (g_w1, rest) = head_grad.split_at_mut(m * in_dim);
            let (g_b1, rest) = rest.split_at_mut(m);
            let (g_w2, _g_b2) = rest.split_at_mut(m);
            for (a, &c) in coef.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let y = &f.hidden[a];
                axpy(c, y, g_w2);
                for r in 0..m {
                    let dz = c * head.w2[r] * (1.0 - y[r] * y[r]);
                    if dz == 0.0 {
                        continue;
                    }
                    g_b1[r] += dz;
                    let row = &head.w1[r * in_dim..(r + 1) * in_dim];
                    axpy(dz, &f.inputs[a], &mut g_w1[r * in_dim..(r + 1) * in_dim]);
                    axpy(dz, &row[..h_dim], &mut dh);
                }
            }
            // b_2 shifts every score equally, so its gradient is Σ coef = 0
        }
        self.encoder.backward(&theta.0[..enc_n], &f.x, &f.h, &dh, &mut grad[..enc_n]);
        Ok((log_prob, grad))
    }

    /// `∇_θ ln π(chosen | state)`.
    pub fn log_prob_grad(
        &self,
        theta: &PolicyParams,
        state: &ConversationState,
        actions: &[PolicyAction],
        chosen: usize,
        world: World<'_>,
    ) -> Result<Vec<f64>> {
        self.log_prob_and_grad(theta, state, actions, chosen, world).map(|(_, g)| g)
    }

    pub fn log_prob(
        &self,
        theta: &PolicyParams,
        state: &ConversationState,
        actions: &[PolicyAction],
        chosen: usize,
        world: World<'_>,
    ) -> Result<f64> {
        if chosen >= actions.len() {
            return Err(Error::invalid(format!("action index {chosen} out of range {}", actions.len())));
        }
        let f = self.forward(theta, state, actions, world)?;
        Ok(f.scores[chosen] - log_sum_exp(&f.scores))
    }

    pub fn to_arrays(&self, theta: &PolicyParams) -> Result<NamedArrays> {
        self.check(theta)?;
        let meta = json!({
            "kind": "policy",
            "dim": self.dim,
            "hidden": self.encoder.output_dim(),
            "head_hidden": self.head_hidden,
        });
        Ok(params::to_arrays(&self.param_blocks(), &theta.0, meta))
    }

    pub fn params_from_arrays(&self, arrays: &NamedArrays) -> Result<PolicyParams> {
        params::from_arrays(&self.param_blocks(), arrays).map(PolicyParams)
    }
}

/// `∂ ln softmax(s)_chosen / ∂s = onehot(chosen) − probs`.
pub fn softmax_log_prob_grad(probs: &[f64], chosen: usize) -> Vec<f64> {
    probs.iter().enumerate().map(|(i, p)| if i == chosen { 1.0 - p } else { -p }).collect()
}

pub fn distribution_from_scores(actions: Vec<PolicyAction>, scores: &[f64]) -> ActionDistribution {
    let lse = log_sum_exp(scores);
    let log_probs: Vec<f64> = scores.iter().map(|s| s - lse).collect();
    let probs = log_probs.iter().map(|l| l.exp()).collect();
    ActionDistribution { actions, probs, log_probs }
}
