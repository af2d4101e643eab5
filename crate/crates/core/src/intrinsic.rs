//! The learned intrinsic reward `r_φ(s, a)`.
//!
//! Features are built from embeddings and the conversation state only, so
//! the reward never depends on the policy parameters.

use crate::checkpoint::NamedArrays;
use crate::embedding::EmbeddingTable;
use crate::env::{Action, ConversationState};
use crate::error::{Error, Result};
use crate::math::{affine, dot, mean_of};
use crate::params::{self, ParamBlock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// `[mean e_{P⁺}; mean e_{P⁻}; mean e_{V⁻}; e_u; e_a; type; t/T_max]`,
/// with type 0 for asking and 1 for recommending.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardFeatures(pub Vec<f64>);

impl RewardFeatures {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardParams(pub Vec<f64>);

impl RewardParams {
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

pub fn feature_len(dim: usize) -> usize {
    5 * dim + 2
}

pub fn reward_features(
    state: &ConversationState,
    action: &Action,
    t_max: usize,
    emb: &EmbeddingTable,
) -> Result<RewardFeatures> {
    let d = emb.dim();
    let missing = |what: String| Error::invalid(format!("no embedding for {what}"));
    let mut f = Vec::with_capacity(feature_len(d));
    f.extend(mean_of(d, state.accepted.iter().filter_map(|p| emb.attr(*p))));
    f.extend(mean_of(d, state.rejected_attrs.iter().filter_map(|p| emb.attr(*p))));
    f.extend(mean_of(d, state.rejected_items.iter().filter_map(|v| emb.item(*v))));
    f.extend_from_slice(emb.user(state.user).ok_or_else(|| missing(format!("user {}", state.user)))?);
    let flag = match action {
        Action::AskAttribute(p) => {
            f.extend_from_slice(emb.attr(*p).ok_or_else(|| missing(format!("attribute {p}")))?);
            0.0
        }
        Action::RecommendItems(list) => {
            let rows = list
                .iter()
                .map(|v| emb.item(*v).ok_or_else(|| missing(format!("item {v}"))))
                .collect::<Result<Vec<_>>>()?;
            f.extend(mean_of(d, rows));
            1.0
        }
    };
    f.push(flag);
    f.push(if t_max == 0 { 0.0 } else { state.turn as f64 / t_max as f64 });
    Ok(RewardFeatures(f))
}

/// `r = tanh(u_2ᵀ tanh(U_1 f + c_1) + c_2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RewardNet {
    pub input: usize,
    pub hidden: usize,
}

impl RewardNet {
    pub fn for_dim(dim: usize, hidden: usize) -> Self {
        RewardNet { input: feature_len(dim), hidden }
    }

    pub fn param_blocks(&self) -> Vec<ParamBlock> {
        vec![
            ParamBlock::new("U_1", &[self.hidden, self.input]),
            ParamBlock::new("c_1", &[self.hidden]),
            ParamBlock::new("u_2", &[self.hidden]),
            ParamBlock::new("c_2", &[1]),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.hidden * self.input + 2 * self.hidden + 1
    }

    pub fn zeros(&self) -> RewardParams {
        RewardParams(vec![0.0; self.param_count()])
    }

    /// Small random `U_1`, everything else zero: the reward starts at
    /// exactly zero while `∂r/∂u_2` is already nonzero.
    pub fn init(&self, seed: u64) -> RewardParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut phi = self.zeros();
        let bound = 1.0 / (self.input as f64).sqrt();
        for w in &mut phi.0[..self.hidden * self.input] {
            *w = rng.gen_range(-bound..bound);
        }
        phi
    }

    fn check(&self, phi: &RewardParams, feats: &RewardFeatures) -> Result<()> {
        if phi.len() != self.param_count() {
            return Err(Error::invalid(format!(
                "reward network has {} parameters, expected {}",
                phi.len(),
                self.param_count()
            )));
        }
        if feats.0.len() != self.input {
            return Err(Error::invalid(format!(
                "feature length {} does not match network input {}",
                feats.0.len(),
                self.input
            )));
        }
        Ok(())
    }

    fn hidden_layer(&self, phi: &[f64], f: &[f64]) -> Vec<f64> {
        let n_u1 = self.hidden * self.input;
        let mut y = vec![0.0; self.hidden];
        affine(&phi[..n_u1], &phi[n_u1..n_u1 + self.hidden], f, &mut y);
        y.iter_mut().for_each(|v| *v = v.tanh());
        y
    }

    fn output(&self, phi: &[f64], y: &[f64]) -> f64 {
        let n_u1 = self.hidden * self.input;
        let u2 = &phi[n_u1 + self.hidden..n_u1 + 2 * self.hidden];
        (dot(u2, y) + phi[phi.len() - 1]).tanh()
    }

    pub fn reward(&self, phi: &RewardParams, feats: &RewardFeatures) -> Result<f64> {
        self.check(phi, feats)?;
        let y = self.hidden_layer(&phi.0, &feats.0);
        Ok(self.output(&phi.0, &y))
    }

    /// `(r, ∇_φ r)`.
    pub fn reward_and_grad(&self, phi: &RewardParams, feats: &RewardFeatures) -> Result<(f64, Vec<f64>)> {
        self.check(phi, feats)?;
        let (q, n) = (self.hidden, self.input);
        let n_u1 = q * n;
        let f = &feats.0;
        let y = self.hidden_layer(&phi.0, f);
        let r = self.output(&phi.0, &y);
        let dz = 1.0 - r * r;
        let u2 = &phi.0[n_u1 + q..n_u1 + 2 * q];
        let mut g = vec![0.0; self.param_count()];
        for j in 0..q {
            let dh = dz * u2[j] * (1.0 - y[j] * y[j]);
            for (gk, fk) in g[j * n..(j + 1) * n].iter_mut().zip(f) {
                *gk = dh * fk;
            }
            g[n_u1 + j] = dh;
            g[n_u1 + q + j] = dz * y[j];
        }
        g[n_u1 + 2 * q] = dz;
        Ok((r, g))
    }

    pub fn to_arrays(&self, phi: &RewardParams) -> Result<NamedArrays> {
        if phi.len() != self.param_count() {
            return Err(Error::invalid("reward parameter count mismatch"));
        }
        let meta = json!({ "kind": "intrinsic_reward", "input": self.input, "hidden": self.hidden });
        Ok(params::to_arrays(&self.param_blocks(), &phi.0, meta))
    }

    pub fn params_from_arrays(&self, arrays: &NamedArrays) -> Result<RewardParams> {
        params::from_arrays(&self.param_blocks(), arrays).map(RewardParams)
    }

    /// Rebuilds the network shape from a checkpoint's metadata.
    pub fn from_arrays(arrays: &NamedArrays) -> Result<(Self, RewardParams)> {
        let get = |k: &str| {
            arrays
                .meta
                .get(k)
                .and_then(|v| v.as_u64())
                .map(|v| v as usize)
                .ok_or_else(|| Error::Format(format!("reward checkpoint lacks `{k}`")))
        };
        let net = RewardNet { input: get("input")?, hidden: get("hidden")? };
        let phi = net.params_from_arrays(arrays)?;
        Ok((net, phi))
    }
}

pub fn intrinsic_reward(net: &RewardNet, phi: &RewardParams, feats: &RewardFeatures) -> Result<f64> {
    net.reward(phi, feats)
}

pub fn intrinsic_reward_grad(net: &RewardNet, phi: &RewardParams, feats: &RewardFeatures) -> Result<Vec<f64>> {
    net.reward_and_grad(phi, feats).map(|(_, g)| g)
}
