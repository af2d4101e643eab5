//! State encoders.
//!
//! An encoder maps a conversation state to a fixed-size vector `h` and can
//! back-propagate a gradient on `h` into its own parameters. The policy owns
//! the parameter vector; an encoder only sees its leading slice.

use crate::env::{ranked_candidates, ConversationState, World};
use crate::error::Result;
use crate::math::{affine, mean_of};
pub use crate::params::ParamBlock;
use std::fmt::Debug;

pub trait StateEncoder: Debug + Send + Sync {
    /// Parameter-free input features of `state`.
    fn input_features(&self, state: &ConversationState, world: World<'_>) -> Result<Vec<f64>>;
    fn param_blocks(&self) -> Vec<ParamBlock>;
    fn output_dim(&self) -> usize;
    fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64>;
    /// Accumulates `∂(dhᵀh)/∂params` into `grad`.
    fn backward(&self, params: &[f64], x: &[f64], h: &[f64], dh: &[f64], grad: &mut [f64]);

    fn param_count(&self) -> usize {
        self.param_blocks().iter().map(ParamBlock::len).sum()
    }
}

/// Mean-pooled set embeddings followed by one tanh layer.
///
/// `x = [mean e_{P⁺}; mean e_{P⁻}; mean e_{V⁻}; mean e_{top-n V^cand}; e_u]`
/// (zero blocks for empty sets) and `h = tanh(W_e x + b_e)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeanPoolEncoder {
    pub dim: usize,
    pub hidden: usize,
    pub pool_top_n: usize,
}

impl MeanPoolEncoder {
    pub fn input_dim(&self) -> usize {
        5 * self.dim
    }
}

impl StateEncoder for MeanPoolEncoder {
    fn input_features(&self, state: &ConversationState, world: World<'_>) -> Result<Vec<f64>> {
        let emb = world.emb;
        let d = self.dim;
        let attr_rows = |set: &std::collections::BTreeSet<crate::ids::AttrId>| -> Vec<&[f64]> {
            set.iter().filter_map(|p| emb.attr(*p)).collect()
        };
        let mut x = Vec::with_capacity(5 * d);
        x.extend(mean_of(d, attr_rows(&state.accepted)));
        x.extend(mean_of(d, attr_rows(&state.rejected_attrs)));
        x.extend(mean_of(d, state.rejected_items.iter().filter_map(|v| emb.item(*v))));
        let top = ranked_candidates(state, world)?;
        x.extend(mean_of(d, top.iter().take(self.pool_top_n).filter_map(|(v, _)| emb.item(*v))));
        match emb.user(state.user) {
            Some(u) => x.extend_from_slice(u),
            None => x.extend(std::iter::repeat_n(0.0, d)),
        }
        Ok(x)
    }

    fn param_blocks(&self) -> Vec<ParamBlock> {
        vec![ParamBlock::new("W_e", &[self.hidden, self.input_dim()]), ParamBlock::new("b_e", &[self.hidden])]
    }

    fn output_dim(&self) -> usize {
        self.hidden
    }

    fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let n_w = self.hidden * self.input_dim();
        let mut h = vec![0.0; self.hidden];
        affine(&params[..n_w], &params[n_w..n_w + self.hidden], x, &mut h);
        h.iter_mut().for_each(|v| *v = v.tanh());
        h
    }

    fn backward(&self, _params: &[f64], x: &[f64], h: &[f64], dh: &[f64], grad: &mut [f64]) {
        let cols = self.input_dim();
        let n_w = self.hidden * cols;
        for r in 0..self.hidden {
            let dz = dh[r] * (1.0 - h[r] * h[r]);
            if dz == 0.0 {
                continue;
            }
            let row = &mut grad[r * cols..(r + 1) * cols];
            for (g, xi) in row.iter_mut().zip(x) {
                *g += dz * xi;
            }
            grad[n_w + r] += dz;
        }
    }
}
