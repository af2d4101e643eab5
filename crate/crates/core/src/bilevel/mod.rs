//! Bi-level intrinsic reward learning.
//!
//! Each outer iteration takes one policy-gradient step on extrinsic plus
//! λ-weighted intrinsic returns (the inner update `θ → θ′`), then scores `θ′`
//! on two outer objectives: a hindsight-shaped extrinsic loss and a
//! Bradley-Terry preference loss over buffered trajectories. The objectives
//! are mixed with the min-norm weight `α` and differentiated through the
//! inner update to get the reward-parameter gradient `g(φ)`.

mod buffer;
mod ops;
mod trainer;

pub use buffer::TrajectoryBuffer;
pub use ops::{
    bradley_terry, discounted_returns, inner_update, meta_gradient, mgda_alpha, outer_extrinsic_grad,
    outer_preference_grad, potential, preference_prob, shaped_extrinsic_returns, shaping_term, trajectory_log_prob,
    MetaFactors,
};
pub use trainer::{
    continue_pg, outer_step, pretrain_pg, rollout, train_crsirl, write_train_log, ActionMode, CheckpointHook,
    CrsirlOutcome, IterationLog, RolloutSpec, TrainerState,
};

use crate::env::{Action, ConversationState, EnvConfig, RewardScheme};
use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use crate::intrinsic::RewardFeatures;
use crate::policy::PolicyAction;

/// Enough of a decision to recompute `ln π(a|s)` under other parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayToken {
    pub state: ConversationState,
    pub actions: Vec<PolicyAction>,
    pub chosen: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryStep {
    pub features: RewardFeatures,
    /// `∇_θ ln π(a_t|s_t)` at the rollout parameters.
    pub score_grad: Vec<f64>,
    pub replay: ReplayToken,
    pub action: Action,
    pub r_ex: f64,
    pub r_in: f64,
    pub rank_before: usize,
    pub rank_after: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub user: UserId,
    pub target: ItemId,
    pub steps: Vec<TrajectoryStep>,
    pub success: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The first `n` steps; no longer a success unless nothing was cut.
    pub fn truncated(&self, n: usize) -> Trajectory {
        Trajectory {
            user: self.user,
            target: self.target,
            steps: self.steps[..n.min(self.len())].to_vec(),
            success: self.success && n >= self.len(),
        }
    }

    pub fn extrinsic_rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.r_ex).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Inner step size η.
    pub eta: f64,
    /// Outer step size β.
    pub beta: f64,
    /// Intrinsic weight λ.
    pub lambda: f64,
    pub gamma: f64,
    pub env: EnvConfig,
    /// Extrinsic scheme for pretraining and inner rollouts.
    pub scheme: RewardScheme,
    pub outer_iterations: usize,
    pub enable_hrs: bool,
    pub enable_rpm: bool,
    pub fixed_alpha: Option<f64>,
    pub seed: u64,
    pub buffer_capacity: usize,
    pub pretrain_episodes: usize,
    pub pretrain_step_size: f64,
    /// Decay of the moving-average return baseline used in pretraining.
    pub pg_baseline: Option<f64>,
    pub probe_every: usize,
    pub checkpoint_every: usize,
    pub policy_hidden: usize,
    pub head_hidden: usize,
    pub pool_top_n: usize,
    pub reward_hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 1e-4,
            beta: 1e-4,
            lambda: 0.1,
            gamma: 0.999,
            env: EnvConfig::default(),
            scheme: RewardScheme::sparse(),
            outer_iterations: 200,
            enable_hrs: true,
            enable_rpm: true,
            fixed_alpha: None,
            seed: 0,
            buffer_capacity: 512,
            pretrain_episodes: 2000,
            pretrain_step_size: 1e-2,
            pg_baseline: None,
            probe_every: 0,
            checkpoint_every: 0,
            policy_hidden: 16,
            head_hidden: 16,
            pool_top_n: 5,
            reward_hidden: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(format!("`{name}` is out of range")))
            }
        };
        field("gamma", (0.0..=1.0).contains(&self.gamma))?;
        field("lambda", self.lambda >= 0.0 && self.lambda.is_finite())?;
        field("eta", self.eta >= 0.0 && self.eta.is_finite())?;
        field("beta", self.beta >= 0.0 && self.beta.is_finite())?;
        field("fixed_alpha", self.fixed_alpha.is_none_or(|a| (0.0..=1.0).contains(&a)))?;
        field("enable_hrs", self.enable_hrs || self.enable_rpm || self.fixed_alpha.is_some())?;
        field("buffer_capacity", self.buffer_capacity >= 2)?;
        field("pretrain_step_size", self.pretrain_step_size >= 0.0 && self.pretrain_step_size.is_finite())?;
        field("pg_baseline", self.pg_baseline.is_none_or(|d| (0.0..1.0).contains(&d)))?;
        field("policy_hidden", self.policy_hidden > 0)?;
        field("head_hidden", self.head_hidden > 0)?;
        field("reward_hidden", self.reward_hidden > 0)?;
        self.env.validate()?;
        self.scheme.validate()
    }
}

#[cfg(test)]
mod tests;
