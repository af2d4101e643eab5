use super::ops::{inner_update, meta_gradient, mgda_alpha, outer_extrinsic_grad, outer_preference_grad};
use super::{discounted_returns, ReplayToken, TrainConfig, Trajectory, TrajectoryBuffer, TrajectoryStep};
use crate::env::{
    initial_state, select_action_space, step, target_rank, EnvConfig, RewardScheme, UserSimulator, World,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_policy, SeedMetrics};
use crate::ids::{Interaction, ItemId, UserId};
use crate::intrinsic::{reward_features, RewardNet, RewardParams};
use crate::math::axpy;
use crate::policy::{apply_gradient, policy_actions, GreedyLearned, OptimizerState, PolicyNet, PolicyParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionMode {
    Sample,
    Greedy,
}

/// Who acts and how rewards are paid during a rollout.
#[derive(Clone, Copy, Debug)]
pub struct RolloutSpec<'a> {
    pub net: &'a PolicyNet,
    pub theta: &'a PolicyParams,
    pub reward: Option<(&'a RewardNet, &'a RewardParams)>,
    pub scheme: &'a RewardScheme,
    pub env: &'a EnvConfig,
    pub mode: ActionMode,
}

/// Plays one conversation for `(user, target)` under `spec.theta`.
pub fn rollout<R: Rng + ?Sized>(
    spec: &RolloutSpec<'_>,
    user: UserId,
    target: ItemId,
    rng: &mut R,
    world: World<'_>,
) -> Result<Trajectory> {
    let sim = UserSimulator::new(target, world.catalog)?;
    let mut state = initial_state(user, &sim, world.catalog, rng)?;
    let mut steps = Vec::new();
    let mut success = false;
    while state.turn < spec.env.t_max {
        let space = select_action_space(&state, spec.env, world)?;
        if space.is_empty() {
            break;
        }
        let actions = policy_actions(&space);
        let dist = spec.net.action_distribution(spec.theta, &state, &actions, world)?;
        let chosen = match spec.mode {
            ActionMode::Sample => dist.sample(rng),
            ActionMode::Greedy => dist.argmax(),
        };
        let (_, score_grad) = spec.net.log_prob_and_grad(spec.theta, &state, &actions, chosen, world)?;
        let action = actions[chosen].to_env(&space, spec.env.k);
        let features = reward_features(&state, &action, spec.env.t_max, world.emb)?;
        let r_in = match spec.reward {
            Some((net, phi)) => net.reward(phi, &features)?,
            None => 0.0,
        };
        let rank_before = target_rank(&state, target, world)?;
        let out = step(&state, &action, &sim, spec.scheme, spec.env, world)?;
        let rank_after = target_rank(&out.next_state, target, world)?;
        steps.push(TrajectoryStep {
            features,
            score_grad,
            replay: ReplayToken { state, actions, chosen },
            action,
            r_ex: out.reward,
            r_in,
            rank_before,
            rank_after,
        });
        success = out.success;
        if out.done {
            break;
        }
        state = out.next_state;
    }
    Ok(Trajectory { user, target, steps, success })
}

fn pick_pair<R: Rng + ?Sized>(pairs: &[(UserId, ItemId)], rng: &mut R) -> Result<(UserId, ItemId)> {
    if pairs.is_empty() {
        return Err(Error::invalid("no training pairs"));
    }
    Ok(pairs[rng.gen_range(0..pairs.len())])
}

/// `Σ_t u_t (R_t − b)` for one extrinsic-only episode.
fn reinforce_direction<R: Rng + ?Sized>(
    net: &PolicyNet,
    theta: &PolicyParams,
    cfg: &TrainConfig,
    pair: (UserId, ItemId),
    baseline: f64,
    rng: &mut R,
    world: World<'_>,
) -> Result<(Vec<f64>, f64)> {
    let spec = RolloutSpec { net, theta, reward: None, scheme: &cfg.scheme, env: &cfg.env, mode: ActionMode::Sample };
    let traj = rollout(&spec, pair.0, pair.1, rng, world)?;
    let returns = discounted_returns(&traj.extrinsic_rewards(), cfg.gamma);
    let mut dir = vec![0.0; theta.len()];
    for (s, r) in traj.steps.iter().zip(&returns) {
        axpy(r - baseline, &s.score_grad, &mut dir);
    }
    Ok((dir, returns.first().copied().unwrap_or(0.0)))
}

/// REINFORCE on the extrinsic scheme with the adaptive optimizer, from a
/// fresh initialization.
pub fn pretrain_pg(
    net: &PolicyNet,
    cfg: &TrainConfig,
    world: World<'_>,
    pairs: &[(UserId, ItemId)],
) -> Result<PolicyParams> {
    cfg.validate()?;
    let mut theta = net.init(cfg.seed);
    let mut opt = OptimizerState::new(theta.len(), cfg.pretrain_step_size);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut baseline = 0.0;
    for episode in 0..cfg.pretrain_episodes {
        let pair = pick_pair(pairs, &mut rng)?;
        let (dir, ret) = reinforce_direction(net, &theta, cfg, pair, baseline, &mut rng, world)?;
        let grad: Vec<f64> = dir.iter().map(|x| -x).collect();
        apply_gradient(&mut theta.0, &grad, &mut opt)?;
        if let Some(decay) = cfg.pg_baseline {
            baseline = if episode == 0 { ret } else { decay * baseline + (1.0 - decay) * ret };
        }
        if (episode + 1) % 500 == 0 {
            log::debug!("pretrain episode {}", episode + 1);
        }
    }
    Ok(theta)
}

/// Plain-step REINFORCE with step size `η`, matching the inner update with
/// `λ = 0`.
pub fn continue_pg(
    net: &PolicyNet,
    theta: &PolicyParams,
    cfg: &TrainConfig,
    world: World<'_>,
    pairs: &[(UserId, ItemId)],
    episodes: usize,
) -> Result<PolicyParams> {
    cfg.validate()?;
    let mut theta = theta.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(3);
    for _ in 0..episodes {
        let pair = pick_pair(pairs, &mut rng)?;
        let (dir, _) = reinforce_direction(net, &theta, cfg, pair, 0.0, &mut rng, world)?;
        axpy(cfg.eta, &dir, &mut theta.0);
        if !theta.0.iter().all(|x| x.is_finite()) {
            return Err(Error::Numeric("policy parameters diverged".into()));
        }
    }
    Ok(theta)
}

/// Mutable state of the bi-level loop.
#[derive(Clone, Debug)]
pub struct TrainerState {
    pub theta: PolicyParams,
    pub phi: RewardParams,
    pub opt_phi: OptimizerState,
    pub buffer: TrajectoryBuffer,
    pub rng: ChaCha8Rng,
    pub iteration: usize,
}

impl TrainerState {
    pub fn new(theta: PolicyParams, phi: RewardParams, cfg: &TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(2);
        TrainerState {
            opt_phi: OptimizerState::new(phi.len(), cfg.beta),
            theta,
            phi,
            buffer: TrajectoryBuffer::new(cfg.buffer_capacity),
            rng,
            iteration: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub alpha: f64,
    pub loss_ex: f64,
    pub loss_p: Option<f64>,
    pub buffer_succ: usize,
    pub buffer_fail: usize,
    pub probe: Option<SeedMetrics>,
    pub wall_ms: u64,
}

/// One inner update followed by one reward-parameter update.
pub fn outer_step(
    net: &PolicyNet,
    reward_net: &RewardNet,
    st: &mut TrainerState,
    cfg: &TrainConfig,
    world: World<'_>,
    pairs: &[(UserId, ItemId)],
) -> Result<IterationLog> {
    let start = Instant::now();
    let (u, v) = pick_pair(pairs, &mut st.rng)?;
    let inner = RolloutSpec {
        net,
        theta: &st.theta,
        reward: Some((reward_net, &st.phi)),
        scheme: &cfg.scheme,
        env: &cfg.env,
        mode: ActionMode::Sample,
    };
    let tau_i = rollout(&inner, u, v, &mut st.rng, world)?;
    let (theta_next, factors) = inner_update(&st.theta, reward_net, &st.phi, &tau_i, cfg)?;

    let (u, v) = pick_pair(pairs, &mut st.rng)?;
    let sparse = RewardScheme::sparse();
    let outer = RolloutSpec { theta: &theta_next, reward: None, scheme: &sparse, ..inner };
    let tau_o = rollout(&outer, u, v, &mut st.rng, world)?;
    let (loss_ex, v_ex) = outer_extrinsic_grad(net, &theta_next, &tau_o, cfg.gamma, world)?;

    let pair = match st.buffer.sample_preference_pair(&mut st.rng) {
        Ok(p) => Some(p),
        Err(Error::NoPair) => None,
        Err(e) => return Err(e),
    };
    let (loss_p, v_p) = match &pair {
        Some(p) => {
            let (l, g) = outer_preference_grad(net, &theta_next, std::slice::from_ref(p), world)?;
            (Some(l), g)
        }
        None => (None, vec![0.0; theta_next.len()]),
    };

    let alpha = match cfg.fixed_alpha {
        Some(a) => a,
        None if !cfg.enable_rpm => 1.0,
        None if !cfg.enable_hrs => 0.0,
        None if pair.is_none() => 1.0,
        None => mgda_alpha(&v_ex, &v_p)?,
    };
    let g = meta_gradient(alpha, &v_ex, &v_p, &factors)?;
    if !g.is_empty() {
        apply_gradient(&mut st.phi.0, &g, &mut st.opt_phi)?;
    }

    st.theta = theta_next;
    if !st.theta.0.iter().all(|x| x.is_finite()) {
        return Err(Error::Numeric("policy parameters diverged".into()));
    }
    st.buffer.push(tau_i);
    st.buffer.push(tau_o);
    st.iteration += 1;
    Ok(IterationLog {
        iteration: st.iteration,
        alpha,
        loss_ex,
        loss_p,
        buffer_succ: st.buffer.n_successes(),
        buffer_fail: st.buffer.n_failures(),
        probe: None,
        wall_ms: start.elapsed().as_millis() as u64,
    })
}

#[derive(Clone, Debug)]
pub struct CrsirlOutcome {
    pub theta: PolicyParams,
    pub phi: RewardParams,
    pub logs: Vec<IterationLog>,
}

/// Callback receiving `(iteration, θ, φ)` every `checkpoint_every` iterations.
pub type CheckpointHook<'a> = dyn FnMut(usize, &PolicyParams, &RewardParams) -> Result<()> + 'a;

/// Runs `cfg.outer_iterations` outer steps from `theta_init`, probing greedy
/// performance on `probe_pairs` every `cfg.probe_every` iterations.
pub fn train_crsirl(
    net: &PolicyNet,
    reward_net: &RewardNet,
    theta_init: &PolicyParams,
    cfg: &TrainConfig,
    world: World<'_>,
    (train_pairs, probe_pairs): (&[Interaction], &[Interaction]),
    on_checkpoint: &mut CheckpointHook<'_>,
) -> Result<CrsirlOutcome> {
    cfg.validate()?;
    let phi = reward_net.init(cfg.seed);
    let mut st = TrainerState::new(theta_init.clone(), phi, cfg);
    let mut logs = Vec::with_capacity(cfg.outer_iterations);
    for i in 0..cfg.outer_iterations {
        let mut entry = outer_step(net, reward_net, &mut st, cfg, world, train_pairs)?;
        if cfg.probe_every > 0 && !probe_pairs.is_empty() && (i + 1) % cfg.probe_every == 0 {
            let greedy = GreedyLearned { net: net.clone(), theta: st.theta.clone(), label: "probe".into() };
            let report = evaluate_policy(&greedy, probe_pairs, &cfg.env, &[cfg.seed], world)?;
            entry.probe = report.per_seed.into_iter().next();
            log::info!(
                "iteration {} alpha {:.3} probe sr {:.3}",
                entry.iteration,
                entry.alpha,
                entry.probe.as_ref().map_or(f64::NAN, |p| p.sr_at_t)
            );
        }
        if cfg.checkpoint_every > 0 && (i + 1) % cfg.checkpoint_every == 0 {
            on_checkpoint(i + 1, &st.theta, &st.phi)?;
        }
        logs.push(entry);
    }
    Ok(CrsirlOutcome { theta: st.theta, phi: st.phi, logs })
}

/// Training log CSV; missing values are left empty.
pub fn write_train_log<W: Write>(logs: &[IterationLog], mut out: W) -> Result<()> {
    writeln!(out, "iteration,alpha,loss_ex,loss_p,buffer_succ,buffer_fail,probe_sr,probe_at,probe_hdcg,wall_ms")?;
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.6}"));
    for l in logs {
        let p = l.probe.as_ref();
        writeln!(
            out,
            "{},{:.6},{:.6},{},{},{},{},{},{},{}",
            l.iteration,
            l.alpha,
            l.loss_ex,
            opt(l.loss_p),
            l.buffer_succ,
            l.buffer_fail,
            opt(p.map(|p| p.sr_at_t)),
            opt(p.map(|p| p.at)),
            opt(p.map(|p| p.hdcg)),
            l.wall_ms
        )?;
    }
    Ok(())
}
