//! Returns, the inner update, both outer objectives, the min-norm weight and
//! the meta-gradient.

use super::{TrainConfig, Trajectory};
use crate::env::World;
use crate::error::{Error, Result};
use crate::intrinsic::{RewardNet, RewardParams};
use crate::math::{axpy, dot, sigmoid};
use crate::policy::{PolicyNet, PolicyParams};

/// `R_t = r_t + γ R_{t+1}`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Per-step factors `(u_t, G_t)` of `∂θ′/∂φ = ηλ Σ_t u_t G_tᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaFactors {
    pub steps: Vec<(Vec<f64>, Vec<f64>)>,
    pub eta: f64,
    pub lambda: f64,
}

/// One plain policy-gradient step on `r_ex + λ r_φ` returns.
///
/// The intrinsic rewards are recomputed from the stored features under `phi`.
pub fn inner_update(
    theta: &PolicyParams,
    reward_net: &RewardNet,
    phi: &RewardParams,
    traj: &Trajectory,
    cfg: &TrainConfig,
) -> Result<(PolicyParams, MetaFactors)> {
    let n = traj.len();
    let mut r_in = Vec::with_capacity(n);
    let mut r_grads = Vec::with_capacity(n);
    for s in &traj.steps {
        if s.score_grad.len() != theta.len() {
            return Err(Error::invalid(format!(
                "score gradient has length {}, policy has {}",
                s.score_grad.len(),
                theta.len()
            )));
        }
        let (r, g) = reward_net.reward_and_grad(phi, &s.features)?;
        r_in.push(r);
        r_grads.push(g);
    }
    let combined: Vec<f64> = traj.steps.iter().zip(&r_in).map(|(s, r)| s.r_ex + cfg.lambda * r).collect();
    let returns = discounted_returns(&combined, cfg.gamma);

    let mut next = theta.clone();
    for (s, ret) in traj.steps.iter().zip(&returns) {
        axpy(cfg.eta * ret, &s.score_grad, &mut next.0);
    }

    let mut steps = Vec::with_capacity(n);
    let mut acc = vec![0.0; phi.len()];
    for t in (0..n).rev() {
        acc.iter_mut().for_each(|x| *x *= cfg.gamma);
        axpy(1.0, &r_grads[t], &mut acc);
        steps.push((traj.steps[t].score_grad.clone(), acc.clone()));
    }
    steps.reverse();
    Ok((next, MetaFactors { steps, eta: cfg.eta, lambda: cfg.lambda }))
}

/// `Φ(ρ) = −ln(ρ + 1)`.
pub fn potential(rank: usize) -> f64 {
    -((rank + 1) as f64).ln()
}

/// `γΦ(ρ′) − Φ(ρ)`.
pub fn shaping_term(rank: usize, next_rank: usize, gamma: f64) -> f64 {
    gamma * potential(next_rank) - potential(rank)
}

/// Returns of the rank-shaped reward on successes, raw returns otherwise.
pub fn shaped_extrinsic_returns(traj: &Trajectory, gamma: f64) -> Result<Vec<f64>> {
    if !traj.success {
        return Ok(discounted_returns(&traj.extrinsic_rewards(), gamma));
    }
    let shaped = traj
        .steps
        .iter()
        .map(|s| {
            if s.rank_before == 0 || s.rank_after == 0 {
                return Err(Error::invalid("trajectory step lacks target ranks"));
            }
            Ok(s.r_ex + shaping_term(s.rank_before, s.rank_after, gamma))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(discounted_returns(&shaped, gamma))
}

/// `(Σ_t ln π(a_t|s_t), ∇_θ of that sum)` replayed under `theta`.
pub fn trajectory_log_prob(
    net: &PolicyNet,
    theta: &PolicyParams,
    traj: &Trajectory,
    world: World<'_>,
) -> Result<(f64, Vec<f64>)> {
    let mut total = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for s in &traj.steps {
        let r = &s.replay;
        let (lp, g) = net.log_prob_and_grad(theta, &r.state, &r.actions, r.chosen, world)?;
        total += lp;
        axpy(1.0, &g, &mut grad);
    }
    Ok((total, grad))
}

/// `(L^ex, ∇_θ L^ex)` with `L^ex = −Σ_t ln π_θ(a_t|s_t) R̃_t` on a frozen trajectory.
pub fn outer_extrinsic_grad(
    net: &PolicyNet,
    theta: &PolicyParams,
    traj: &Trajectory,
    gamma: f64,
    world: World<'_>,
) -> Result<(f64, Vec<f64>)> {
    let returns = shaped_extrinsic_returns(traj, gamma)?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for (s, ret) in traj.steps.iter().zip(&returns) {
        if *ret == 0.0 {
            continue;
        }
        let r = &s.replay;
        let (lp, g) = net.log_prob_and_grad(theta, &r.state, &r.actions, r.chosen, world)?;
        loss -= lp * ret;
        axpy(-ret, &g, &mut grad);
    }
    Ok((loss, grad))
}

/// `P[τ0 ≻ τ1]` from the two log-likelihood sums.
pub fn bradley_terry(s0: f64, s1: f64) -> f64 {
    sigmoid(s0 - s1)
}

pub fn preference_prob(
    net: &PolicyNet,
    theta: &PolicyParams,
    preferred: &Trajectory,
    other: &Trajectory,
    world: World<'_>,
) -> Result<f64> {
    let (s0, _) = trajectory_log_prob(net, theta, preferred, world)?;
    let (s1, _) = trajectory_log_prob(net, theta, other, world)?;
    Ok(bradley_terry(s0, s1))
}

/// `ln σ(x)` without overflow.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// `(L^p, ∇_θ L^p)` with `L^p = −Σ ln P[τ0 ≻ τ1]` over `(preferred, other)` pairs.
pub fn outer_preference_grad(
    net: &PolicyNet,
    theta: &PolicyParams,
    pairs: &[(Trajectory, Trajectory)],
    world: World<'_>,
) -> Result<(f64, Vec<f64>)> {
    if pairs.is_empty() {
        return Err(Error::invalid("no preference pairs"));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for (t0, t1) in pairs {
        let (s0, g0) = trajectory_log_prob(net, theta, t0, world)?;
        let (s1, g1) = trajectory_log_prob(net, theta, t1, world)?;
        loss -= log_sigmoid(s0 - s1);
        let c = 1.0 - bradley_terry(s0, s1);
        axpy(-c, &g0, &mut grad);
        axpy(c, &g1, &mut grad);
    }
    Ok((loss, grad))
}

/// Weight of `g_ex` in the min-norm convex combination of the two gradients.
pub fn mgda_alpha(g_ex: &[f64], g_p: &[f64]) -> Result<f64> {
    if g_ex.len() != g_p.len() {
        return Err(Error::invalid(format!("gradient lengths differ: {} vs {}", g_ex.len(), g_p.len())));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (e, p) in g_ex.iter().zip(g_p) {
        let d = p - e;
        num += d * p;
        den += d * d;
    }
    if den < 1e-12 {
        return Ok(0.5);
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// `g(φ) = ηλ Σ_t (vᵀu_t) G_t` with `v = α v_ex + (1 − α) v_p`.
pub fn meta_gradient(alpha: f64, v_ex: &[f64], v_p: &[f64], mf: &MetaFactors) -> Result<Vec<f64>> {
    if v_ex.len() != v_p.len() {
        return Err(Error::invalid("outer gradients differ in length"));
    }
    let v: Vec<f64> = v_ex.iter().zip(v_p).map(|(e, p)| alpha * e + (1.0 - alpha) * p).collect();
    let Some(n_phi) = mf.steps.first().map(|(_, g)| g.len()) else {
        return Ok(Vec::new());
    };
    let mut out = vec![0.0; n_phi];
    for (u, g) in &mf.steps {
        if u.len() != v.len() || g.len() != n_phi {
            return Err(Error::invalid("meta factors do not match the outer gradient"));
        }
        axpy(mf.eta * mf.lambda * dot(&v, u), g, &mut out);
    }
    Ok(out)
}
