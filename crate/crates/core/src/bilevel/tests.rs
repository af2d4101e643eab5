use super::*;
use crate::catalog::{generate_synthetic_world, Catalog, WorldSpec};
use crate::embedding::EmbeddingTable;
use crate::env::World;
use crate::intrinsic::{RewardNet, RewardParams};
use crate::policy::{PolicyNet, PolicyParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(seed: u64) -> (Catalog, EmbeddingTable) {
    let c = generate_synthetic_world(&WorldSpec {
        n_users: 6,
        n_items: 24,
        n_attrs: 8,
        attrs_per_item: (2, 4),
        interactions_per_user: 4,
        n_clusters: 2,
        seed,
    })
    .unwrap();
    let e = EmbeddingTable::random(&c, 4, seed + 7);
    (c, e)
}

fn cfg() -> TrainConfig {
    TrainConfig {
        eta: 0.5,
        beta: 0.01,
        lambda: 1.0,
        gamma: 0.95,
        env: EnvConfig { t_max: 6, k: 2, k_v: 5, k_p: 5 },
        outer_iterations: 5,
        pretrain_episodes: 0,
        ..TrainConfig::default()
    }
}

fn nets() -> (PolicyNet, RewardNet) {
    (PolicyNet::mean_pool(4, 4, 4, 3), RewardNet::for_dim(4, 4))
}

fn jitter(v: &[f64], scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    v.iter().map(|x| x + rng.gen_range(-scale..scale)).collect()
}

fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    a.iter().zip(n).map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6)).fold(0.0, f64::max)
}

fn sample_traj(
    net: &PolicyNet,
    theta: &PolicyParams,
    reward: Option<(&RewardNet, &RewardParams)>,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    world: World<'_>,
) -> Trajectory {
    let spec = RolloutSpec { net, theta, reward, scheme: &cfg.scheme, env: &cfg.env, mode: ActionMode::Sample };
    let pairs = world.catalog.interactions();
    let (u, v) = pairs[rng.gen_range(0..pairs.len())];
    rollout(&spec, u, v, rng, world).unwrap()
}

fn central<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], eps: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            p[i] += eps;
            let up = f(&p);
            p[i] -= 2.0 * eps;
            (up - f(&p)) / (2.0 * eps)
        })
        .collect()
}

#[test]
fn rollout_records_consistent_steps() {
    let (c, e) = fixture(1);
    let w = World { catalog: &c, emb: &e };
    let (net, rnet) = nets();
    let theta = net.init(2);
    let phi = rnet.init(3);
    let cfg = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..30 {
        let t = sample_traj(&net, &theta, Some((&rnet, &phi)), &cfg, &mut rng, w);
        assert!(t.len() <= cfg.env.t_max);
        for s in &t.steps {
            assert_eq!(s.score_grad.len(), theta.len());
            assert!(s.rank_before >= 1 && s.rank_after >= 1);
            assert_eq!(s.r_in, rnet.reward(&phi, &s.features).unwrap());
        }
        if t.success {
            assert!(matches!(&t.steps.last().unwrap().action, Action::RecommendItems(l) if l.contains(&t.target)));
        }
    }
}

#[test]
fn rollout_is_deterministic() {
    let (c, e) = fixture(2);
    let w = World { catalog: &c, emb: &e };
    let (net, _) = nets();
    let theta = net.init(5);
    let cfg = cfg();
    let a = sample_traj(&net, &theta, None, &cfg, &mut ChaCha8Rng::seed_from_u64(9), w);
    let b = sample_traj(&net, &theta, None, &cfg, &mut ChaCha8Rng::seed_from_u64(9), w);
    assert_eq!(a, b);
}

#[test]
fn single_turn_hit() {
    // each item owns a unique attribute, so the volunteered attribute
    // leaves only the target and the first recommendation hits
    let items: Vec<Vec<u32>> = (0..4).map(|i| vec![i]).collect();
    let refs: Vec<&[u32]> = items.iter().map(|v| v.as_slice()).collect();
    let c = crate::env::fixtures::catalog(1, 4, &refs);
    let e = EmbeddingTable::random(&c, 4, 0);
    let w = World { catalog: &c, emb: &e };
    let (net, _) = nets();
    let theta = net.init(0);
    let env = EnvConfig { t_max: 1, k: 1, k_v: 1, k_p: 1 };
    let spec = RolloutSpec {
        net: &net,
        theta: &theta,
        reward: None,
        scheme: &RewardScheme::sparse(),
        env: &env,
        mode: ActionMode::Greedy,
    };
    let t = rollout(&spec, UserId(0), ItemId(2), &mut ChaCha8Rng::seed_from_u64(0), w).unwrap();
    assert_eq!((t.len(), t.success), (1, true));
}

#[test]
fn outer_extrinsic_gradient_matches_finite_differences() {
    let (c, e) = fixture(3);
    let w = World { catalog: &c, emb: &e };
    let (net, _) = nets();
    let cfg = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut checked = 0;
    while checked < 5 {
        let theta = PolicyParams(jitter(&net.init(rng.gen()).0, 0.3, &mut rng));
        let t = sample_traj(&net, &theta, None, &cfg, &mut rng, w);
        if t.is_empty() {
            continue;
        }
        let (_, g) = outer_extrinsic_grad(&net, &theta, &t, cfg.gamma, w).unwrap();
        let num = central(
            |x| outer_extrinsic_grad(&net, &PolicyParams(x.to_vec()), &t, cfg.gamma, w).unwrap().0,
            &theta.0,
            1e-5,
        );
        assert!(rel_err(&g, &num) < 1e-4, "{}", rel_err(&g, &num));
        checked += 1;
    }
}

#[test]
fn single_step_extrinsic_gradient_is_negative_score() {
    let (c, e) = fixture(4);
    let w = World { catalog: &c, emb: &e };
    let (net, _) = nets();
    let cfg = cfg();
    let theta = net.init(1);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut t = sample_traj(&net, &theta, None, &cfg, &mut rng, w);
    t.steps.truncate(1);
    t.success = false;
    t.steps[0].r_ex = 1.0;
    let (_, g) = outer_extrinsic_grad(&net, &theta, &t, cfg.gamma, w).unwrap();
    let u: Vec<f64> = t.steps[0].score_grad.iter().map(|x| -x).collect();
    assert!(rel_err(&g, &u) < 1e-12);
    t.steps[0].r_ex = 0.0;
    let (_, zero) = outer_extrinsic_grad(&net, &theta, &t, cfg.gamma, w).unwrap();
    assert!(zero.iter().all(|x| *x == 0.0));
}

#[test]
fn preference_gradient_matches_finite_differences() {
    let (c, e) = fixture(5);
    let w = World { catalog: &c, emb: &e };
    let (net, _) = nets();
    let cfg = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let theta = PolicyParams(jitter(&net.init(rng.gen()).0, 0.3, &mut rng));
        let a = sample_traj(&net, &theta, None, &cfg, &mut rng, w);
        let b = sample_traj(&net, &theta, None, &cfg, &mut rng, w);
        let pairs = vec![(a.clone(), b.truncated(a.len())), (b.clone(), a.truncated(b.len()))];
        let (_, g) = outer_preference_grad(&net, &theta, &pairs, w).unwrap();
        let num =
            central(|x| outer_preference_grad(&net, &PolicyParams(x.to_vec()), &pairs, w).unwrap().0, &theta.0, 1e-5);
        assert!(rel_err(&g, &num) < 1e-4, "{}", rel_err(&g, &num));
        let (_, same) = outer_preference_grad(&net, &theta, &[(a.clone(), a.clone())], w).unwrap();
        assert!(same.iter().all(|x| x.abs() < 1e-12));
        let p = preference_prob(&net, &theta, &a, &b, w).unwrap();
        let q = preference_prob(&net, &theta, &b, &a, w).unwrap();
        assert!((p + q - 1.0).abs() < 1e-12);
    }
}

#[test]
fn meta_gradient_matches_finite_differences() {
    let (c, e) = fixture(6);
    let w = World { catalog: &c, emb: &e };
    let (net, rnet) = nets();
    let cfg = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    while checked < 5 {
        let theta = PolicyParams(jitter(&net.init(rng.gen()).0, 0.3, &mut rng));
        let phi = RewardParams(jitter(&rnet.init(rng.gen()).0, 0.5, &mut rng));
        let tau_i = sample_traj(&net, &theta, Some((&rnet, &phi)), &cfg, &mut rng, w);
        let tau_o = sample_traj(&net, &theta, None, &cfg, &mut rng, w);
        let other = sample_traj(&net, &theta, None, &cfg, &mut rng, w);
        if tau_i.is_empty() || tau_o.is_empty() {
            continue;
        }
        let pair = vec![(tau_o.clone(), other.truncated(tau_o.len()))];
        let alpha: f64 = rng.gen();
        let outer = |phi: &RewardParams| {
            let (th, mf) = inner_update(&theta, &rnet, phi, &tau_i, &cfg).unwrap();
            let (le, ve) = outer_extrinsic_grad(&net, &th, &tau_o, cfg.gamma, w).unwrap();
            let (lp, vp) = outer_preference_grad(&net, &th, &pair, w).unwrap();
            (alpha * le + (1.0 - alpha) * lp, ve, vp, mf)
        };
        let (_, ve, vp, mf) = outer(&phi);
        let g = meta_gradient(alpha, &ve, &vp, &mf).unwrap();
        let num = central(|x| outer(&RewardParams(x.to_vec())).0, &phi.0, 1e-5);
        assert!(rel_err(&g, &num) < 1e-4, "{}", rel_err(&g, &num));
        checked += 1;
    }
}

fn train(cfg: &TrainConfig, seed: u64) -> CrsirlOutcome {
    let (c, e) = fixture(seed);
    let w = World { catalog: &c, emb: &e };
    let (net, rnet) = nets();
    let theta = net.init(seed);
    let pairs = c.interactions().to_vec();
    train_crsirl(&net, &rnet, &theta, cfg, w, (&pairs, &pairs), &mut |_, _, _| Ok(())).unwrap()
}

#[test]
fn zero_iterations_change_nothing() {
    let cfg = TrainConfig { outer_iterations: 0, ..cfg() };
    let out = train(&cfg, 7);
    let (net, rnet) = nets();
    assert_eq!(out.theta, net.init(7));
    assert_eq!(out.phi, rnet.init(cfg.seed));
    assert!(out.logs.is_empty());
}

#[test]
fn ablation_flags_fix_alpha() {
    let out = train(&TrainConfig { enable_rpm: false, outer_iterations: 8, ..cfg() }, 8);
    assert!(out.logs.iter().all(|l| l.alpha == 1.0));
    let out = train(&TrainConfig { fixed_alpha: Some(0.5), outer_iterations: 8, ..cfg() }, 8);
    assert!(out.logs.iter().all(|l| l.alpha == 0.5));
    let out = train(&TrainConfig { enable_hrs: false, outer_iterations: 8, ..cfg() }, 8);
    assert!(out.logs.iter().all(|l| l.alpha == 0.0));
}

#[test]
fn zero_outer_step_keeps_phi() {
    let cfg = TrainConfig { beta: 0.0, outer_iterations: 6, ..cfg() };
    let out = train(&cfg, 9);
    assert_eq!(out.phi, nets().1.init(cfg.seed));
}

#[test]
fn logged_alpha_is_a_convex_weight() {
    let cfg = TrainConfig { outer_iterations: 30, probe_every: 10, ..cfg() };
    let out = train(&cfg, 10);
    assert!(out.logs.iter().all(|l| (0.0..=1.0).contains(&l.alpha)));
    assert!(out.logs.iter().all(|l| l.buffer_succ + l.buffer_fail <= cfg.buffer_capacity));
    assert_eq!(out.logs.iter().filter(|l| l.probe.is_some()).count(), 3);
    let mut csv = Vec::new();
    write_train_log(&out.logs, &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 31);
}

#[test]
fn training_is_deterministic() {
    let cfg = TrainConfig { outer_iterations: 10, ..cfg() };
    let a = train(&cfg, 11);
    let b = train(&cfg, 11);
    assert_eq!((a.theta, a.phi), (b.theta, b.phi));
}

#[test]
fn pretraining_contracts() {
    let (c, e) = fixture(12);
    let w = World { catalog: &c, emb: &e };
    let (net, _) = nets();
    let pairs = c.interactions().to_vec();
    let cfg0 = TrainConfig { pretrain_episodes: 0, ..cfg() };
    assert_eq!(pretrain_pg(&net, &cfg0, w, &pairs).unwrap(), net.init(cfg0.seed));
    let cfg = TrainConfig { pretrain_episodes: 20, pg_baseline: Some(0.9), ..cfg() };
    let a = pretrain_pg(&net, &cfg, w, &pairs).unwrap();
    assert_eq!(a, pretrain_pg(&net, &cfg, w, &pairs).unwrap());
    assert_ne!(a, net.init(cfg.seed));
    assert!(pretrain_pg(&net, &cfg, w, &[]).is_err());
}

#[test]
fn config_validation_names_fields() {
    let bad = TrainConfig { gamma: 1.5, ..TrainConfig::default() };
    assert!(bad.validate().unwrap_err().to_string().contains("gamma"));
    let bad = TrainConfig { fixed_alpha: Some(2.0), ..TrainConfig::default() };
    assert!(bad.validate().unwrap_err().to_string().contains("fixed_alpha"));
    assert!(TrainConfig::default().validate().is_ok());
}
