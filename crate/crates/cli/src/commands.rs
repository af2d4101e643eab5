use crate::artifacts::{load_arrays, load_catalog, load_embeddings, load_splits, write_arrays, write_atomic};
use crate::config::{Algorithm, RunConfig};
use crate::error::CliError;
use anyhow::{Context, Result};
use clap::ValueEnum;
use crsirl_core::bilevel::{continue_pg, pretrain_pg, train_crsirl, write_train_log};
use crsirl_core::catalog::{generate_synthetic_world, split_interactions, InteractionSplits};
use crsirl_core::embedding::pretrain_embeddings;
use crsirl_core::eval::{evaluate_policy, MetricsReport};
use crsirl_core::intrinsic::{RewardNet, RewardParams};
use crsirl_core::policy::{
    AbsGreedy, ConversationPolicy, GreedyLearned, MaxEntropy, PolicyNet, PolicyParams, TwoActionRules, UniformRandom,
};
use crsirl_core::{Catalog, EmbeddingTable, World};
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    #[value(name = "lambda")]
    Lambda,
    #[value(name = "eta")]
    Eta,
    #[value(name = "beta")]
    Beta,
    #[value(name = "T_max")]
    TMax,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::Eta => "eta",
            SweepParam::Beta => "beta",
            SweepParam::TMax => "T_max",
        }
    }

    fn apply(self, cfg: &mut RunConfig, value: f64) -> Result<(), CliError> {
        match self {
            SweepParam::Lambda => cfg.lambda = value,
            SweepParam::Eta => cfg.eta = value,
            SweepParam::Beta => cfg.beta = value,
            SweepParam::TMax => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(CliError::field("T_max"));
                }
                cfg.t_max = value as usize;
            }
        }
        cfg.validate()
    }
}

struct Inputs {
    catalog: Catalog,
    splits: InteractionSplits,
    emb: EmbeddingTable,
}

impl Inputs {
    fn load(cfg: &RunConfig) -> Result<Self> {
        let catalog = load_catalog(&cfg.catalog_path())?;
        let splits = load_splits(&cfg.splits_path())?;
        let emb = load_embeddings(&cfg.embeddings_path())?;
        Ok(Inputs { catalog, splits, emb })
    }

    fn world(&self) -> Result<World<'_>> {
        Ok(World::new(&self.catalog, &self.emb)?)
    }

    fn policy_net(&self, cfg: &RunConfig) -> PolicyNet {
        PolicyNet::mean_pool(self.emb.dim(), cfg.policy_hidden, cfg.head_hidden, cfg.pool_top_n)
    }

    fn reward_net(&self, cfg: &RunConfig) -> RewardNet {
        RewardNet::for_dim(self.emb.dim(), cfg.reward_hidden)
    }
}

pub fn gen(cfg: &RunConfig) -> Result<()> {
    let catalog = generate_synthetic_world(&cfg.world_spec())?;
    let splits = split_interactions(&catalog, cfg.split_ratios(), cfg.split_seed)?;
    log::info!(
        "generated {} users, {} items, {} attributes; {}/{}/{} interactions",
        catalog.n_users(),
        catalog.n_items(),
        catalog.n_attrs(),
        splits.train.len(),
        splits.valid.len(),
        splits.test.len()
    );
    write_atomic(&cfg.catalog_path(), catalog.to_json()?.as_bytes())?;
    write_atomic(&cfg.splits_path(), serde_json::to_string_pretty(&splits)?.as_bytes())
}

pub fn embed(cfg: &RunConfig) -> Result<()> {
    let catalog = load_catalog(&cfg.catalog_path())?;
    let splits = load_splits(&cfg.splits_path())?;
    let emb = pretrain_embeddings(&splits.train, &catalog, &cfg.transe())?;
    write_atomic(&cfg.embeddings_path(), &emb.encode(cfg.checkpoint_format)?)
}

pub fn pretrain(cfg: &RunConfig) -> Result<()> {
    let inputs = Inputs::load(cfg)?;
    let net = inputs.policy_net(cfg);
    let theta = pretrain_pg(&net, &cfg.train_config(cfg.seeds[0]), inputs.world()?, &inputs.splits.valid)?;
    write_arrays(&cfg.policy_pg_path(), &net.to_arrays(&theta)?, cfg.checkpoint_format)
}

fn initial_theta(cfg: &RunConfig, net: &PolicyNet, init: bool, seed: u64) -> Result<PolicyParams> {
    if init {
        return Ok(net.init(seed));
    }
    let arrays = load_arrays("policy_pg", &cfg.policy_pg_path())?;
    Ok(net.params_from_arrays(&arrays)?)
}

/// Trains from the pretrained policy and returns the final θ and, for
/// CRSIRL, φ.
fn train_once(
    cfg: &RunConfig,
    inputs: &Inputs,
    init: bool,
    seed: u64,
    save: bool,
) -> Result<(PolicyParams, Option<RewardParams>)> {
    let net = inputs.policy_net(cfg);
    let tc = cfg.train_config(seed);
    let theta = initial_theta(cfg, &net, init, seed)?;
    let world = inputs.world()?;
    let pairs = &inputs.splits.valid;
    if cfg.algorithm == Algorithm::Pg {
        return Ok((continue_pg(&net, &theta, &tc, world, pairs, 2 * tc.outer_iterations)?, None));
    }
    let rnet = inputs.reward_net(cfg);
    let mut hook = |it: usize, th: &PolicyParams, phi: &RewardParams| -> crsirl_core::Result<()> {
        if save {
            log::info!("checkpoint at iteration {it}");
            save_policy(cfg, &net, th, Some((&rnet, phi))).map_err(|e| crsirl_core::Error::Io(format!("{e:#}")))?;
        }
        Ok(())
    };
    let out = train_crsirl(&net, &rnet, &theta, &tc, world, (pairs, pairs), &mut hook)?;
    if save {
        let mut log_bytes = Vec::new();
        write_train_log(&out.logs, &mut log_bytes)?;
        write_atomic(&cfg.train_log_path(), &log_bytes)?;
    }
    Ok((out.theta, Some(out.phi)))
}

fn save_policy(
    cfg: &RunConfig,
    net: &PolicyNet,
    theta: &PolicyParams,
    reward: Option<(&RewardNet, &RewardParams)>,
) -> Result<()> {
    write_arrays(&cfg.policy_path(), &net.to_arrays(theta)?, cfg.checkpoint_format)?;
    if let Some((rnet, phi)) = reward {
        write_arrays(&cfg.reward_path(), &rnet.to_arrays(phi)?, cfg.checkpoint_format)?;
    }
    Ok(())
}

pub fn train(cfg: &RunConfig, init: bool) -> Result<()> {
    if !matches!(cfg.algorithm, Algorithm::Crsirl | Algorithm::Pg) {
        return Err(CliError::Config(format!("`algorithm` {:?} is not trainable", cfg.algorithm)).into());
    }
    let inputs = Inputs::load(cfg)?;
    let (theta, phi) = train_once(cfg, &inputs, init, cfg.seeds[0], true)?;
    let rnet = inputs.reward_net(cfg);
    save_policy(cfg, &inputs.policy_net(cfg), &theta, phi.as_ref().map(|p| (&rnet, p)))
}

fn baseline(alg: Algorithm) -> Option<Box<dyn ConversationPolicy>> {
    match alg {
        Algorithm::Maxent => Some(Box::new(MaxEntropy)),
        Algorithm::Absgreedy => Some(Box::new(AbsGreedy)),
        Algorithm::Rulejudge => Some(Box::new(TwoActionRules)),
        Algorithm::Random => Some(Box::new(UniformRandom)),
        Algorithm::Pg | Algorithm::Crsirl => None,
    }
}

fn evaluate(cfg: &RunConfig, inputs: &Inputs, policy: &dyn ConversationPolicy, seeds: &[u64]) -> Result<MetricsReport> {
    let report = evaluate_policy(policy, &inputs.splits.test, &cfg.env(), seeds, inputs.world()?)?;
    log::info!(
        "{}: SR@{} {:.4}, AT {:.3}, hDCG {:.4}",
        policy.name(),
        cfg.t_max,
        report.sr_at_t,
        report.at,
        report.hdcg
    );
    Ok(report)
}

pub fn eval(cfg: &RunConfig) -> Result<()> {
    let inputs = Inputs::load(cfg)?;
    let policy: Box<dyn ConversationPolicy> = match baseline(cfg.algorithm) {
        Some(p) => p,
        None => {
            let (name, path) = match cfg.algorithm {
                Algorithm::Pg => ("policy_pg", cfg.policy_pg_path()),
                _ => ("policy", cfg.policy_path()),
            };
            let net = inputs.policy_net(cfg);
            let theta = net.params_from_arrays(&load_arrays(name, &path)?)?;
            Box::new(GreedyLearned { net, theta, label: name.into() })
        }
    };
    let report = evaluate(cfg, &inputs, policy.as_ref(), &cfg.seeds)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_atomic(&cfg.metrics_path(), &csv)
}

pub fn sweep(cfg: &RunConfig, param: SweepParam, values: &[f64], init: bool) -> Result<()> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()).into());
    }
    let inputs = Inputs::load(cfg)?;
    let mut csv = String::from("parameter,value,seed,sr_at_T,at,hdcg,n_episodes\n");
    for &value in values {
        let mut c = cfg.clone();
        param.apply(&mut c, value)?;
        let mut episodes = Vec::new();
        for &seed in &c.seeds {
            let (theta, _) = train_once(&c, &inputs, init, seed, false)
                .with_context(|| format!("{} = {value}, seed {seed}", param.name()))?;
            let policy = GreedyLearned { net: inputs.policy_net(&c), theta, label: "crsirl".into() };
            let r = evaluate(&c, &inputs, &policy, &[seed])?;
            let s = &r.per_seed[0];
            writeln!(
                csv,
                "{},{value},{seed},{:.6},{:.6},{:.6},{}",
                param.name(),
                s.sr_at_t,
                s.at,
                s.hdcg,
                s.n_episodes
            )?;
            episodes.extend(r.episodes);
        }
        let all = MetricsReport::from_episodes(&c.seeds, episodes, &c.env())?;
        writeln!(
            csv,
            "{},{value},all,{:.6},{:.6},{:.6},{}",
            param.name(),
            all.sr_at_t,
            all.at,
            all.hdcg,
            all.n_episodes
        )?;
    }
    write_atomic(&sweep_path(cfg, param), csv.as_bytes())
}

pub fn sweep_path(cfg: &RunConfig, param: SweepParam) -> std::path::PathBuf {
    cfg.out_dir.join(format!("sweep_{}.csv", param.name()))
}
