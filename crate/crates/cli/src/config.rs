//! Flat run configuration: JSON file first, then command-line overrides.

use crate::error::CliError;
use clap::ValueEnum;
use crsirl_core::bilevel::TrainConfig;
use crsirl_core::checkpoint::Encoding;
use crsirl_core::embedding::TransEConfig;
use crsirl_core::env::HandcraftedRewards;
use crsirl_core::{EnvConfig, RewardScheme, WorldSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pg,
    Crsirl,
    Maxent,
    Absgreedy,
    Rulejudge,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RewardKind {
    Sparse,
    Handcrafted,
    Rules,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub algorithm: Algorithm,
    pub reward: RewardKind,

    pub n_users: usize,
    pub n_items: usize,
    pub n_attrs: usize,
    pub attrs_per_item_min: usize,
    pub attrs_per_item_max: usize,
    pub interactions_per_user: usize,
    pub n_clusters: usize,
    pub world_seed: u64,

    pub train_ratio: f64,
    pub valid_ratio: f64,
    pub test_ratio: f64,
    pub split_seed: u64,

    pub embed_dim: usize,
    pub embed_epochs: usize,
    pub embed_margin: f64,
    pub embed_step_size: f64,
    pub embed_negatives: usize,
    pub embed_seed: u64,

    pub t_max: usize,
    pub k: usize,
    pub k_v: usize,
    pub k_p: usize,

    pub gamma: f64,
    pub eta: f64,
    pub beta: f64,
    pub lambda: f64,
    pub outer_iterations: usize,
    pub enable_hrs: bool,
    pub enable_rpm: bool,
    pub fixed_alpha: Option<f64>,
    pub buffer_capacity: usize,
    pub pretrain_episodes: usize,
    pub pretrain_step_size: f64,
    pub pg_baseline: Option<f64>,
    pub probe_every: usize,
    pub checkpoint_every: usize,
    pub policy_hidden: usize,
    pub head_hidden: usize,
    pub pool_top_n: usize,
    pub reward_hidden: usize,

    pub checkpoint_format: Encoding,
    pub out_dir: PathBuf,
    pub catalog: Option<PathBuf>,
    pub splits: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub policy_pg: Option<PathBuf>,
    pub policy: Option<PathBuf>,
    pub reward_params: Option<PathBuf>,
    pub train_log: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let w = WorldSpec::default();
        let e = TransEConfig::default();
        let t = TrainConfig::default();
        RunConfig {
            seeds: vec![0],
            algorithm: Algorithm::Crsirl,
            reward: RewardKind::Sparse,
            n_users: w.n_users,
            n_items: w.n_items,
            n_attrs: w.n_attrs,
            attrs_per_item_min: w.attrs_per_item.0,
            attrs_per_item_max: w.attrs_per_item.1,
            interactions_per_user: w.interactions_per_user,
            n_clusters: w.n_clusters,
            world_seed: w.seed,
            train_ratio: 0.7,
            valid_ratio: 0.15,
            test_ratio: 0.15,
            split_seed: 0,
            embed_dim: e.dim,
            embed_epochs: e.epochs,
            embed_margin: e.margin,
            embed_step_size: e.step_size,
            embed_negatives: e.neg_per_pos,
            embed_seed: e.seed,
            t_max: t.env.t_max,
            k: t.env.k,
            k_v: t.env.k_v,
            k_p: t.env.k_p,
            gamma: t.gamma,
            eta: t.eta,
            beta: t.beta,
            lambda: t.lambda,
            outer_iterations: t.outer_iterations,
            enable_hrs: t.enable_hrs,
            enable_rpm: t.enable_rpm,
            fixed_alpha: t.fixed_alpha,
            buffer_capacity: t.buffer_capacity,
            pretrain_episodes: t.pretrain_episodes,
            pretrain_step_size: t.pretrain_step_size,
            pg_baseline: t.pg_baseline,
            probe_every: t.probe_every,
            checkpoint_every: t.checkpoint_every,
            policy_hidden: t.policy_hidden,
            head_hidden: t.head_hidden,
            pool_top_n: t.pool_top_n,
            reward_hidden: t.reward_hidden,
            checkpoint_format: Encoding::Binary,
            out_dir: PathBuf::from("out"),
            catalog: None,
            splits: None,
            embeddings: None,
            policy_pg: None,
            policy: None,
            reward_params: None,
            train_log: None,
            metrics: None,
        }
    }
}

/// Command-line values that replace file values when present.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Comma-separated seed list.
    #[arg(long, global = true, value_delimiter = ',')]
    pub seed: Option<Vec<u64>>,
    /// Artifact directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub reward: Option<RewardKind>,
    #[arg(long, global = true, value_enum)]
    pub algorithm: Option<Algorithm>,
    #[arg(long, global = true)]
    pub catalog: Option<PathBuf>,
    #[arg(long, global = true)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub t_max: Option<usize>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub k_v: Option<usize>,
    #[arg(long, global = true)]
    pub k_p: Option<usize>,
    #[arg(long, global = true)]
    pub outer_iterations: Option<usize>,
    #[arg(long, global = true)]
    pub pretrain_episodes: Option<usize>,
    #[arg(long, global = true)]
    pub fixed_alpha: Option<f64>,
    /// Drop the hindsight-shaped extrinsic objective.
    #[arg(long, global = true)]
    pub no_hrs: bool,
    /// Drop the preference objective.
    #[arg(long, global = true)]
    pub no_rpm: bool,
}

macro_rules! override_fields {
    ($src:expr, $dst:expr, $($f:ident),*) => {
        $(if let Some(v) = $src.$f.clone() { $dst.$f = v; })*
    };
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        override_fields!(
            self,
            cfg,
            reward,
            algorithm,
            lambda,
            eta,
            beta,
            gamma,
            t_max,
            k,
            k_v,
            k_p,
            outer_iterations,
            pretrain_episodes
        );
        if let Some(s) = &self.seed {
            cfg.seeds = s.clone();
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if self.catalog.is_some() {
            cfg.catalog = self.catalog.clone();
        }
        if self.embeddings.is_some() {
            cfg.embeddings = self.embeddings.clone();
        }
        if self.fixed_alpha.is_some() {
            cfg.fixed_alpha = self.fixed_alpha;
        }
        if self.no_hrs {
            cfg.enable_hrs = false;
        }
        if self.no_rpm {
            cfg.enable_rpm = false;
        }
    }
}

/// Reads the file (whitespace-only means all defaults), applies overrides
/// and validates.
pub fn parse_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        None => RunConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::MissingInput {
                name: "config".into(),
                path: p.to_path_buf(),
                reason: e.to_string(),
            })?;
            if text.trim().is_empty() {
                RunConfig::default()
            } else {
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
        }
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let field = |name: &str, ok: bool| if ok { Ok(()) } else { Err(CliError::field(name)) };
        field("seeds", !self.seeds.is_empty())?;
        field("attrs_per_item_min", self.attrs_per_item_min >= 1)?;
        field("attrs_per_item_max", self.attrs_per_item_max >= self.attrs_per_item_min)?;
        for (name, r) in
            [("train_ratio", self.train_ratio), ("valid_ratio", self.valid_ratio), ("test_ratio", self.test_ratio)]
        {
            field(name, r.is_finite() && r >= 0.0)?;
        }
        field("embed_dim", self.embed_dim >= 1)?;
        field("t_max", self.t_max >= 1)?;
        field("k", self.k >= 1)?;
        field("k_v", self.k_v >= self.k)?;
        self.train_config(self.seeds[0]).validate().map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn world_spec(&self) -> WorldSpec {
        WorldSpec {
            n_users: self.n_users,
            n_items: self.n_items,
            n_attrs: self.n_attrs,
            attrs_per_item: (self.attrs_per_item_min, self.attrs_per_item_max),
            interactions_per_user: self.interactions_per_user,
            n_clusters: self.n_clusters,
            seed: self.world_seed,
        }
    }

    pub fn split_ratios(&self) -> (f64, f64, f64) {
        (self.train_ratio, self.valid_ratio, self.test_ratio)
    }

    pub fn transe(&self) -> TransEConfig {
        TransEConfig {
            dim: self.embed_dim,
            epochs: self.embed_epochs,
            margin: self.embed_margin,
            step_size: self.embed_step_size,
            neg_per_pos: self.embed_negatives,
            seed: self.embed_seed,
        }
    }

    pub fn env(&self) -> EnvConfig {
        EnvConfig { t_max: self.t_max, k: self.k, k_v: self.k_v, k_p: self.k_p }
    }

    pub fn scheme(&self) -> RewardScheme {
        match self.reward {
            RewardKind::Sparse => RewardScheme::sparse(),
            RewardKind::Handcrafted => RewardScheme::Handcrafted(HandcraftedRewards::default()),
            RewardKind::Rules => RewardScheme::RuleBased,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            eta: self.eta,
            beta: self.beta,
            lambda: self.lambda,
            gamma: self.gamma,
            env: self.env(),
            scheme: self.scheme(),
            outer_iterations: self.outer_iterations,
            enable_hrs: self.enable_hrs,
            enable_rpm: self.enable_rpm,
            fixed_alpha: self.fixed_alpha,
            seed,
            buffer_capacity: self.buffer_capacity,
            pretrain_episodes: self.pretrain_episodes,
            pretrain_step_size: self.pretrain_step_size,
            pg_baseline: self.pg_baseline,
            probe_every: self.probe_every,
            checkpoint_every: self.checkpoint_every,
            policy_hidden: self.policy_hidden,
            head_hidden: self.head_hidden,
            pool_top_n: self.pool_top_n,
            reward_hidden: self.reward_hidden,
        }
    }

    fn artifact(&self, explicit: &Option<PathBuf>, name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out_dir.join(name))
    }

    pub fn catalog_path(&self) -> PathBuf {
        self.artifact(&self.catalog, "catalog.json")
    }

    pub fn splits_path(&self) -> PathBuf {
        self.artifact(&self.splits, "splits.json")
    }

    pub fn embeddings_path(&self) -> PathBuf {
        self.artifact(&self.embeddings, "embeddings.ckpt")
    }

    pub fn policy_pg_path(&self) -> PathBuf {
        self.artifact(&self.policy_pg, "policy_pg.ckpt")
    }

    pub fn policy_path(&self) -> PathBuf {
        self.artifact(&self.policy, "policy.ckpt")
    }

    pub fn reward_path(&self) -> PathBuf {
        self.artifact(&self.reward_params, "reward.ckpt")
    }

    pub fn train_log_path(&self) -> PathBuf {
        self.artifact(&self.train_log, "train_log.csv")
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.artifact(&self.metrics, "metrics.csv")
    }
}
