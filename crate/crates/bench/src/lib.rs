//! Shared fixtures for the benchmarks.

use crsirl_core::bilevel::{rollout, ActionMode, RolloutSpec, Trajectory};
use crsirl_core::catalog::generate_synthetic_world;
use crsirl_core::intrinsic::{RewardNet, RewardParams};
use crsirl_core::policy::{PolicyNet, PolicyParams};
use crsirl_core::{Catalog, EmbeddingTable, EnvConfig, RewardScheme, World, WorldSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub catalog: Catalog,
    pub emb: EmbeddingTable,
    pub env: EnvConfig,
    pub net: PolicyNet,
    pub theta: PolicyParams,
    pub reward_net: RewardNet,
    pub phi: RewardParams,
}

impl Fixture {
    /// Default synthetic world with random 16-dimensional embeddings.
    pub fn new() -> Self {
        let catalog = generate_synthetic_world(&WorldSpec::default()).expect("valid world");
        let emb = EmbeddingTable::random(&catalog, 16, 1);
        let net = PolicyNet::mean_pool(16, 16, 16, 5);
        let reward_net = RewardNet::for_dim(16, 8);
        Fixture {
            theta: net.init(2),
            phi: reward_net.init(3),
            catalog,
            emb,
            env: EnvConfig::default(),
            net,
            reward_net,
        }
    }

    pub fn world(&self) -> World<'_> {
        World::new(&self.catalog, &self.emb).expect("embeddings cover the catalog")
    }

    /// A sampled trajectory that ran for at least `min_len` turns.
    pub fn trajectory(&self, min_len: usize) -> Trajectory {
        let scheme = RewardScheme::sparse();
        let spec = RolloutSpec {
            net: &self.net,
            theta: &self.theta,
            reward: Some((&self.reward_net, &self.phi)),
            scheme: &scheme,
            env: &self.env,
            mode: ActionMode::Sample,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pairs = self.catalog.interactions();
        for i in 0.. {
            let (u, v) = pairs[i % pairs.len()];
            let t = rollout(&spec, u, v, &mut rng, self.world()).expect("rollout");
            if t.len() >= min_len {
                return t;
            }
        }
        unreachable!()
    }
}

impl Default for Fixture {
    fn default() -> Self {
        Fixture::new()
    }
}
