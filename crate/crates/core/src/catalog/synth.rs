use super::Catalog;
use crate::error::{Error, Result};
use crate::ids::{AttrId, ItemId, UserId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Probability that an attribute draw comes from the item's cluster.
const ATTR_AFFINITY: f64 = 0.8;
/// Probability that an interaction draw comes from the user's cluster.
const INTERACTION_AFFINITY: f64 = 0.85;

/// Parameters of the cluster-structured synthetic world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub n_attrs: usize,
    pub attrs_per_item: (usize, usize),
    pub interactions_per_user: usize,
    pub n_clusters: usize,
    pub seed: u64,
}

/// A generated catalog together with its latent cluster labels.
#[derive(Clone, Debug)]
pub struct SyntheticWorld {
    pub catalog: Catalog,
    pub user_clusters: Vec<usize>,
    pub item_clusters: Vec<usize>,
}

impl Default for WorldSpec {
    /// 30 users, 60 items and 15 attributes in three clusters.
    fn default() -> Self {
        WorldSpec {
            n_users: 30,
            n_items: 60,
            n_attrs: 15,
            attrs_per_item: (8, 12),
            interactions_per_user: 8,
            n_clusters: 3,
            seed: 0,
        }
    }
}

impl WorldSpec {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.attrs_per_item;
        if self.n_users == 0
            || self.n_items == 0
            || self.n_attrs == 0
            || self.interactions_per_user == 0
            || self.n_clusters == 0
        {
            return Err(Error::invalid("world counts must be at least 1"));
        }
        if lo == 0 || lo > hi {
            return Err(Error::invalid(format!("empty attrs_per_item range [{lo}, {hi}]")));
        }
        if hi > self.n_attrs {
            return Err(Error::invalid(format!("attrs_per_item upper bound {hi} exceeds n_attrs {}", self.n_attrs)));
        }
        if self.n_clusters > self.n_users.min(self.n_items) {
            return Err(Error::invalid(format!("n_clusters {} exceeds min(n_users, n_items)", self.n_clusters)));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SyntheticWorld> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let user_clusters = assign_clusters(self.n_users, self.n_clusters, &mut rng);
        let item_clusters = assign_clusters(self.n_items, self.n_clusters, &mut rng);

        let home_attrs: Vec<Vec<usize>> =
            (0..self.n_clusters).map(|c| (0..self.n_attrs).filter(|a| a % self.n_clusters == c).collect()).collect();

        let (lo, hi) = self.attrs_per_item;
        let mut item_attrs = Vec::with_capacity(self.n_items);
        for &cluster in &item_clusters {
            let k = rng.gen_range(lo..=hi);
            let mut chosen = BTreeSet::new();
            while chosen.len() < k {
                let home: Vec<usize> =
                    home_attrs[cluster].iter().copied().filter(|a| !chosen.contains(&AttrId::from(*a))).collect();
                let a = if !home.is_empty() && rng.gen_bool(ATTR_AFFINITY) {
                    home[rng.gen_range(0..home.len())]
                } else {
                    let rest: Vec<usize> = (0..self.n_attrs).filter(|a| !chosen.contains(&AttrId::from(*a))).collect();
                    rest[rng.gen_range(0..rest.len())]
                };
                chosen.insert(AttrId::from(a));
            }
            item_attrs.push(chosen);
        }

        let per_user = self.interactions_per_user.min(self.n_items);
        let mut interactions = Vec::with_capacity(self.n_users * per_user);
        for (u, &uc) in user_clusters.iter().enumerate() {
            let mut own: Vec<usize> = (0..self.n_items).filter(|&v| item_clusters[v] == uc).collect();
            let mut other: Vec<usize> = (0..self.n_items).filter(|&v| item_clusters[v] != uc).collect();
            for _ in 0..per_user {
                let prefer_own = rng.gen_bool(INTERACTION_AFFINITY);
                let pool = match (prefer_own, own.is_empty(), other.is_empty()) {
                    (true, false, _) | (false, false, true) => &mut own,
                    _ => &mut other,
                };
                let v = pool.swap_remove(rng.gen_range(0..pool.len()));
                interactions.push((UserId::from(u), ItemId::from(v)));
            }
        }

        let catalog = Catalog::new(
            (0..self.n_users).map(|i| format!("u{i}")).collect(),
            (0..self.n_items).map(|i| format!("v{i}")).collect(),
            (0..self.n_attrs).map(|i| format!("p{i}")).collect(),
            item_attrs,
            interactions,
        )?;
        Ok(SyntheticWorld { catalog, user_clusters, item_clusters })
    }
}

/// Balanced random assignment: every cluster receives at least one member.
fn assign_clusters(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(rng);
    labels
}

/// Generates a deterministic, cluster-structured catalog.
pub fn generate_synthetic_world(spec: &WorldSpec) -> Result<Catalog> {
    spec.generate().map(|w| w.catalog)
}
