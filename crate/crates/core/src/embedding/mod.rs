//! Pretrained user / item / attribute vectors.

mod transe;

pub use transe::{hinge_loss, pretrain_embeddings, pretrain_embeddings_with_history, TransEConfig};

use crate::catalog::Catalog;
use crate::checkpoint::{Encoding, NamedArrays, Section};
use crate::error::{Error, Result};
use crate::ids::{AttrId, ItemId, UserId};
use serde_json::json;
use std::path::Path;

/// Index of the `interacts` relation in [`EmbeddingTable::relation`].
pub const REL_INTERACTS: usize = 0;
/// Index of the `has_attribute` relation.
pub const REL_HAS_ATTRIBUTE: usize = 1;

/// Row-major vectors of a shared dimension `dim` for every entity.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    users: Vec<f64>,
    items: Vec<f64>,
    attrs: Vec<f64>,
    relations: [Vec<f64>; 2],
}

impl EmbeddingTable {
    pub fn new(
        dim: usize,
        users: Vec<f64>,
        items: Vec<f64>,
        attrs: Vec<f64>,
        relations: [Vec<f64>; 2],
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dim must be positive"));
        }
        for (name, block) in [("users", &users), ("items", &items), ("attrs", &attrs)] {
            if block.len() % dim != 0 {
                return Err(Error::invalid(format!("{name} block is not a multiple of dim")));
            }
        }
        if relations.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("relation vectors must have length dim"));
        }
        let all = users.iter().chain(&items).chain(&attrs).chain(relations.iter().flatten());
        if !all.into_iter().all(|x| x.is_finite()) {
            return Err(Error::Numeric("non-finite embedding entry".into()));
        }
        Ok(EmbeddingTable { dim, users, items, attrs, relations })
    }

    /// All-zero table sized for `catalog`.
    pub fn zeros(catalog: &Catalog, dim: usize) -> Self {
        EmbeddingTable {
            dim,
            users: vec![0.0; catalog.n_users() * dim],
            items: vec![0.0; catalog.n_items() * dim],
            attrs: vec![0.0; catalog.n_attrs() * dim],
            relations: [vec![0.0; dim], vec![0.0; dim]],
        }
    }

    /// Random unit-norm entity vectors and unit relation vectors.
    pub fn random(catalog: &Catalog, dim: usize, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut t = EmbeddingTable::zeros(catalog, dim.max(1));
        let d = t.dim;
        let (users, items, attrs, rels) = t.blocks_mut();
        let [r0, r1] = rels;
        let blocks = [&mut users[..], &mut items[..], &mut attrs[..], &mut r0[..], &mut r1[..]];
        for block in blocks {
            for row in block.chunks_mut(d) {
                row.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
                let n = row.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                row.iter_mut().for_each(|x| *x /= n);
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_users(&self) -> usize {
        self.users.len() / self.dim
    }

    pub fn n_items(&self) -> usize {
        self.items.len() / self.dim
    }

    pub fn n_attrs(&self) -> usize {
        self.attrs.len() / self.dim
    }

    pub fn user(&self, u: UserId) -> Option<&[f64]> {
        row(&self.users, self.dim, u.index())
    }

    pub fn item(&self, v: ItemId) -> Option<&[f64]> {
        row(&self.items, self.dim, v.index())
    }

    pub fn attr(&self, p: AttrId) -> Option<&[f64]> {
        row(&self.attrs, self.dim, p.index())
    }

    pub fn relation(&self, r: usize) -> &[f64] {
        &self.relations[r]
    }

    pub fn user_mut(&mut self, u: UserId) -> &mut [f64] {
        let d = self.dim;
        &mut self.users[u.index() * d..(u.index() + 1) * d]
    }

    pub fn item_mut(&mut self, v: ItemId) -> &mut [f64] {
        let d = self.dim;
        &mut self.items[v.index() * d..(v.index() + 1) * d]
    }

    pub fn attr_mut(&mut self, p: AttrId) -> &mut [f64] {
        let d = self.dim;
        &mut self.attrs[p.index() * d..(p.index() + 1) * d]
    }

    #[allow(clippy::type_complexity)]
    pub(crate) fn blocks_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64], &mut [Vec<f64>; 2]) {
        (&mut self.users, &mut self.items, &mut self.attrs, &mut self.relations)
    }

    /// Checks that every catalog entity has a vector.
    pub fn covers(&self, catalog: &Catalog) -> Result<()> {
        if self.n_users() < catalog.n_users()
            || self.n_items() < catalog.n_items()
            || self.n_attrs() < catalog.n_attrs()
        {
            return Err(Error::invalid(format!(
                "embeddings ({}, {}, {}) do not cover catalog ({}, {}, {})",
                self.n_users(),
                self.n_items(),
                self.n_attrs(),
                catalog.n_users(),
                catalog.n_items(),
                catalog.n_attrs()
            )));
        }
        Ok(())
    }

    /// Iterates over every user, item and attribute vector.
    pub fn entity_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.users.chunks(self.dim).chain(self.items.chunks(self.dim)).chain(self.attrs.chunks(self.dim))
    }

    pub fn to_arrays(&self) -> NamedArrays {
        let d = self.dim;
        NamedArrays {
            meta: json!({
                "kind": "embeddings",
                "dim": d,
                "users": self.n_users(),
                "items": self.n_items(),
                "attributes": self.n_attrs(),
            }),
            sections: vec![
                Section::new("users", vec![self.n_users(), d], self.users.clone()),
                Section::new("items", vec![self.n_items(), d], self.items.clone()),
                Section::new("attributes", vec![self.n_attrs(), d], self.attrs.clone()),
                Section::new("relations", vec![2, d], self.relations.concat()),
            ],
        }
    }

    pub fn from_arrays(a: &NamedArrays) -> Result<Self> {
        let dim = a
            .meta
            .get("dim")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Format("embedding header lacks dim".into()))? as usize;
        let rel = &a.section("relations")?.values;
        if rel.len() != 2 * dim {
            return Err(Error::Format("relations section has wrong length".into()));
        }
        EmbeddingTable::new(
            dim,
            a.section("users")?.values.clone(),
            a.section("items")?.values.clone(),
            a.section("attributes")?.values.clone(),
            [rel[..dim].to_vec(), rel[dim..].to_vec()],
        )
    }

    pub fn encode(&self, encoding: Encoding) -> Result<Vec<u8>> {
        self.to_arrays().encode(encoding)
    }

    pub fn load(path: &Path) -> Result<Self> {
        EmbeddingTable::from_arrays(&NamedArrays::load(path)?)
    }
}

fn row(block: &[f64], dim: usize, i: usize) -> Option<&[f64]> {
    block.get(i * dim..(i + 1) * dim)
}
