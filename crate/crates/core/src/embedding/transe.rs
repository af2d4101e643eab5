//! Translation-embedding pretraining over the user–item–attribute graph.
//!
//! Triples are `(u, interacts, v)` for every training interaction and
//! `(v, has_attribute, p)` for every item attribute. Each positive triple is
//! contrasted with `neg_per_pos` corruptions (head or tail replaced by a
//! uniformly drawn entity of the same class) under the margin hinge
//! `max(0, margin + d(h, r, t) - d(h', r, t'))`, `d` being the L2 distance of
//! `h + r - t`. Touched entity vectors are renormalized after every update.

use super::{EmbeddingTable, REL_HAS_ATTRIBUTE, REL_INTERACTS};
use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransEConfig {
    pub dim: usize,
    pub epochs: usize,
    pub margin: f64,
    pub step_size: f64,
    pub neg_per_pos: usize,
    pub seed: u64,
}

impl Default for TransEConfig {
    fn default() -> Self {
        TransEConfig { dim: 16, epochs: 50, margin: 1.0, step_size: 0.01, neg_per_pos: 1, seed: 0 }
    }
}

/// Per-triple margin hinge.
pub fn hinge_loss(margin: f64, pos_dist: f64, neg_dist: f64) -> f64 {
    (margin + pos_dist - neg_dist).max(0.0)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    User,
    Item,
    Attr,
}

/// Entity address in the global (users, items, attrs) numbering.
#[derive(Clone, Copy, PartialEq, Eq)]
struct Ent {
    class: Class,
    index: usize,
}

#[derive(Clone, Copy)]
struct Triple {
    head: Ent,
    rel: usize,
    tail: Ent,
}

struct Store<'a> {
    dim: usize,
    users: &'a mut [f64],
    items: &'a mut [f64],
    attrs: &'a mut [f64],
    relations: &'a mut [Vec<f64>; 2],
}

impl Store<'_> {
    fn get(&self, e: Ent) -> &[f64] {
        let d = self.dim;
        let block: &[f64] = match e.class {
            Class::User => self.users,
            Class::Item => self.items,
            Class::Attr => self.attrs,
        };
        &block[e.index * d..(e.index + 1) * d]
    }

    fn get_mut(&mut self, e: Ent) -> &mut [f64] {
        let d = self.dim;
        let block: &mut [f64] = match e.class {
            Class::User => self.users,
            Class::Item => self.items,
            Class::Attr => self.attrs,
        };
        &mut block[e.index * d..(e.index + 1) * d]
    }

    /// `h + r - t`.
    fn residual(&self, t: &Triple) -> Vec<f64> {
        let (h, r, tl) = (self.get(t.head), &self.relations[t.rel], self.get(t.tail));
        h.iter().zip(r).zip(tl).map(|((a, b), c)| a + b - c).collect()
    }

    /// Moves the triple along `-step * sign * ∂d/∂(h, r, t)`.
    fn descend(&mut self, t: &Triple, residual: &[f64], dist: f64, scale: f64) {
        if dist <= 0.0 {
            return;
        }
        let g: Vec<f64> = residual.iter().map(|x| scale * x / dist).collect();
        for (x, gi) in self.get_mut(t.head).iter_mut().zip(&g) {
            *x -= gi;
        }
        for (x, gi) in self.relations[t.rel].iter_mut().zip(&g) {
            *x -= gi;
        }
        for (x, gi) in self.get_mut(t.tail).iter_mut().zip(&g) {
            *x += gi;
        }
    }

    fn normalize(&mut self, e: Ent) {
        normalize(self.get_mut(e));
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn class_size(catalog: &Catalog, c: Class) -> usize {
    match c {
        Class::User => catalog.n_users(),
        Class::Item => catalog.n_items(),
        Class::Attr => catalog.n_attrs(),
    }
}

fn corrupt(t: &Triple, catalog: &Catalog, rng: &mut ChaCha8Rng) -> Triple {
    let replace_head = rng.gen_bool(0.5);
    let slot = if replace_head { t.head } else { t.tail };
    let n = class_size(catalog, slot.class);
    let mut index = rng.gen_range(0..n);
    if n > 1 {
        while index == slot.index {
            index = rng.gen_range(0..n);
        }
    }
    let e = Ent { class: slot.class, index };
    if replace_head {
        Triple { head: e, ..*t }
    } else {
        Triple { tail: e, ..*t }
    }
}

/// Trains embeddings and returns them with the mean hinge loss of each epoch.
pub fn pretrain_embeddings_with_history(
    train: &[(UserId, ItemId)],
    catalog: &Catalog,
    cfg: &TransEConfig,
) -> Result<(EmbeddingTable, Vec<f64>)> {
    if train.is_empty() {
        return Err(Error::invalid("empty training interaction set"));
    }
    if cfg.dim == 0 {
        return Err(Error::invalid("dim must be at least 1"));
    }
    if cfg.margin.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::invalid("margin must be positive"));
    }
    if !(cfg.step_size.is_finite() && cfg.step_size >= 0.0) {
        return Err(Error::invalid("step_size must be finite and nonnegative"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.dim;
    let bound = 6.0 / (d as f64).sqrt();
    let mut table = EmbeddingTable::zeros(catalog, d);
    {
        let (users, items, attrs, rels) = table.blocks_mut();
        for block in [&mut *users, &mut *items, &mut *attrs] {
            block.iter_mut().for_each(|x| *x = rng.gen_range(-bound..bound));
            block.chunks_mut(d).for_each(normalize);
        }
        for r in rels.iter_mut() {
            r.iter_mut().for_each(|x| *x = rng.gen_range(-bound..bound));
            normalize(r);
        }
    }

    let mut triples: Vec<Triple> = train
        .iter()
        .map(|&(u, v)| Triple {
            head: Ent { class: Class::User, index: u.index() },
            rel: REL_INTERACTS,
            tail: Ent { class: Class::Item, index: v.index() },
        })
        .collect();
    for v in catalog.items() {
        for p in catalog.item_attrs(v) {
            triples.push(Triple {
                head: Ent { class: Class::Item, index: v.index() },
                rel: REL_HAS_ATTRIBUTE,
                tail: Ent { class: Class::Attr, index: p.index() },
            });
        }
    }

    let mut history = Vec::with_capacity(cfg.epochs);
    let (users, items, attrs, relations) = table.blocks_mut();
    let mut store = Store { dim: d, users, items, attrs, relations };
    for _ in 0..cfg.epochs {
        triples.shuffle(&mut rng);
        let mut total = 0.0;
        let mut count = 0usize;
        for t in &triples {
            for _ in 0..cfg.neg_per_pos.max(1) {
                let neg = corrupt(t, catalog, &mut rng);
                let rp = store.residual(t);
                let rn = store.residual(&neg);
                let dp = rp.iter().map(|x| x * x).sum::<f64>().sqrt();
                let dn = rn.iter().map(|x| x * x).sum::<f64>().sqrt();
                let loss = hinge_loss(cfg.margin, dp, dn);
                total += loss;
                count += 1;
                if loss > 0.0 {
                    store.descend(t, &rp, dp, cfg.step_size);
                    store.descend(&neg, &rn, dn, -cfg.step_size);
                    for e in [t.head, t.tail, neg.head, neg.tail] {
                        store.normalize(e);
                    }
                }
            }
        }
        history.push(total / count as f64);
    }
    if !table.entity_rows().flatten().chain(table.relation(0)).chain(table.relation(1)).all(|x| x.is_finite()) {
        return Err(Error::Numeric("embedding pretraining diverged".into()));
    }
    Ok((table, history))
}

/// Trains translation embeddings on `train` plus the catalog's attribute edges.
pub fn pretrain_embeddings(
    train: &[(UserId, ItemId)],
    catalog: &Catalog,
    cfg: &TransEConfig,
) -> Result<EmbeddingTable> {
    pretrain_embeddings_with_history(train, catalog, cfg).map(|(t, _)| t)
}
