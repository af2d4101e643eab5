//! Users, items, attributes and the observed interactions between them.

mod split;
mod synth;

pub use split::{split_interactions, InteractionSplits};
pub use synth::{generate_synthetic_world, SyntheticWorld, WorldSpec};

use crate::error::{Error, Result};
use crate::ids::{AttrId, ItemId, UserId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::path::Path;

/// The recommendation world.
///
/// Entities are stored densely; an id is its position in the corresponding
/// list. Every item carries a nonempty, sorted attribute set `P_v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Catalog {
    users: Vec<String>,
    items: Vec<String>,
    attributes: Vec<String>,
    item_attrs: Vec<Vec<AttrId>>,
    interactions: Vec<(UserId, ItemId)>,
    items_by_attr: Vec<Vec<ItemId>>,
}

impl Catalog {
    pub fn new(
        users: Vec<String>,
        items: Vec<String>,
        attributes: Vec<String>,
        item_attrs: Vec<BTreeSet<AttrId>>,
        interactions: Vec<(UserId, ItemId)>,
    ) -> Result<Self> {
        check_unique("user", &users)?;
        check_unique("item", &items)?;
        check_unique("attribute", &attributes)?;
        if item_attrs.len() != items.len() {
            return Err(Error::invalid(format!("{} attribute sets for {} items", item_attrs.len(), items.len())));
        }
        let mut items_by_attr = vec![Vec::new(); attributes.len()];
        for (i, attrs) in item_attrs.iter().enumerate() {
            if attrs.is_empty() {
                return Err(Error::invalid(format!("item {} has no attributes", items[i])));
            }
            for a in attrs {
                let slot = items_by_attr
                    .get_mut(a.index())
                    .ok_or_else(|| Error::invalid(format!("item {} references unknown attribute {a}", items[i])))?;
                slot.push(ItemId::from(i));
            }
        }
        for &(u, v) in &interactions {
            if u.index() >= users.len() || v.index() >= items.len() {
                return Err(Error::invalid(format!("interaction ({u}, {v}) references unknown ids")));
            }
        }
        Ok(Catalog {
            users,
            items,
            attributes,
            item_attrs: item_attrs.into_iter().map(|s| s.into_iter().collect()).collect(),
            interactions,
            items_by_attr,
        })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_attrs(&self) -> usize {
        self.attributes.len()
    }

    pub fn user_name(&self, u: UserId) -> &str {
        &self.users[u.index()]
    }

    pub fn item_name(&self, v: ItemId) -> &str {
        &self.items[v.index()]
    }

    pub fn attr_name(&self, p: AttrId) -> &str {
        &self.attributes[p.index()]
    }

    /// `P_v`, sorted ascending.
    pub fn item_attrs(&self, v: ItemId) -> &[AttrId] {
        &self.item_attrs[v.index()]
    }

    /// `V_p`, the items holding attribute `p`, sorted ascending.
    pub fn items_with_attr(&self, p: AttrId) -> &[ItemId] {
        &self.items_by_attr[p.index()]
    }

    pub fn item_has_attr(&self, v: ItemId, p: AttrId) -> bool {
        self.item_attrs[v.index()].binary_search(&p).is_ok()
    }

    pub fn interactions(&self) -> &[(UserId, ItemId)] {
        &self.interactions
    }

    pub fn contains_user(&self, u: UserId) -> bool {
        u.index() < self.users.len()
    }

    pub fn contains_item(&self, v: ItemId) -> bool {
        v.index() < self.items.len()
    }

    pub fn contains_attr(&self, p: AttrId) -> bool {
        p.index() < self.attributes.len()
    }

    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        (0..self.items.len()).map(ItemId::from)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CatalogFile {
            users: self.users.clone(),
            attributes: Some(self.attributes.clone()),
            items: self
                .items
                .iter()
                .zip(&self.item_attrs)
                .map(|(id, attrs)| ItemRecord {
                    id: id.clone(),
                    attributes: attrs.iter().map(|a| self.attributes[a.index()].clone()).collect(),
                })
                .collect(),
            interactions: self
                .interactions
                .iter()
                .map(|&(u, v)| (self.users[u.index()].clone(), self.items[v.index()].clone()))
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Parses the catalog document. When `attributes` is absent the
    /// attribute list is the sorted union of all item attribute names.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: CatalogFile = serde_json::from_str(text)?;
        let attributes = match file.attributes {
            Some(a) => a,
            None => file
                .items
                .iter()
                .flat_map(|r| r.attributes.iter().cloned())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        };
        let attr_ix = index_of(&attributes);
        let user_ix = index_of(&file.users);
        let items: Vec<String> = file.items.iter().map(|r| r.id.clone()).collect();
        let item_ix = index_of(&items);
        let mut item_attrs = Vec::with_capacity(items.len());
        for r in &file.items {
            let mut set = BTreeSet::new();
            for a in &r.attributes {
                let id = attr_ix.get(a.as_str()).ok_or_else(|| Error::invalid(format!("unknown attribute {a:?}")))?;
                set.insert(AttrId::from(*id));
            }
            item_attrs.push(set);
        }
        let mut interactions = Vec::with_capacity(file.interactions.len());
        for (u, v) in &file.interactions {
            let ui = user_ix.get(u.as_str()).ok_or_else(|| Error::invalid(format!("unknown user {u:?}")))?;
            let vi = item_ix.get(v.as_str()).ok_or_else(|| Error::invalid(format!("unknown item {v:?}")))?;
            interactions.push((UserId::from(*ui), ItemId::from(*vi)));
        }
        Catalog::new(file.users, items, attributes, item_attrs, interactions)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Catalog::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    users: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attributes: Option<Vec<String>>,
    items: Vec<ItemRecord>,
    interactions: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ItemRecord {
    id: String,
    attributes: Vec<String>,
}

fn index_of(names: &[String]) -> HashMap<&str, usize> {
    names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect()
}

fn check_unique(kind: &str, names: &[String]) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(names.len());
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(Error::invalid(format!("duplicate {kind} id {n:?}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn rejects_empty_attribute_set() {
        let err = Catalog::new(names("u", 1), names("v", 1), names("p", 1), vec![BTreeSet::new()], vec![]);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rejects_duplicate_ids() {
        let err =
            Catalog::new(vec!["a".into(), "a".into()], names("v", 1), names("p", 1), vec![[AttrId(0)].into()], vec![]);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rejects_dangling_interaction() {
        let err = Catalog::new(
            names("u", 1),
            names("v", 1),
            names("p", 1),
            vec![[AttrId(0)].into()],
            vec![(UserId(0), ItemId(3))],
        );
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn json_round_trip_and_derived_attribute_list() {
        let text = r#"{
            "users": ["alice"],
            "items": [{"id": "x", "attributes": ["rock", "pop"]}, {"id": "y", "attributes": ["pop"]}],
            "interactions": [["alice", "y"]]
        }"#;
        let c = Catalog::from_json(text).unwrap();
        assert_eq!(c.n_attrs(), 2);
        assert_eq!(c.attr_name(AttrId(0)), "pop");
        assert_eq!(c.items_with_attr(AttrId(0)), &[ItemId(0), ItemId(1)]);
        let again = Catalog::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(again, c);
    }
}
