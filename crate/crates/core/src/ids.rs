//! Dense identifiers for the three entity classes.
//!
//! Ids are indices into the owning [`Catalog`](crate::catalog::Catalog)'s
//! entity lists, so "ascending id" is the catalog's declaration order.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A (user, target item) interaction.
pub type Interaction = (UserId, ItemId);

macro_rules! dense_id {
    ($name:ident, $prefix:literal) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl From<usize> for $name {
            fn from(i: usize) -> Self {
                $name(i as u32)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

dense_id!(UserId, "u");
dense_id!(ItemId, "v");
dense_id!(AttrId, "p");
