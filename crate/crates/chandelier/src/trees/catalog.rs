//! Bulb catalogs: rooted trees with a fixed edge count and bounded symmetry.

use super::enumerate::enumerate_rooted_trees;
use super::shape::RootedTreeShape;
use crate::error::Result;

/// The collection `J(K, R)` of unlabeled rooted trees with `K` edges and at
/// most `R` automorphisms, in canonical enumeration order.
#[derive(Debug, Clone)]
pub struct BulbCatalog {
    k: usize,
    r_cap: Option<u128>,
    bulbs: Vec<RootedTreeShape>,
}

/// Filters the full enumeration by the automorphism cap. `r_cap = None`
/// means unbounded. An empty result (cap below the minimum symmetry) is
/// returned as-is; callers that need bulbs surface their own error.
pub fn build_catalog(k: usize, r_cap: Option<u128>) -> Result<BulbCatalog> {
    let bulbs = enumerate_rooted_trees(k)?
        .filter(|s| r_cap.is_none_or(|r| s.aut() <= r))
        .collect();
    Ok(BulbCatalog { k, r_cap, bulbs })
}

impl BulbCatalog {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r_cap(&self) -> Option<u128> {
        self.r_cap
    }

    pub fn r_cap_string(&self) -> String {
        match self.r_cap {
            None => "inf".into(),
            Some(r) => r.to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.bulbs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bulbs.is_empty()
    }

    pub fn bulb(&self, id: usize) -> &RootedTreeShape {
        &self.bulbs[id]
    }

    pub fn bulbs(&self) -> &[RootedTreeShape] {
        &self.bulbs
    }
}
