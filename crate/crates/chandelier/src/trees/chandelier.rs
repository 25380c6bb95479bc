//! Chandelier trees and families.
//!
//! An `(L, M, K, R)`-chandelier hangs `L` branches off the root; each branch
//! is a wire of `M` edges ending in a `K`-edge bulb (the bulb root is the
//! wire's last vertex). The bulbs are pairwise non-isomorphic members of the
//! catalog `J(K, R)`, so the automorphism count of the whole tree is the
//! product of the bulb counts.

use super::catalog::BulbCatalog;
use super::shape::RootedTreeShape;
use crate::error::{Error, Result};

/// Default cap on the color-coding bitmask width `N+1`.
pub const SUBSET_WIDTH_CAP: usize = 24;

/// One chandelier: a strictly increasing choice of `L` bulb ids.
#[derive(Debug, Clone)]
pub struct Chandelier {
    bulb_ids: Vec<usize>,
    aut: u128,
}

impl Chandelier {
    pub fn bulb_ids(&self) -> &[usize] {
        &self.bulb_ids
    }

    /// Product of bulb automorphism counts; equals the automorphism count of
    /// the realized tree because the bulbs are pairwise non-isomorphic.
    pub fn aut(&self) -> u128 {
        self.aut
    }

    /// The full rooted tree, canonicalized.
    pub fn realized(&self, family: &ChandelierFamily) -> Result<RootedTreeShape> {
        let mut levels: Vec<u8> = vec![0];
        for &id in &self.bulb_ids {
            // M-1 interior wire vertices; the wire's last vertex is the
            // bulb root itself.
            for d in 1..family.m {
                levels.push(d as u8);
            }
            for &l in family.catalog.bulb(id).levels() {
                levels.push(l + family.m as u8);
            }
        }
        // The concatenation above is a valid preorder walk only per branch;
        // rebuild through from_levels to canonicalize the whole tree.
        RootedTreeShape::from_levels(&levels)
    }
}

/// The family `T` of all chandeliers over a catalog: lexicographic
/// iteration over `L`-subsets, materialized lazily.
#[derive(Debug, Clone)]
pub struct ChandelierFamily {
    catalog: BulbCatalog,
    l: usize,
    m: usize,
    size: u128,
}

/// Builds the family of all `C(|J(K,R)|, L)` chandeliers.
pub fn build_family(k: usize, l: usize, m: usize, r_cap: Option<u128>) -> Result<ChandelierFamily> {
    let catalog = super::catalog::build_catalog(k, r_cap)?;
    family_over(catalog, l, m)
}

/// Same as [`build_family`] but over an existing catalog.
pub fn family_over(catalog: BulbCatalog, l: usize, m: usize) -> Result<ChandelierFamily> {
    if l < 1 {
        return Err(Error::ParamOutOfRange("L must be >= 1".into()));
    }
    if m < 1 {
        return Err(Error::ParamOutOfRange("M must be >= 1".into()));
    }
    if catalog.len() < l {
        return Err(Error::InsufficientBulbs {
            need: l,
            have: catalog.len(),
            k: catalog.k(),
            r: catalog.r_cap_string(),
        });
    }
    let n_edges = (catalog.k() + m) * l;
    if n_edges + 2 > SUBSET_WIDTH_CAP + 1 {
        return Err(Error::CapExceeded(format!(
            "family has N = {n_edges} edges; the counting DP needs N+1 <= {SUBSET_WIDTH_CAP} colors"
        )));
    }
    let size = binomial_u128(catalog.len(), l).ok_or_else(|| {
        Error::CapExceeded(format!(
            "family size C({}, {l}) exceeds u128",
            catalog.len()
        ))
    })?;
    Ok(ChandelierFamily {
        catalog,
        l,
        m,
        size,
    })
}

impl ChandelierFamily {
    pub fn catalog(&self) -> &BulbCatalog {
        &self.catalog
    }

    pub fn k(&self) -> usize {
        self.catalog.k()
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r_cap(&self) -> Option<u128> {
        self.catalog.r_cap()
    }

    /// Edge count `N = (K+M) L` of every member.
    pub fn n_edges(&self) -> usize {
        (self.catalog.k() + self.m) * self.l
    }

    /// `|T| = C(|J(K,R)|, L)`.
    pub fn size(&self) -> u128 {
        self.size
    }

    /// Unique rooting is guaranteed by construction only for `L >= 2`.
    pub fn uniquely_rooted_guaranteed(&self) -> bool {
        self.l >= 2
    }

    fn assemble(&self, bulb_ids: Vec<usize>) -> Chandelier {
        let mut aut: u128 = 1;
        for &id in &bulb_ids {
            aut = aut
                .checked_mul(self.catalog.bulb(id).aut())
                .expect("bulb aut product fits u128 when each bulb does");
        }
        Chandelier { bulb_ids, aut }
    }

    /// Lazy lexicographic iteration over all members.
    pub fn iter(&self) -> impl Iterator<Item = Chandelier> + '_ {
        CombinationIter::new(self.catalog.len(), self.l).map(|ids| self.assemble(ids))
    }

    /// Member at `rank` in lexicographic order (combinatorial unranking),
    /// for independent parallel cursors.
    pub fn unrank(&self, rank: u128) -> Result<Chandelier> {
        if rank >= self.size {
            return Err(Error::ParamOutOfRange(format!(
                "rank {rank} out of range for family of size {}",
                self.size
            )));
        }
        let mut ids = Vec::with_capacity(self.l);
        let mut remaining = rank;
        let mut next = 0usize;
        for slot in 0..self.l {
            let picks_left = self.l - slot - 1;
            loop {
                let with_next = binomial_u128(self.catalog.len() - next - 1, picks_left)
                    .expect("sub-binomial fits u128");
                if remaining < with_next {
                    ids.push(next);
                    next += 1;
                    break;
                }
                remaining -= with_next;
                next += 1;
            }
        }
        Ok(self.assemble(ids))
    }
}

struct CombinationIter {
    n: usize,
    k: usize,
    state: Option<Vec<usize>>,
}

impl CombinationIter {
    fn new(n: usize, k: usize) -> Self {
        let state = if k <= n { Some((0..k).collect()) } else { None };
        CombinationIter { n, k, state }
    }
}

impl Iterator for CombinationIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.state.clone()?;
        // Advance rightmost index that can still move.
        let state = self.state.as_mut().unwrap();
        let mut i = self.k;
        loop {
            if i == 0 {
                self.state = None;
                break;
            }
            i -= 1;
            if state[i] < self.n - (self.k - i) {
                state[i] += 1;
                for j in (i + 1)..self.k {
                    state[j] = state[j - 1] + 1;
                }
                break;
            }
        }
        Some(current)
    }
}

pub(crate) fn binomial_u128(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::shape::{automorphisms_bruteforce, is_uniquely_rooted};

    #[test]
    fn family_sizes() {
        // K=2, R=inf, L=2, M=1: both bulbs in one chandelier, N=6.
        let fam = build_family(2, 2, 1, None).unwrap();
        assert_eq!(fam.size(), 1);
        assert_eq!(fam.n_edges(), 6);
        // K=3, R=inf, L=2, M=1: C(4,2) = 6.
        let fam = build_family(3, 2, 1, None).unwrap();
        assert_eq!(fam.size(), 6);
        assert_eq!(fam.iter().count(), 6);
        // L=1 is allowed but not uniquely-rooted-guaranteed.
        let fam = build_family(2, 1, 1, None).unwrap();
        assert!(!fam.uniquely_rooted_guaranteed());
    }

    #[test]
    fn family_errors() {
        assert!(matches!(
            build_family(2, 3, 1, None),
            Err(Error::InsufficientBulbs { .. })
        ));
        // Width cap: N + 1 must stay within the bitmask.
        assert!(matches!(
            build_family(10, 2, 5, None),
            Err(Error::CapExceeded(_))
        ));
    }

    #[test]
    fn realized_shape_and_aut_product() {
        let fam = build_family(2, 2, 1, None).unwrap();
        let ch = fam.iter().next().unwrap();
        let realized = ch.realized(&fam).unwrap();
        assert_eq!(realized.edges(), 6);
        // Bulbs: path (aut 1) and star (aut 2).
        assert_eq!(ch.aut(), 2);
        assert_eq!(realized.aut(), ch.aut());
        assert_eq!(automorphisms_bruteforce(&realized).unwrap(), ch.aut());
        assert!(is_uniquely_rooted(&realized).unwrap());
    }

    #[test]
    fn unrank_agrees_with_iteration() {
        let fam = build_family(4, 2, 1, None).unwrap();
        for (rank, ch) in fam.iter().enumerate() {
            let ur = fam.unrank(rank as u128).unwrap();
            assert_eq!(ur.bulb_ids(), ch.bulb_ids());
        }
        assert!(fam.unrank(fam.size()).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial_u128(9, 2), Some(36));
        assert_eq!(binomial_u128(2, 2), Some(1));
        assert_eq!(binomial_u128(3, 5), Some(0));
        assert_eq!(binomial_u128(20, 10), Some(184756));
    }
}
