//! Canonical unlabeled rooted trees.
//!
//! A shape is stored as its canonical level sequence: the depth of each
//! vertex in a preorder walk, root depth 0, with children ordered so the
//! sequence is lexicographically maximal. Two rooted trees are isomorphic
//! iff their canonical sequences are equal, so shape comparison is a byte
//! comparison.

use crate::error::{Error, Result};

/// Hard cap for the exhaustive automorphism search.
pub const BRUTEFORCE_EDGE_CAP: usize = 9;
/// Hard cap for the re-rooting scan in [`is_uniquely_rooted`].
pub const REROOT_EDGE_CAP: usize = 30;

/// An unlabeled rooted tree in canonical form with its automorphism count.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RootedTreeShape {
    levels: Vec<u8>,
    aut: u128,
}

impl RootedTreeShape {
    /// Builds a shape from any valid level sequence (root first at depth 0,
    /// each later entry between 1 and previous+1). The sequence is
    /// canonicalized, so vertex order in the input does not matter.
    pub fn from_levels(levels: &[u8]) -> Result<Self> {
        if levels.is_empty() || levels[0] != 0 {
            return Err(Error::InvalidInput(
                "level sequence must start with the root at depth 0".into(),
            ));
        }
        for i in 1..levels.len() {
            if levels[i] == 0 || levels[i] > levels[i - 1] + 1 {
                return Err(Error::InvalidInput(format!(
                    "invalid level sequence at position {i}: {} after {}",
                    levels[i],
                    levels[i - 1]
                )));
            }
        }
        let parents = parents_from_levels(levels);
        let children = children_from_parents(&parents);
        Self::from_children(&children, 0)
    }

    /// Builds the canonical shape of the tree given by `children` lists,
    /// rooted at `root`.
    pub fn from_children(children: &[Vec<usize>], root: usize) -> Result<Self> {
        let canon = canonical_levels(children, root, 0)?;
        let aut = aut_from_canonical(&canon)?;
        Ok(RootedTreeShape { levels: canon, aut })
    }

    /// Canonical level sequence (root depth 0).
    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    pub fn edges(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn vertices(&self) -> usize {
        self.levels.len()
    }

    /// Automorphism count from the recursive product formula.
    pub fn aut(&self) -> u128 {
        self.aut
    }

    /// Parent index of each vertex in canonical order; `parent[0] == 0`.
    pub fn parents(&self) -> Vec<usize> {
        parents_from_levels(&self.levels)
    }

    /// Children lists in canonical order.
    pub fn children(&self) -> Vec<Vec<usize>> {
        children_from_parents(&self.parents())
    }

    pub fn levels_string(&self) -> String {
        self.levels
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub(crate) fn parents_from_levels(levels: &[u8]) -> Vec<usize> {
    let mut parents = vec![0usize; levels.len()];
    for i in 1..levels.len() {
        // Parent is the nearest preceding vertex one level up.
        let mut j = i - 1;
        while levels[j] != levels[i] - 1 {
            j -= 1;
        }
        parents[i] = j;
    }
    parents
}

pub(crate) fn children_from_parents(parents: &[usize]) -> Vec<Vec<usize>> {
    let mut children = vec![Vec::new(); parents.len()];
    for (v, &p) in parents.iter().enumerate().skip(1) {
        children[p].push(v);
    }
    children
}

/// Canonical level sequence of the subtree rooted at `v`, with the root at
/// depth `depth`: children subsequences are sorted in descending
/// lexicographic order, which maximizes the whole sequence.
fn canonical_levels(children: &[Vec<usize>], v: usize, depth: u8) -> Result<Vec<u8>> {
    if depth == u8::MAX {
        return Err(Error::CapExceeded("tree deeper than 255".into()));
    }
    let mut subs: Vec<Vec<u8>> = children[v]
        .iter()
        .map(|&c| canonical_levels(children, c, depth + 1))
        .collect::<Result<_>>()?;
    subs.sort_unstable_by(|a, b| b.cmp(a));
    let mut out = Vec::with_capacity(1 + subs.iter().map(Vec::len).sum::<usize>());
    out.push(depth);
    for s in subs {
        out.extend_from_slice(&s);
    }
    Ok(out)
}

/// Automorphism count of a canonical sequence: product over vertices of the
/// automorphisms of the child subtrees times the factorial of each class of
/// identical children. Canonical order puts identical children adjacent.
fn aut_from_canonical(levels: &[u8]) -> Result<u128> {
    fn go(levels: &[u8], span: std::ops::Range<usize>) -> Result<u128> {
        let root_level = levels[span.start];
        // Child subtree spans: maximal runs starting at root_level + 1.
        let mut spans: Vec<std::ops::Range<usize>> = Vec::new();
        let mut i = span.start + 1;
        while i < span.end {
            let j = (i + 1..span.end)
                .find(|&k| levels[k] == root_level + 1)
                .unwrap_or(span.end);
            spans.push(i..j);
            i = j;
        }
        let mut aut: u128 = 1;
        let mut idx = 0;
        while idx < spans.len() {
            // Count the run of identical child sequences.
            let mut run = 1usize;
            while idx + run < spans.len()
                && levels[spans[idx].clone()] == levels[spans[idx + run].clone()]
            {
                run += 1;
            }
            let child_aut = go(levels, spans[idx].clone())?;
            for f in 1..=run as u128 {
                aut = aut.checked_mul(f).ok_or(Error::AutOverflow {
                    edges: levels.len() - 1,
                })?;
            }
            for _ in 0..run {
                aut = aut.checked_mul(child_aut).ok_or(Error::AutOverflow {
                    edges: levels.len() - 1,
                })?;
            }
            idx += run;
        }
        Ok(aut)
    }
    go(levels, 0..levels.len())
}

/// Counts root-preserving adjacency-preserving vertex bijections by
/// exhaustive permutation search. Independent of the product formula.
pub fn automorphisms_bruteforce(shape: &RootedTreeShape) -> Result<u128> {
    if shape.edges() > BRUTEFORCE_EDGE_CAP {
        return Err(Error::CapExceeded(format!(
            "automorphisms_bruteforce supports at most {BRUTEFORCE_EDGE_CAP} edges, got {}",
            shape.edges()
        )));
    }
    let n = shape.vertices();
    let parents = shape.parents();
    let mut adj = vec![0u16; n];
    for (v, &p) in parents.iter().enumerate().skip(1) {
        adj[v] |= 1 << p;
        adj[p] |= 1 << v;
    }

    // Permute the non-root vertices with Heap's algorithm; the root is fixed.
    let mut perm: Vec<usize> = (0..n).collect();
    let mut count = 0u128;
    let m = n - 1;
    let mut c = vec![0usize; m];
    let mut check = |perm: &[usize]| {
        for v in 0..n {
            let mut image = 0u16;
            let mut bits = adj[v];
            while bits != 0 {
                let u = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                image |= 1 << perm[u];
            }
            if image != adj[perm[v]] {
                return;
            }
        }
        count += 1;
    };
    check(&perm);
    let mut i = 0;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(1, i + 1);
            } else {
                perm.swap(c[i] + 1, i + 1);
            }
            check(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(count)
}

/// True iff re-rooting the underlying free tree at any other vertex yields a
/// non-isomorphic rooted tree (canonical-form comparison across all roots).
pub fn is_uniquely_rooted(shape: &RootedTreeShape) -> Result<bool> {
    if shape.edges() > REROOT_EDGE_CAP {
        return Err(Error::CapExceeded(format!(
            "is_uniquely_rooted supports at most {REROOT_EDGE_CAP} edges, got {}",
            shape.edges()
        )));
    }
    let n = shape.vertices();
    let parents = shape.parents();
    let mut adjacency = vec![Vec::new(); n];
    for (v, &p) in parents.iter().enumerate().skip(1) {
        adjacency[v].push(p);
        adjacency[p].push(v);
    }
    for root in 1..n {
        let rerooted = reroot_children(&adjacency, root);
        let shape_v = RootedTreeShape::from_children(&rerooted, root)?;
        if shape_v.levels() == shape.levels() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Orients an undirected tree away from `root`, returning children lists.
fn reroot_children(adjacency: &[Vec<usize>], root: usize) -> Vec<Vec<usize>> {
    let n = adjacency.len();
    let mut children = vec![Vec::new(); n];
    let mut seen = vec![false; n];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(v) = stack.pop() {
        for &u in &adjacency[v] {
            if !seen[u] {
                seen[u] = true;
                children[v].push(u);
                stack.push(u);
            }
        }
    }
    children
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_examples() {
        // Path of 2 edges rooted at an end.
        let path = RootedTreeShape::from_levels(&[0, 1, 2]).unwrap();
        assert_eq!(path.levels(), &[0, 1, 2]);
        assert_eq!(path.aut(), 1);
        // Star of 2 leaves.
        let star = RootedTreeShape::from_levels(&[0, 1, 1]).unwrap();
        assert_eq!(star.aut(), 2);
        // Non-canonical input is canonicalized: short branch listed first.
        let t = RootedTreeShape::from_levels(&[0, 1, 1, 2]).unwrap();
        assert_eq!(t.levels(), &[0, 1, 2, 1]);
    }

    #[test]
    fn aut_examples() {
        // Star with 3 leaves rooted at the center: 3! = 6.
        let star3 = RootedTreeShape::from_levels(&[0, 1, 1, 1]).unwrap();
        assert_eq!(star3.aut(), 6);
        // Path of 3 edges rooted at an endpoint is rigid.
        let path3 = RootedTreeShape::from_levels(&[0, 1, 2, 3]).unwrap();
        assert_eq!(path3.aut(), 1);
        // Complete binary tree of depth 2: 2 swaps per internal node -> 8.
        let cbt = RootedTreeShape::from_levels(&[0, 1, 2, 2, 1, 2, 2]).unwrap();
        assert_eq!(cbt.aut(), 8);
    }

    #[test]
    fn bruteforce_matches_formula_on_small_shapes() {
        for levels in [
            vec![0u8, 1, 2, 3],
            vec![0, 1, 1, 1],
            vec![0, 1, 2, 2, 1, 2, 2],
            vec![0, 1, 2, 2, 2, 1, 1],
            vec![0, 1, 1],
            vec![0],
        ] {
            let shape = RootedTreeShape::from_levels(&levels).unwrap();
            assert_eq!(
                automorphisms_bruteforce(&shape).unwrap(),
                shape.aut(),
                "levels {levels:?}"
            );
        }
    }

    #[test]
    fn unique_rooting_examples() {
        // 2-edge path rooted at an end: the far end is symmetric.
        let end = RootedTreeShape::from_levels(&[0, 1, 2]).unwrap();
        assert!(!is_uniquely_rooted(&end).unwrap());
        // Same tree rooted at the middle.
        let mid = RootedTreeShape::from_levels(&[0, 1, 1]).unwrap();
        assert!(is_uniquely_rooted(&mid).unwrap());
    }

    #[test]
    fn caps_are_enforced() {
        let big = RootedTreeShape::from_levels(
            &(0..=(BRUTEFORCE_EDGE_CAP as u8 + 1)).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!(matches!(
            automorphisms_bruteforce(&big),
            Err(Error::CapExceeded(_))
        ));
    }
}
