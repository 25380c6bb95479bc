//! Streaming enumeration of unlabeled rooted trees by level-sequence
//! successor, in canonical (lexicographically decreasing) order.
//!
//! Starting from the path `0,1,...,K`, the successor of a sequence is formed
//! by locating the last vertex `p` deeper than 1, and tiling the suffix from
//! `p` with copies of the segment that starts at `p`'s parent. Each step is
//! amortized constant time and yields each shape exactly once.

use super::shape::RootedTreeShape;
use crate::error::{Error, Result};

/// Enumeration cap; the number of shapes roughly triples per extra edge.
pub const ENUMERATION_EDGE_CAP: usize = 20;

pub struct RootedTreeIter {
    levels: Vec<u8>,
    exhausted: bool,
}

/// Yields every unlabeled rooted tree with `k` edges exactly once, each with
/// its automorphism count filled in.
pub fn enumerate_rooted_trees(k: usize) -> Result<RootedTreeIter> {
    if k > ENUMERATION_EDGE_CAP {
        return Err(Error::CapExceeded(format!(
            "enumerate_rooted_trees supports at most {ENUMERATION_EDGE_CAP} edges, got {k}"
        )));
    }
    Ok(RootedTreeIter {
        levels: (0..=k as u8).collect(),
        exhausted: false,
    })
}

impl Iterator for RootedTreeIter {
    type Item = RootedTreeShape;

    fn next(&mut self) -> Option<Self::Item> {
        if self.exhausted {
            return None;
        }
        let current = RootedTreeShape::from_levels(&self.levels)
            .expect("successor sequences are always valid");
        debug_assert_eq!(
            current.levels(),
            &self.levels[..],
            "successor not canonical"
        );

        // Advance to the successor.
        match self.levels.iter().rposition(|&l| l > 1) {
            None => self.exhausted = true,
            Some(p) => {
                let q = (0..p)
                    .rfind(|&j| self.levels[j] == self.levels[p] - 1)
                    .unwrap();
                let width = p - q;
                for i in p..self.levels.len() {
                    self.levels[i] = self.levels[i - width];
                }
            }
        }
        Some(current)
    }
}
