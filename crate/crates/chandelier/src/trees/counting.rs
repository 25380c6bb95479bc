//! Rooted-tree counting by the Euler-transform recurrence, in arbitrary
//! precision. Serves as the counting oracle for the enumerator and as the
//! ratio estimator for the inverse of Otter's growth constant.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Cap on the recurrence depth; counts for larger sizes are astronomically
/// large and nothing here needs them.
pub const COUNTING_EDGE_CAP: usize = 2000;

/// Reference value of `1/alpha` (alpha is the tree growth constant
/// ~0.33832), used by tests and reports.
pub const INV_OTTER_ALPHA: f64 = 2.955_765_285_65;

/// Number of unlabeled rooted trees with `0..=k_edges` edges.
///
/// With `r[v]` the count on `v` vertices, the recurrence is
/// `n * r[n+1] = sum_{k=1}^{n} s(k) * r[n-k+1]` where `s(k) = sum_{d|k} d*r[d]`.
pub fn rooted_tree_counts_up_to(k_edges: usize) -> Result<Vec<BigUint>> {
    if k_edges > COUNTING_EDGE_CAP {
        return Err(Error::CapExceeded(format!(
            "count_rooted_trees supports at most {COUNTING_EDGE_CAP} edges, got {k_edges}"
        )));
    }
    let max_vertices = k_edges + 1;
    let mut r = vec![BigUint::zero(); max_vertices + 1];
    let mut s = vec![BigUint::zero(); max_vertices + 1];
    r[1] = BigUint::from(1u32);
    // Fold d*r[d] into s[k] for every multiple k of d.
    let fold = |s: &mut Vec<BigUint>, r: &Vec<BigUint>, d: usize| {
        let term = &r[d] * BigUint::from(d);
        let mut k = d;
        while k <= max_vertices {
            s[k] += &term;
            k += d;
        }
    };
    fold(&mut s, &r, 1);
    for n in 1..max_vertices {
        let mut acc = BigUint::zero();
        for k in 1..=n {
            acc += &s[k] * &r[n - k + 1];
        }
        r[n + 1] = acc / BigUint::from(n);
        fold(&mut s, &r, n + 1);
    }
    // Re-index by edges.
    Ok((0..=k_edges).map(|e| r[e + 1].clone()).collect())
}

/// Number of unlabeled rooted trees with exactly `k_edges` edges.
pub fn count_rooted_trees(k_edges: usize) -> Result<BigUint> {
    Ok(rooted_tree_counts_up_to(k_edges)?.pop().unwrap())
}

/// Ratio `count(k_max) / count(k_max - 1)`, an estimator of `1/alpha` with
/// O(1/k) convergence.
pub fn estimate_otter(k_max: usize) -> Result<f64> {
    if k_max < 50 {
        return Err(Error::ParamOutOfRange(format!(
            "estimate_otter needs k_max >= 50 for a meaningful ratio, got {k_max}"
        )));
    }
    let counts = rooted_tree_counts_up_to(k_max)?;
    Ok(big_ratio(&counts[k_max], &counts[k_max - 1]))
}

/// `a / b` as f64, valid even when both exceed the f64 range.
pub(crate) fn big_ratio(a: &BigUint, b: &BigUint) -> f64 {
    let scaled = (a << 40u32) / b;
    scaled.to_f64().expect("scaled ratio fits f64") / (1u64 << 40) as f64
}
