//! Independent test oracles: Monte Carlo harness with standard errors,
//! exhaustive-coloring expectations, and a naive colorful count.
//!
//! These are deliberately slow and deliberately written against different
//! code paths than the production routines they cross-check.

use crate::count::{colorful_count, Coloring, WeightedHost};
use crate::error::{Error, Result};
use crate::model::GraphPair;
use crate::score::phi_exact;
use crate::trees::ChandelierFamily;
use crate::trees::RootedTreeShape;

/// Streaming mean and standard error over `trials` independent samples
/// (Welford's update). Every "within k standard errors" acceptance check
/// runs through here.
pub fn mc_mean_with_se(trials: usize, mut sample: impl FnMut(usize) -> f64) -> (f64, f64) {
    assert!(trials >= 2, "need at least two trials for a standard error");
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for t in 0..trials {
        let x = sample(t);
        let delta = x - mean;
        mean += delta / (t + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = m2 / (trials - 1) as f64;
    (mean, (var / trials as f64).sqrt())
}

/// Exact expectation of the colorful count over every possible coloring,
/// enumerated exhaustively. Equals `r * W` where `W` is the exact signed
/// count. Feasible only while `(N+1)^n` stays small.
pub fn exhaustive_coloring_expectation(
    host: &WeightedHost,
    shape: &RootedTreeShape,
    root: usize,
) -> Result<f64> {
    let n = host.n();
    let colors = shape.vertices();
    let total = (colors as f64).powi(n as i32);
    if total > 1e7 {
        return Err(Error::CapExceeded(format!(
            "exhaustive enumeration of {total:.3e} colorings refused (cap 1e7)"
        )));
    }
    let total = total as u64;
    let mut acc = 0.0;
    let mut assignment = vec![0u8; n];
    for code in 0..total {
        let mut c = code;
        for slot in assignment.iter_mut() {
            *slot = (c % colors as u64) as u8;
            c /= colors as u64;
        }
        let coloring = Coloring::new(assignment.clone(), colors)?;
        acc += colorful_count(host, root, shape, &coloring)?;
    }
    Ok(acc / total as f64)
}

/// Colorful count by filtered backtracking over injective embeddings;
/// shares nothing with the subset-convolution DP.
pub fn colorful_count_naive(
    host: &WeightedHost,
    root: usize,
    shape: &RootedTreeShape,
    coloring: &Coloring,
) -> Result<f64> {
    if shape.vertices() != coloring.num_colors {
        return Err(Error::InvalidInput("palette must have N+1 colors".into()));
    }
    let v = shape.vertices();
    let n = host.n();
    if v == 1 {
        return Ok(1.0);
    }
    let parents = shape.parents();
    let mut total = 0.0;
    let mut assign = vec![0usize; v];
    assign[0] = root;
    #[allow(clippy::too_many_arguments)]
    fn rec(
        t: usize,
        used: u64,
        colors_used: u32,
        prod: f64,
        assign: &mut [usize],
        parents: &[usize],
        host: &WeightedHost,
        coloring: &Coloring,
        total: &mut f64,
    ) {
        if t == assign.len() {
            *total += prod;
            return;
        }
        let p = assign[parents[t]];
        for cand in 0..host.n() {
            let color_bit = 1u32 << coloring.colors[cand];
            if used >> cand & 1 == 1 || colors_used & color_bit != 0 {
                continue;
            }
            let w = host.weight(p, cand);
            if w == 0.0 {
                continue;
            }
            assign[t] = cand;
            rec(
                t + 1,
                used | 1 << cand,
                colors_used | color_bit,
                prod * w,
                assign,
                parents,
                host,
                coloring,
                total,
            );
        }
    }
    let _ = n;
    rec(
        1,
        1u64 << root,
        1u32 << coloring.colors[root],
        1.0,
        &mut assign,
        &parents,
        host,
        coloring,
        &mut total,
    );
    Ok(total / shape.aut() as f64)
}

/// Score matrix with the color-coding estimator averaged over *all*
/// colorings of both sides, which collapses to the exact matrix. Tiny
/// instances only; used to pin the estimator's conditional mean.
pub fn phi_exhaustive_colorings(pair: &GraphPair, family: &ChandelierFamily) -> Result<Vec<f64>> {
    let n = pair.n;
    let colors = family.n_edges() + 1;
    let total = (colors as f64).powi(n as i32);
    if total > 1e5 {
        return Err(Error::CapExceeded(format!(
            "exhaustive phi over {total:.3e} colorings per side refused (cap 1e5)"
        )));
    }
    let total = total as u64;
    let host_a = WeightedHost::centered(&pair.a, pair.q);
    let host_b = WeightedHost::centered(&pair.b, pair.q);
    let r = crate::count::colorful_probability(colors);

    let mut scores = vec![0.0; n * n];
    for ch in family.iter() {
        let shape = ch.realized(family)?;
        let mut mean_a = vec![0.0; n];
        let mut mean_b = vec![0.0; n];
        let mut assignment = vec![0u8; n];
        for code in 0..total {
            let mut c = code;
            for slot in assignment.iter_mut() {
                *slot = (c % colors as u64) as u8;
                c /= colors as u64;
            }
            let coloring = Coloring::new(assignment.clone(), colors)?;
            for i in 0..n {
                mean_a[i] += colorful_count_naive(&host_a, i, &shape, &coloring)?;
                mean_b[i] += colorful_count_naive(&host_b, i, &shape, &coloring)?;
            }
        }
        for x in mean_a.iter_mut().chain(mean_b.iter_mut()) {
            *x /= total as f64;
        }
        let aut = ch.aut() as f64;
        for i in 0..n {
            for j in 0..n {
                scores[i * n + j] += aut * mean_a[i] * mean_b[j] / (r * r);
            }
        }
    }
    Ok(scores)
}

/// Convenience wrapper: exact matrix entries as a flat vector for direct
/// comparison with [`phi_exhaustive_colorings`].
pub fn phi_exact_flat(pair: &GraphPair, family: &ChandelierFamily) -> Result<Vec<f64>> {
    Ok(phi_exact(pair, family)?.scores)
}
