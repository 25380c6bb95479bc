//! From scores to matchings.
//!
//! Threshold matching keeps row `i` only when exactly one column clears the
//! threshold, then drops colliding rows to restore injectivity. Seeded
//! percolation matching grows a correct partial matching by admitting any
//! unmatched pair whose seed-witnessed common-neighbor count reaches
//! `gamma (n-2) q^2`, with counters maintained incrementally.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::Graph;
use crate::score::ScoreMatrix;

/// Injective partial map from vertices of `A` to vertices of `B`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialMatching {
    to_b: Vec<Option<usize>>,
    used_b: Vec<bool>,
    len: usize,
}

impl PartialMatching {
    pub fn new(n: usize) -> Self {
        PartialMatching {
            to_b: vec![None; n],
            used_b: vec![false; n],
            len: 0,
        }
    }

    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut m = PartialMatching::new(n);
        for &(i, j) in pairs {
            m.insert(i, j)?;
        }
        Ok(m)
    }

    /// Adds `i -> j`; rejects re-mapping and target collisions.
    pub fn insert(&mut self, i: usize, j: usize) -> Result<()> {
        if i >= self.to_b.len() || j >= self.used_b.len() {
            return Err(Error::InvalidInput(format!("pair ({i}, {j}) out of range")));
        }
        if self.to_b[i].is_some() {
            return Err(Error::InvalidInput(format!("vertex {i} already matched")));
        }
        if self.used_b[j] {
            return Err(Error::InvalidInput(format!(
                "target {j} already used (matching must stay injective)"
            )));
        }
        self.to_b[i] = Some(j);
        self.used_b[j] = true;
        self.len += 1;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.to_b.len()
    }

    /// Number of matched vertices `|I|`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> Option<usize> {
        self.to_b[i]
    }

    pub fn contains_target(&self, j: usize) -> bool {
        self.used_b[j]
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.to_b
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| (i, j)))
    }

    /// `i j` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, j) in self.pairs() {
            let _ = writeln!(s, "{i} {j}");
        }
        s
    }

    pub fn from_text(n: usize, text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let i: usize = it
                .next()
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| Error::InvalidInput(format!("bad matching line `{line}`")))?;
            let j: usize = it
                .next()
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| Error::InvalidInput(format!("bad matching line `{line}`")))?;
            pairs.push((i, j));
        }
        PartialMatching::from_pairs(n, &pairs)
    }
}

/// Threshold matching: `i -> j` iff `j` is the unique column of row `i` with
/// score at least `tau`; rows whose unique pick collides with another row's
/// are dropped entirely.
pub fn match_by_threshold(scores: &ScoreMatrix, tau: f64) -> PartialMatching {
    match_by_threshold_raw(scores.n, &scores.scores, tau)
}

pub fn match_by_threshold_raw(n: usize, scores: &[f64], tau: f64) -> PartialMatching {
    let mut candidate: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let row = &scores[i * n..(i + 1) * n];
        let mut unique = None;
        for (j, &s) in row.iter().enumerate() {
            if s >= tau {
                if unique.is_some() {
                    unique = None;
                    break;
                }
                unique = Some(j);
            }
        }
        candidate[i] = unique;
    }
    let mut claims = vec![0usize; n];
    for j in candidate.iter().flatten() {
        claims[*j] += 1;
    }
    let mut out = PartialMatching::new(n);
    for (i, j) in candidate.iter().enumerate() {
        if let Some(j) = j {
            if claims[*j] == 1 {
                out.insert(i, *j).expect("collision-free by construction");
            }
        }
    }
    out
}

/// Rate function `h(x) = x log x - x + 1` (convex, minimum 0 at `x = 1`).
pub fn rate_h(x: f64) -> f64 {
    x * x.ln() - x + 1.0
}

/// Unique solution in `(1, inf)` of `h(gamma) = target`, by bisection on the
/// increasing branch; residual at most 1e-12.
pub fn solve_gamma(target: f64) -> Result<f64> {
    if !target.is_finite() || target <= 0.0 {
        return Err(Error::ParamOutOfRange(format!(
            "solve_gamma needs target > 0, got {target}"
        )));
    }
    let e = std::f64::consts::E;
    let mut lo = 1.0f64;
    let mut hi = (target + e).max(e);
    while rate_h(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate_h(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The percolation threshold rate `3 log n / ((n-2) q^2)` and its `gamma`.
pub fn default_gamma(n: usize, q: f64) -> Result<f64> {
    if n < 3 || q <= 0.0 {
        return Err(Error::ParamOutOfRange(format!(
            "default_gamma needs n >= 3 and q > 0, got n = {n}, q = {q}"
        )));
    }
    solve_gamma(3.0 * (n as f64).ln() / ((n - 2) as f64 * q * q))
}

/// Counter storage: dense below 5000 vertices, hashed above.
enum Counters {
    Dense(Vec<u32>, usize),
    Sparse(std::collections::HashMap<u64, u32>),
}

impl Counters {
    fn new(n: usize) -> Self {
        if n <= 5000 {
            Counters::Dense(vec![0; n * n], n)
        } else {
            Counters::Sparse(std::collections::HashMap::new())
        }
    }

    fn increment(&mut self, i: usize, j: usize) -> u32 {
        match self {
            Counters::Dense(v, n) => {
                let c = &mut v[i * *n + j];
                *c += 1;
                *c
            }
            Counters::Sparse(map) => {
                let c = map.entry(((i as u64) << 32) | j as u64).or_insert(0);
                *c += 1;
                *c
            }
        }
    }

    #[cfg(test)]
    fn get(&self, i: usize, j: usize) -> u32 {
        match self {
            Counters::Dense(v, n) => v[i * n + j],
            Counters::Sparse(map) => *map.get(&(((i as u64) << 32) | j as u64)).unwrap_or(&0),
        }
    }
}

/// Percolation state: the growing map, common-neighbor counters for
/// unmatched pairs, and the FIFO frontier of qualifying pairs.
pub(crate) struct SeedState<'g> {
    a: &'g Graph,
    b: &'g Graph,
    matching: PartialMatching,
    counters: Counters,
    frontier: VecDeque<(u32, u32)>,
    threshold: f64,
}

impl<'g> SeedState<'g> {
    fn new(a: &'g Graph, b: &'g Graph, threshold: f64) -> Self {
        SeedState {
            a,
            b,
            matching: PartialMatching::new(a.n()),
            counters: Counters::new(a.n()),
            frontier: VecDeque::new(),
            threshold,
        }
    }

    /// Matches `i -> j` and credits one common neighbor to every still
    /// unmatched pair `(u, v)` with `u ~ i` in `A` and `v ~ j` in `B`.
    /// Pairs crossing the threshold join the frontier in lexicographic
    /// order.
    fn add_match(&mut self, i: usize, j: usize) {
        self.matching.insert(i, j).expect("callers check validity");
        for u in self.a.neighbors(i) {
            if self.matching.get(u).is_some() {
                continue;
            }
            for v in self.b.neighbors(j) {
                if self.matching.contains_target(v) {
                    continue;
                }
                let c = self.counters.increment(u, v);
                // Enqueue exactly at the crossing; counters only grow.
                if c as f64 >= self.threshold && ((c - 1) as f64) < self.threshold {
                    self.frontier.push_back((u as u32, v as u32));
                }
            }
        }
    }

    fn run(&mut self) {
        while let Some((i, j)) = self.frontier.pop_front() {
            let (i, j) = (i as usize, j as usize);
            if self.matching.get(i).is_some() || self.matching.contains_target(j) {
                continue;
            }
            self.add_match(i, j);
        }
    }

    /// Recomputes every unmatched pair's counter from scratch.
    #[cfg(test)]
    fn audit(&self) -> bool {
        let n = self.a.n();
        for i in 0..n {
            if self.matching.get(i).is_some() {
                continue;
            }
            for j in 0..n {
                if self.matching.contains_target(j) {
                    continue;
                }
                let mut want = 0u32;
                for (u, v) in self.matching.pairs() {
                    if self.a.has_edge(i, u) && self.b.has_edge(j, v) {
                        want += 1;
                    }
                }
                if self.counters.get(i, j) != want {
                    return false;
                }
            }
        }
        true
    }
}

/// Options for [`seeded_match`]: `q` defaults to the pooled empirical edge
/// density, `gamma` to the solution of `h(gamma) = 3 log n / ((n-2) q^2)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SeededOptions {
    pub q: Option<f64>,
    pub gamma: Option<f64>,
}

/// Percolation completion of a seed matching.
pub fn seeded_match(
    a: &Graph,
    b: &Graph,
    seeds: &PartialMatching,
    opts: SeededOptions,
) -> Result<PartialMatching> {
    seeded_state(a, b, seeds, opts).map(|s| s.matching)
}

fn seeded_state<'g>(
    a: &'g Graph,
    b: &'g Graph,
    seeds: &PartialMatching,
    opts: SeededOptions,
) -> Result<SeedState<'g>> {
    let n = a.n();
    if b.n() != n || seeds.n() != n {
        return Err(Error::InvalidInput(
            "graphs and seeds must share one vertex count".into(),
        ));
    }
    if n < 3 {
        return Err(Error::ParamOutOfRange(
            "seeded matching needs n >= 3".into(),
        ));
    }
    let q = opts.q.unwrap_or_else(|| 0.5 * (a.density() + b.density()));
    let gamma = match opts.gamma {
        Some(g) => g,
        None => default_gamma(n, q)?,
    };
    let threshold = gamma * (n - 2) as f64 * q * q;
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(Error::ParamOutOfRange(format!(
            "percolation threshold gamma (n-2) q^2 = {threshold} must be positive"
        )));
    }
    let mut state = SeedState::new(a, b, threshold);
    // Feed seeds through the same increment path, in ascending order.
    for (i, j) in seeds.pairs() {
        state.add_match(i, j);
    }
    state.run();
    Ok(state)
}

/// Quality of a matching against the ground truth permutation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchMetrics {
    pub matched: usize,
    pub correct: usize,
    /// Fraction of the matched domain that is correct (0 when empty).
    pub precision: f64,
    /// `|I| / n`.
    pub coverage: f64,
    /// Correct fraction over all of `[n]`; unmatched vertices count as wrong.
    pub accuracy: f64,
    pub exact: bool,
}

pub fn evaluate(matching: &PartialMatching, truth: &[usize]) -> MatchMetrics {
    let n = truth.len();
    let matched = matching.len();
    let correct = matching.pairs().filter(|&(i, j)| truth[i] == j).count();
    MatchMetrics {
        matched,
        correct,
        precision: if matched == 0 {
            0.0
        } else {
            correct as f64 / matched as f64
        },
        coverage: matched as f64 / n as f64,
        accuracy: correct as f64 / n as f64,
        exact: matched == n && correct == n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_pair, PiMode};
    use crate::rng::{rng_from_seed, rng_stream};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn score_matrix(n: usize, scores: Vec<f64>) -> ScoreMatrix {
        use crate::score::{FamilyFingerprint, ScoreMode};
        ScoreMatrix {
            n,
            scores,
            mode: ScoreMode::Exact,
            mu: 1.0,
            r: None,
            t: None,
            seed: None,
            tau: None,
            fingerprint: FamilyFingerprint {
                k: 0,
                l: 1,
                m: 1,
                r_cap: None,
                n_edges: 1,
                family_size: 1,
            },
        }
    }

    #[test]
    fn threshold_matching_examples() {
        // Diagonal dominant: identity on all rows.
        let n = 4;
        let mut s = vec![1.0; n * n];
        for i in 0..n {
            s[i * n + i] = 10.0;
        }
        let m = match_by_threshold(&score_matrix(n, s), 5.0);
        assert_eq!(m.len(), n);
        for i in 0..n {
            assert_eq!(m.get(i), Some(i));
        }

        // Two qualifying columns leave the row unmatched.
        let mut s = vec![0.0; 9];
        s[0] = 7.0;
        s[1] = 8.0;
        s[4] = 9.0;
        s[8] = 9.0;
        let m = match_by_threshold(&score_matrix(3, s), 5.0);
        assert_eq!(m.get(0), None);
        assert_eq!(m.get(1), Some(1));
        assert_eq!(m.get(2), Some(2));

        // Collisions are dropped on both sides.
        let mut s = vec![0.0; 9];
        s[2] = 9.0; // row 0 -> col 2
        s[5] = 9.0; // row 1 -> col 2
        s[7] = 9.0; // row 2 -> col 1
        let m = match_by_threshold(&score_matrix(3, s), 5.0);
        assert_eq!(m.get(0), None);
        assert_eq!(m.get(1), None);
        assert_eq!(m.get(2), Some(1));
    }

    #[test]
    fn threshold_matching_matches_bruteforce_rule() {
        let mut rng = rng_from_seed(5);
        for _ in 0..50 {
            let n = 6;
            let scores: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
            let tau = 0.6;
            let got = match_by_threshold_raw(n, &scores, tau);
            // Oracle: rule evaluated literally.
            let mut picks = Vec::new();
            for i in 0..n {
                let qualifying: Vec<usize> = (0..n).filter(|&j| scores[i * n + j] >= tau).collect();
                picks.push(if qualifying.len() == 1 {
                    Some(qualifying[0])
                } else {
                    None
                });
            }
            for i in 0..n {
                let want = picks[i].filter(|&j| {
                    picks
                        .iter()
                        .enumerate()
                        .all(|(i2, p)| i2 == i || *p != Some(j))
                });
                assert_eq!(got.get(i), want, "row {i}");
            }
        }
    }

    proptest! {
        /// The rule only depends on comparisons, so any strictly increasing
        /// transform of scores and threshold together leaves it unchanged.
        #[test]
        fn threshold_matching_is_monotone_invariant(
            scores in proptest::collection::vec(-100.0f64..100.0, 25),
            tau in -50.0f64..50.0
        ) {
            let base = match_by_threshold_raw(5, &scores, tau);
            let f = |x: f64| (x / 30.0).exp() + 0.01 * x;
            let mapped: Vec<f64> = scores.iter().map(|&x| f(x)).collect();
            let transformed = match_by_threshold_raw(5, &mapped, f(tau));
            prop_assert_eq!(base, transformed);
        }
    }

    #[test]
    fn rate_function_and_gamma_solver() {
        assert_eq!(rate_h(1.0), 0.0);
        // h(e) = 1, so solve_gamma(1) = e.
        let e = std::f64::consts::E;
        assert!((solve_gamma(1.0).unwrap() - e).abs() < 1e-10);
        assert!((solve_gamma(0.5).unwrap() - 2.1555).abs() < 1e-3);
        assert!(solve_gamma(0.0).is_err());
        assert!(solve_gamma(-1.0).is_err());
        // Residual and bracket on random targets.
        let mut rng = rng_from_seed(6);
        for _ in 0..200 {
            let target = 10f64.powf(rng.random::<f64>() * 6.0 - 4.0);
            let g = solve_gamma(target).unwrap();
            assert!(g > 1.0);
            assert!((rate_h(g) - target).abs() <= 1e-12, "target {target}");
        }
    }

    #[test]
    fn empty_seed_set_is_a_fixed_point() {
        let pair = sample_pair(30, 0.2, 1.0, PiMode::Identity, 9).unwrap();
        let seeds = PartialMatching::new(30);
        let out = seeded_match(&pair.a, &pair.b, &seeds, SeededOptions::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn seeded_match_follows_hand_trace() {
        // n=6. Threshold fixed at 2 via q = 0.5, gamma = 2:
        // gamma (n-2) q^2 = 2 * 4 * 0.25 = 2.
        // A = B: edges 0-2, 1-2, 2-3, 0-3, 1-3, 3-4, 2-4, 4-5, 2-5.
        // Seeds {0->0, 1->1}.
        //   After seeds: counters(2,2) = 2 (via 0 and 1), counters(3,3) = 2.
        //   Frontier gains (2,2) then (3,3); popping (2,2) matches it and
        //   bumps (3,3) to 3, (4,4) to 1, (5,5) to 1.
        //   Popping (3,3) matches it; (4,4) reaches 2 and matches; then
        //   (5,5) reaches 2 via 2 and 4 and matches. Full recovery.
        let mut g = Graph::new(6);
        for (u, v) in [
            (0, 2),
            (1, 2),
            (2, 3),
            (0, 3),
            (1, 3),
            (3, 4),
            (2, 4),
            (4, 5),
            (2, 5),
        ] {
            g.add_edge(u, v);
        }
        let seeds = PartialMatching::from_pairs(6, &[(0, 0), (1, 1)]).unwrap();
        let opts = SeededOptions {
            q: Some(0.5),
            gamma: Some(2.0),
        };
        let out = seeded_match(&g, &g, &seeds, opts).unwrap();
        assert_eq!(out.len(), 6);
        for i in 0..6 {
            assert_eq!(out.get(i), Some(i));
        }
    }

    #[test]
    fn seeds_are_never_removed_and_injectivity_holds() {
        let pair = sample_pair(120, 0.1, 1.0, PiMode::Uniform, 33).unwrap();
        // Seed 30% of the vertices with the truth.
        let mut seeds = PartialMatching::new(120);
        for i in 0..36 {
            seeds.insert(i, pair.pi[i]).unwrap();
        }
        let out = seeded_match(&pair.a, &pair.b, &seeds, SeededOptions::default()).unwrap();
        for (i, j) in seeds.pairs() {
            assert_eq!(out.get(i), Some(j));
        }
        let mut seen = [false; 120];
        for (_, j) in out.pairs() {
            assert!(!seen[j]);
            seen[j] = true;
        }
    }

    #[test]
    fn counters_match_full_recount() {
        // Invariant check at moderate scale: after the run, every unmatched
        // pair's counter equals a from-scratch recount.
        for seed in [1, 2, 3] {
            let pair = sample_pair(150, 0.08, 0.9, PiMode::Uniform, seed).unwrap();
            let mut seeds = PartialMatching::new(150);
            for i in 0..40 {
                seeds.insert(i, pair.pi[i]).unwrap();
            }
            let state = seeded_state(
                &pair.a,
                &pair.b,
                &seeds,
                SeededOptions {
                    q: Some(0.08),
                    gamma: None,
                },
            )
            .unwrap();
            assert!(state.audit(), "counter invariant violated (seed {seed})");
        }
    }

    #[test]
    fn percolation_needs_enough_seed_mass() {
        // At n=1000, q=0.1 the default threshold is gamma (n-2) q^2 ~ 36.4
        // common neighbors. A 10% correct seed set can witness only ~ n q / 10
        // = 10 of them, so percolation is a fixed point there; from 50% the
        // cascade completes. Both facts are simulation-verified.
        let (n, q) = (1000usize, 0.1);
        let mut exact_at_half = 0;
        for trial in 0..10u64 {
            let pair = sample_pair(n, q, 1.0, PiMode::Identity, 600 + trial).unwrap();
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng_stream(700 + trial, 0));

            let mut sparse_seeds = PartialMatching::new(n);
            for &i in order.iter().take(n / 10) {
                sparse_seeds.insert(i, i).unwrap();
            }
            let opts = SeededOptions {
                q: Some(q),
                gamma: None,
            };
            let stuck = seeded_match(&pair.a, &pair.b, &sparse_seeds, opts).unwrap();
            assert_eq!(
                stuck.len(),
                sparse_seeds.len(),
                "below threshold: no growth"
            );

            let mut half_seeds = PartialMatching::new(n);
            for &i in order.iter().take(n / 2) {
                half_seeds.insert(i, i).unwrap();
            }
            let out = seeded_match(&pair.a, &pair.b, &half_seeds, opts).unwrap();
            if evaluate(&out, &pair.pi).exact {
                exact_at_half += 1;
            }
        }
        assert!(
            exact_at_half >= 9,
            "exact recovery from 50% seeds in only {exact_at_half}/10 trials"
        );
    }

    #[test]
    fn sparse_counter_store_above_dense_cutoff() {
        // n > 5000 switches to hashed counters; the percolation must still
        // extend seeds and keep the audit invariant.
        let n = 5200;
        let pair = sample_pair(n, 0.002, 1.0, PiMode::Identity, 64).unwrap();
        let mut seeds = PartialMatching::new(n);
        for i in 0..(n * 85 / 100) {
            seeds.insert(i, i).unwrap();
        }
        let state = seeded_state(
            &pair.a,
            &pair.b,
            &seeds,
            SeededOptions {
                q: Some(0.002),
                gamma: None,
            },
        )
        .unwrap();
        assert!(matches!(state.counters, Counters::Sparse(_)));
        let out = &state.matching;
        assert!(out.len() >= seeds.len());
        let metrics = evaluate(out, &pair.pi);
        assert_eq!(metrics.correct, metrics.matched, "A = B seeds stay correct");
    }

    #[test]
    fn non_injective_seeds_are_rejected() {
        let mut seeds = PartialMatching::new(5);
        seeds.insert(0, 3).unwrap();
        assert!(seeds.insert(1, 3).is_err());
        assert!(seeds.insert(0, 2).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let n = 5;
        let truth: Vec<usize> = (0..n).collect();
        let mut id = PartialMatching::new(n);
        for i in 0..n {
            id.insert(i, i).unwrap();
        }
        let m = evaluate(&id, &truth);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.coverage, 1.0);
        assert_eq!(m.accuracy, 1.0);
        assert!(m.exact);

        let empty = evaluate(&PartialMatching::new(n), &truth);
        assert_eq!(empty.coverage, 0.0);
        assert!(!empty.exact);

        // Hand-counted partial matching: 2 matched, 1 correct.
        let m = PartialMatching::from_pairs(n, &[(0, 0), (1, 2)]).unwrap();
        let got = evaluate(&m, &truth);
        assert_eq!(got.matched, 2);
        assert_eq!(got.correct, 1);
        assert_eq!(got.precision, 0.5);
        assert_eq!(got.accuracy, 0.2);
    }

    #[test]
    fn matching_text_round_trip() {
        let m = PartialMatching::from_pairs(6, &[(0, 5), (2, 1), (4, 0)]).unwrap();
        let back = PartialMatching::from_text(6, &m.to_text()).unwrap();
        assert_eq!(back, m);
    }
}
