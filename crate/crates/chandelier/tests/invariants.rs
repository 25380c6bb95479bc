//! Statistical and cross-route invariants that are heavier than unit tests:
//! sampler moment checks, exhaustive-coloring identities, and the oracle
//! equivalence of the two counting routes.

use rand::Rng;

use chandelier::count::{colorful_probability, exact_signed_count, WeightedHost};
use chandelier::model::{cross_moment, sample_pair, GraphPair, PiMode};
use chandelier::oracle::{
    exhaustive_coloring_expectation, mc_mean_with_se, phi_exact_flat, phi_exhaustive_colorings,
};
use chandelier::rng::rng_stream;
use chandelier::score::{phi_approx, ApproxOptions};
use chandelier::trees::{build_family, enumerate_rooted_trees};

/// Centered edge products of one sampled pair, as i.i.d. samples across
/// vertex pairs.
fn edge_pair_samples(pair: &GraphPair, l: i32, m: i32) -> Vec<f64> {
    let mut out = Vec::with_capacity(pair.n * (pair.n - 1) / 2);
    for i in 0..pair.n {
        for j in (i + 1)..pair.n {
            let a = if pair.a.has_edge(i, j) { 1.0 } else { 0.0 } - pair.q;
            let b = if pair.b.has_edge(pair.pi[i], pair.pi[j]) {
                1.0
            } else {
                0.0
            } - pair.q;
            out.push(a.powi(l) * b.powi(m));
        }
    }
    out
}

#[test]
fn sampler_marginals_match_q() {
    // >= 1e5 edge pairs: empirical density of each side within 4 SE of q.
    let (n, q, rho) = (460usize, 0.3, 0.6);
    let pair = sample_pair(n, q, rho, PiMode::Uniform, 2024).unwrap();
    let pairs = (n * (n - 1) / 2) as f64;
    assert!(pairs >= 1e5);
    let se = (q * (1.0 - q) / pairs).sqrt();
    for (label, g) in [("A", &pair.a), ("B", &pair.b)] {
        let density = g.edge_count() as f64 / pairs;
        assert!(
            (density - q).abs() <= 4.0 * se,
            "{label}: density {density} vs q {q} (se {se})"
        );
    }
}

#[test]
fn sampler_cross_moments_match_closed_forms() {
    let (n, q, rho) = (460usize, 0.3, 0.6);
    let pair = sample_pair(n, q, rho, PiMode::Uniform, 99).unwrap();
    let sigma = (q * (1.0 - q)).sqrt();
    for (l, m) in [(1, 1), (2, 1), (2, 2)] {
        let samples = edge_pair_samples(&pair, l, m);
        let (mean, se) = mc_mean_with_se(samples.len(), |i| samples[i]);
        let scaled = mean / sigma.powi(l + m);
        let scaled_se = se / sigma.powi(l + m);
        let want = cross_moment(l as u32, m as u32, q, rho).unwrap();
        let z = (scaled - want) / scaled_se;
        assert!(
            z.abs() <= 4.0,
            "(l,m)=({l},{m}): empirical {scaled} vs {want} is {z:.2} SEs off"
        );
    }
}

#[test]
fn uniform_pi_has_uniform_positions() {
    // Chi-square sanity at n=3 over many draws: each (position, value) cell
    // close to trials/n.
    let n = 3usize;
    let trials = 6000usize;
    let mut cells = vec![0usize; n * n];
    for t in 0..trials {
        let pair = sample_pair(n, 0.3, 0.5, PiMode::Uniform, 50_000 + t as u64).unwrap();
        for (i, &p) in pair.pi.iter().enumerate() {
            cells[i * n + p] += 1;
        }
    }
    let expected = trials as f64 / n as f64;
    let chi2: f64 = cells
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // df = n(n-1) = 6 after row constraints; 22.46 is the 0.1% quantile.
    assert!(
        chi2 <= 22.46,
        "chi-square {chi2} too large; cells {cells:?}"
    );

    let id = sample_pair(n, 0.3, 0.5, PiMode::Identity, 1).unwrap();
    assert_eq!(id.pi, vec![0, 1, 2]);
}

#[test]
fn exhaustive_colorings_reproduce_exact_scores() {
    // With every coloring of both sides enumerated, the color-coding
    // estimator's mean collapses to the exact matrix (n <= 6, N = 2).
    let family = build_family(1, 1, 1, None).unwrap();
    assert_eq!(family.n_edges(), 2);
    let pair = sample_pair(6, 0.4, 0.7, PiMode::Uniform, 8).unwrap();
    let exact = phi_exact_flat(&pair, &family).unwrap();
    let exhaustive = phi_exhaustive_colorings(&pair, &family).unwrap();
    for (idx, (a, b)) in exhaustive.iter().zip(&exact).enumerate() {
        assert!(
            (a - b).abs() <= 1e-9 * b.abs().max(1.0),
            "entry {idx}: exhaustive {a} vs exact {b}"
        );
    }
}

#[test]
fn colorful_expectation_equals_exact_up_to_four_edges() {
    // Oracle equivalence on every shape with <= 4 edges over a 6-vertex
    // host: exhaustive expectation = r * W to 1e-9 relative.
    let pair = sample_pair(6, 0.35, 0.0, PiMode::Identity, 71).unwrap();
    let host = WeightedHost::centered(&pair.a, 0.35);
    for k in 0..=4usize {
        for shape in enumerate_rooted_trees(k).unwrap() {
            let r = colorful_probability(shape.vertices());
            for root in [0usize, 3, 5] {
                let lhs = exhaustive_coloring_expectation(&host, &shape, root).unwrap();
                let rhs = r * exact_signed_count(&host, root, &shape).unwrap();
                assert!(
                    (lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0),
                    "shape {:?} root {root}: {lhs} vs {rhs}",
                    shape.levels()
                );
            }
        }
    }
}

/// Wall-time scaling report for the counting DP (not an assertion: the
/// theoretical base of the exponent is an open point, so the artifact
/// reports measurements instead). Run with
/// `cargo test --test invariants -- --ignored --nocapture dp_scaling`.
#[test]
#[ignore = "measurement report, not a check"]
fn dp_scaling_report() {
    for (k, l, m) in [(1, 2, 1), (2, 2, 1), (3, 2, 1)] {
        let family = build_family(k, l, m, None).unwrap();
        let n = 120;
        let pair = sample_pair(n, 0.2, 0.9, PiMode::Identity, 5).unwrap();
        let t0 = std::time::Instant::now();
        let _ = phi_approx(&pair, &family, &ApproxOptions::with_t(1, 50)).unwrap();
        println!(
            "N = {:2} (K={k}, L={l}, M={m}): 100 colorings at n={n} took {:?}",
            family.n_edges(),
            t0.elapsed()
        );
    }
}

#[test]
fn colorful_estimator_is_unbiased_per_coordinate() {
    // All-roots DP: every coordinate's Monte Carlo mean over colorings must
    // sit within 4 SE of its exact count.
    use chandelier::count::{colorful_count_all_roots, Coloring};
    use chandelier::trees::RootedTreeShape;
    let n = 12usize;
    let shape = RootedTreeShape::from_levels(&[0, 1, 1, 2]).unwrap();
    let colors = shape.vertices();
    let r = colorful_probability(colors);
    let pair = sample_pair(n, 0.3, 0.0, PiMode::Identity, 88).unwrap();
    let host = WeightedHost::centered(&pair.a, 0.3);
    let trials = 4000usize;
    let mut rng = rng_stream(89, 0);
    let mut per_root: Vec<Vec<f64>> = (0..n).map(|_| Vec::with_capacity(trials)).collect();
    for _ in 0..trials {
        let coloring = Coloring::random(n, colors, &mut rng);
        let counts = colorful_count_all_roots(&host, &shape, &coloring).unwrap();
        for (root, &x) in counts.iter().enumerate() {
            per_root[root].push(x / r);
        }
    }
    for (root, samples) in per_root.iter().enumerate() {
        let exact = exact_signed_count(&host, root, &shape).unwrap();
        let (mean, se) = mc_mean_with_se(trials, |i| samples[i]);
        let z = (mean - exact) / se;
        assert!(
            z.abs() <= 4.0,
            "root {root}: mean {mean} vs {exact}, z = {z:.2}"
        );
    }
}

#[test]
fn colorings_are_deterministic_per_seed_stream() {
    use chandelier::count::Coloring;
    let a = Coloring::random(40, 7, &mut rng_stream(3, 9));
    let b = Coloring::random(40, 7, &mut rng_stream(3, 9));
    assert_eq!(a.colors, b.colors);
    let c = Coloring::random(40, 7, &mut rng_stream(3, 10));
    assert_ne!(a.colors, c.colors);
    let mut rng = rng_stream(3, 11);
    let _: f64 = rng.random();
}
