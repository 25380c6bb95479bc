//! Correlated Erdős–Rényi graph pairs.
//!
//! A [`GraphPair`] holds two simple graphs `A` and `B` on `[n]` together with
//! the latent permutation `pi` that aligns them: for every `i < j` the pair
//! `(A_ij, B_{pi(i)pi(j)})` is drawn from the unique 2x2 Bernoulli joint
//! distribution with both marginals `q` and Pearson correlation `rho`.
//! Sampling draws one of the four joint cells per vertex pair, which realizes
//! that law exactly.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_stream;

/// Simple undirected graph stored as packed bitset rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    words_per_row: usize,
    bits: Vec<u64>,
    edges: usize,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        let words_per_row = n.div_ceil(64);
        Graph {
            n,
            words_per_row,
            bits: vec![0; n * words_per_row],
            edges: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    /// Fraction of possible edges present.
    pub fn density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.edges as f64 / (self.n * (self.n - 1) / 2) as f64
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        assert!(u != v && u < self.n && v < self.n, "bad edge ({u},{v})");
        if !self.has_edge(u, v) {
            self.edges += 1;
        }
        self.bits[u * self.words_per_row + v / 64] |= 1 << (v % 64);
        self.bits[v * self.words_per_row + u / 64] |= 1 << (u % 64);
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.bits[u * self.words_per_row + v / 64] >> (v % 64) & 1 == 1
    }

    /// Bitset row of vertex `u` (words of 64 vertices each).
    pub fn row(&self, u: usize) -> &[u64] {
        &self.bits[u * self.words_per_row..(u + 1) * self.words_per_row]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.row(u).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn neighbors(&self, u: usize) -> Neighbors<'_> {
        Neighbors {
            row: self.row(u),
            word_index: 0,
            current: self.row(u).first().copied().unwrap_or(0),
        }
    }

    /// Complement graph (all non-edges become edges, zero diagonal kept).
    pub fn complement(&self) -> Graph {
        let mut g = Graph::new(self.n);
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                if !self.has_edge(u, v) {
                    g.add_edge(u, v);
                }
            }
        }
        g
    }

    /// Edges as sorted `(u, v)` pairs with `u < v`.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edges);
        for u in 0..self.n {
            for v in self.neighbors(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }
}

/// Word-skipping iterator over the set bits of one adjacency row.
pub struct Neighbors<'a> {
    row: &'a [u64],
    word_index: usize,
    current: u64,
}

impl Iterator for Neighbors<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        while self.current == 0 {
            self.word_index += 1;
            if self.word_index >= self.row.len() {
                return None;
            }
            self.current = self.row[self.word_index];
        }
        let bit = self.current.trailing_zeros() as usize;
        self.current &= self.current - 1;
        Some(self.word_index * 64 + bit)
    }
}

/// How the ground-truth permutation is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiMode {
    Identity,
    Uniform,
}

impl PiMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PiMode::Identity => "identity",
            PiMode::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Result<PiMode> {
        match s {
            "identity" => Ok(PiMode::Identity),
            "uniform" => Ok(PiMode::Uniform),
            other => Err(Error::InvalidInput(format!("unknown pi_mode `{other}`"))),
        }
    }
}

/// A correlated graph pair with its generation parameters and ground truth.
#[derive(Debug, Clone)]
pub struct GraphPair {
    pub n: usize,
    pub q: f64,
    pub rho: f64,
    pub a: Graph,
    pub b: Graph,
    /// Ground truth: vertex `i` of `A` corresponds to vertex `pi[i]` of `B`.
    pub pi: Vec<usize>,
    pub seed: u64,
    pub pi_mode: PiMode,
}

/// Smallest admissible correlation at edge probability `q <= 1/2`.
///
/// The joint cell `p11 = q^2 + rho q(1-q)` must stay nonnegative, which
/// forces `rho >= -q/(1-q)`.
pub fn rho_min(q: f64) -> f64 {
    -q / (1.0 - q)
}

/// Joint cell probabilities `[p11, p10, p01, p00]` for one edge pair.
pub fn joint_cell_probs(q: f64, rho: f64) -> [f64; 4] {
    let s2 = q * (1.0 - q);
    let p11 = q * q + rho * s2;
    let p10 = s2 * (1.0 - rho);
    let p00 = (1.0 - q) * (1.0 - q) + rho * s2;
    [p11, p10, p10, p00]
}

fn check_pair_params(n: usize, q: f64, rho: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::ParamOutOfRange(format!("n = {n}, need n >= 2")));
    }
    if !(q > 0.0 && q <= 0.5) {
        return Err(Error::ParamOutOfRange(format!(
            "q = {q}, need 0 < q <= 1/2 (for q > 1/2 complement both graphs, e.g. via --complement)"
        )));
    }
    let lo = rho_min(q);
    if !(rho >= lo && rho <= 1.0) {
        return Err(Error::ParamOutOfRange(format!(
            "rho = {rho}, need rho_min(q) = -q/(1-q) = {lo} <= rho <= 1"
        )));
    }
    Ok(())
}

/// Samples a correlated pair `(A, B)` with hidden permutation drawn per
/// `pi_mode`. Stream 0 of the seed drives the permutation, stream 1 the
/// edge cells, so the two are independent.
pub fn sample_pair(n: usize, q: f64, rho: f64, pi_mode: PiMode, seed: u64) -> Result<GraphPair> {
    check_pair_params(n, q, rho)?;
    let pi = match pi_mode {
        PiMode::Identity => (0..n).collect::<Vec<_>>(),
        PiMode::Uniform => {
            let mut rng = rng_stream(seed, 0);
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut rng);
            p
        }
    };

    let [p11, p10, p01, _] = joint_cell_probs(q, rho);
    let c1 = p11;
    let c2 = p11 + p10;
    let c3 = p11 + p10 + p01;

    let mut rng = rng_stream(seed, 1);
    let mut a = Graph::new(n);
    let mut b = Graph::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let u: f64 = rng.random();
            let (ea, eb) = if u < c1 {
                (true, true)
            } else if u < c2 {
                (true, false)
            } else if u < c3 {
                (false, true)
            } else {
                (false, false)
            };
            if ea {
                a.add_edge(i, j);
            }
            if eb {
                b.add_edge(pi[i], pi[j]);
            }
        }
    }
    Ok(GraphPair {
        n,
        q,
        rho,
        a,
        b,
        pi,
        seed,
        pi_mode,
    })
}

impl GraphPair {
    /// Pair with both graphs complemented: parameters become `(n, 1-q, rho)`.
    pub fn complement(&self) -> GraphPair {
        GraphPair {
            n: self.n,
            q: 1.0 - self.q,
            rho: self.rho,
            a: self.a.complement(),
            b: self.b.complement(),
            pi: self.pi.clone(),
            seed: self.seed,
            pi_mode: self.pi_mode,
        }
    }

    /// Serializes to the plain-text pair format:
    /// header `n q rho seed pi_mode`, edges of `A`, a `%` line, edges of `B`,
    /// a `%` line, then the permutation as `i pi(i)` lines. 0-indexed.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {} {} {} {}",
            self.n,
            self.q,
            self.rho,
            self.seed,
            self.pi_mode.as_str()
        );
        for (u, v) in self.a.edge_list() {
            let _ = writeln!(s, "{u} {v}");
        }
        let _ = writeln!(s, "%");
        for (u, v) in self.b.edge_list() {
            let _ = writeln!(s, "{u} {v}");
        }
        let _ = writeln!(s, "%");
        for (i, p) in self.pi.iter().enumerate() {
            let _ = writeln!(s, "{i} {p}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<GraphPair> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty pair file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::InvalidInput(format!(
                "header must be `n q rho seed pi_mode`, got `{header}`"
            )));
        }
        let n: usize = parse_field(fields[0], "n")?;
        let q: f64 = parse_field(fields[1], "q")?;
        let rho: f64 = parse_field(fields[2], "rho")?;
        let seed: u64 = parse_field(fields[3], "seed")?;
        let pi_mode = PiMode::parse(fields[4])?;

        let mut a = Graph::new(n);
        let mut b = Graph::new(n);
        let mut pi = vec![usize::MAX; n];
        let mut section = 0usize;
        for line in lines {
            let line = line.trim();
            if line == "%" {
                section += 1;
                if section > 2 {
                    return Err(Error::InvalidInput("too many % separators".into()));
                }
                continue;
            }
            let mut it = line.split_whitespace();
            let x: usize = parse_field(it.next().unwrap_or(""), "vertex")?;
            let y: usize = parse_field(it.next().unwrap_or(""), "vertex")?;
            if x >= n || y >= n {
                return Err(Error::InvalidInput(format!("vertex out of range: {line}")));
            }
            match section {
                0 => a.add_edge(x, y),
                1 => b.add_edge(x, y),
                _ => pi[x] = y,
            }
        }
        if section != 2 {
            return Err(Error::InvalidInput(
                "pair file must contain two % separators".into(),
            ));
        }
        if pi.contains(&usize::MAX) {
            return Err(Error::InvalidInput("incomplete permutation block".into()));
        }
        let mut seen = vec![false; n];
        for &p in &pi {
            if seen[p] {
                return Err(Error::InvalidInput("permutation is not injective".into()));
            }
            seen[p] = true;
        }
        Ok(GraphPair {
            n,
            q,
            rho,
            a,
            b,
            pi,
            seed,
            pi_mode,
        })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<GraphPair> {
        let text = std::fs::read_to_string(path)?;
        GraphPair::from_text(&text)
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, name: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::InvalidInput(format!("cannot parse {name} from `{s}`")))
}

/// Normalized cross-moment `E[sigma^-(l+m) Abar^l Bbar^m]` of one centered
/// edge pair, `sigma^2 = q(1-q)`, in closed form:
///
/// * `l+m = 2`: `rho` if `l = m = 1`, else `1`;
/// * `l+m = 3`: `rho (1-2q) / sqrt(q(1-q))`;
/// * `l+m = 4`: `(q(1-q) + rho (1-2q)^2) / (q(1-q))`.
pub fn cross_moment(l: u32, m: u32, q: f64, rho: f64) -> Result<f64> {
    if l > 2 || m > 2 || !(2..=4).contains(&(l + m)) {
        return Err(Error::ParamOutOfRange(format!(
            "cross_moment exponents (l, m) = ({l}, {m}); need l, m in 0..=2 and 2 <= l+m <= 4"
        )));
    }
    check_pair_params(2, q, rho)?;
    let s2 = q * (1.0 - q);
    Ok(match l + m {
        2 => {
            if l == 1 && m == 1 {
                rho
            } else {
                1.0
            }
        }
        3 => rho * (1.0 - 2.0 * q) / s2.sqrt(),
        _ => (s2 + rho * (1.0 - 2.0 * q) * (1.0 - 2.0 * q)) / s2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_cells_match_moment_system() {
        // q=0.5, rho=0 -> independence.
        assert!((joint_cell_probs(0.5, 0.0)[0] - 0.25).abs() < 1e-15);
        // q=0.3, rho=1 -> p10 = 0, perfect correlation.
        assert!(joint_cell_probs(0.3, 1.0)[1].abs() < 1e-15);
        // q=0.3, rho=0.5 -> p11 = 0.09 + 0.5*0.21 = 0.195.
        assert!((joint_cell_probs(0.3, 0.5)[0] - 0.195).abs() < 1e-15);
        // Cells always sum to 1.
        let cells = joint_cell_probs(0.41, -0.3);
        assert!((cells.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(matches!(
            sample_pair(10, 0.7, 0.5, PiMode::Identity, 1),
            Err(Error::ParamOutOfRange(_))
        ));
        assert!(matches!(
            sample_pair(10, 0.3, -0.9, PiMode::Identity, 1),
            Err(Error::ParamOutOfRange(_))
        ));
        assert!(matches!(
            sample_pair(1, 0.3, 0.5, PiMode::Identity, 1),
            Err(Error::ParamOutOfRange(_))
        ));
        // rho slightly above rho_min is accepted.
        let q = 0.3;
        assert!(sample_pair(6, q, rho_min(q) + 1e-9, PiMode::Identity, 1).is_ok());
    }

    #[test]
    fn perfect_correlation_copies_edges() {
        let pair = sample_pair(30, 0.3, 1.0, PiMode::Uniform, 99).unwrap();
        for i in 0..pair.n {
            for j in (i + 1)..pair.n {
                assert_eq!(
                    pair.a.has_edge(i, j),
                    pair.b.has_edge(pair.pi[i], pair.pi[j])
                );
            }
        }
    }

    #[test]
    fn graphs_are_symmetric_without_self_loops() {
        let pair = sample_pair(25, 0.4, 0.2, PiMode::Uniform, 5).unwrap();
        for g in [&pair.a, &pair.b] {
            for u in 0..pair.n {
                assert!(!g.has_edge(u, u));
                for v in 0..pair.n {
                    if u != v {
                        assert_eq!(g.has_edge(u, v), g.has_edge(v, u));
                    }
                }
            }
        }
    }

    /// Independent oracle: expected moment by enumerating the four joint
    /// cells directly.
    fn moment_by_cell_enumeration(l: u32, m: u32, q: f64, rho: f64) -> f64 {
        let cells = joint_cell_probs(q, rho);
        let vals = [(1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (0.0, 0.0)];
        let sigma = (q * (1.0 - q)).sqrt();
        let mut acc = 0.0;
        for (p, (a, b)) in cells.iter().zip(vals) {
            acc += p * (a - q).powi(l as i32) * (b - q).powi(m as i32);
        }
        acc / sigma.powi((l + m) as i32)
    }

    #[test]
    fn cross_moment_closed_forms() {
        // (2,0) -> 1 for any q, rho.
        assert!((cross_moment(2, 0, 0.37, -0.2).unwrap() - 1.0).abs() < 1e-12);
        // (2,1) at q = 1/2 -> 0.
        assert!(cross_moment(2, 1, 0.5, 0.8).unwrap().abs() < 1e-12);
        // (2,2) at q=0.25, rho=0.8 -> (0.1875 + 0.8*0.25)/0.1875.
        let want = (0.1875 + 0.8 * 0.25) / 0.1875;
        assert!((cross_moment(2, 2, 0.25, 0.8).unwrap() - want).abs() < 1e-12);
        // All admissible exponents agree with direct cell enumeration.
        for (l, m) in [(1, 1), (2, 0), (0, 2), (2, 1), (1, 2), (2, 2)] {
            for (q, rho) in [(0.5, 0.0), (0.3, 0.5), (0.25, 0.8), (0.45, -0.4)] {
                let got = cross_moment(l, m, q, rho).unwrap();
                let want = moment_by_cell_enumeration(l, m, q, rho);
                assert!(
                    (got - want).abs() < 1e-12,
                    "(l,m)=({l},{m}) q={q} rho={rho}: {got} vs {want}"
                );
            }
        }
        assert!(cross_moment(0, 1, 0.3, 0.5).is_err());
        assert!(cross_moment(2, 3, 0.3, 0.5).is_err());
    }

    #[test]
    fn neighbor_iteration_matches_edge_queries() {
        // Exercise multi-word rows (n > 64).
        let pair = sample_pair(130, 0.15, 0.0, PiMode::Identity, 3).unwrap();
        for u in 0..pair.n {
            let from_iter: Vec<usize> = pair.a.neighbors(u).collect();
            let from_query: Vec<usize> = (0..pair.n).filter(|&v| pair.a.has_edge(u, v)).collect();
            assert_eq!(from_iter, from_query, "vertex {u}");
        }
    }

    #[test]
    fn pair_file_round_trip() {
        let pair = sample_pair(12, 0.35, 0.6, PiMode::Uniform, 2024).unwrap();
        let text = pair.to_text();
        let back = GraphPair::from_text(&text).unwrap();
        assert_eq!(back.n, pair.n);
        assert_eq!(back.pi, pair.pi);
        assert_eq!(back.a, pair.a);
        assert_eq!(back.b, pair.b);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn complement_flips_density() {
        let pair = sample_pair(20, 0.3, 0.5, PiMode::Identity, 7).unwrap();
        let comp = pair.complement();
        assert!((comp.q - 0.7).abs() < 1e-15);
        let full = 20 * 19 / 2;
        assert_eq!(pair.a.edge_count() + comp.a.edge_count(), full);
        assert!(!comp.a.has_edge(3, 3.min(comp.n - 1)));
    }
}
