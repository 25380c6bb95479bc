//! Similarity score matrices.
//!
//! `phi_exact` forms `Phi_ij = sum_H aut(H) W_{i,H}(Abar) W_{j,H}(Bbar)`
//! from backtracking counts (oracle scale). `phi_approx` forms the
//! color-coding estimate: `2t` independent colorings (`t` per side), per-tree
//! root vectors accumulated through the bulb-table cache, combined as
//! `(1/r^2) sum_H aut(H) (mean_a X_{i,H}) (mean_a X_{j,H})`.
//!
//! Colorings are parallelized in 64 fixed chunks merged in index order, so a
//! given seed produces a bit-identical matrix regardless of thread count.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::count::{
    colorful_probability, exact_signed_count, family_flops_per_coloring, BulbTableCache, Coloring,
    MaskIndex, WeightedHost, DEFAULT_TABLE_BUDGET,
};
use crate::error::{Error, Result};
use crate::model::GraphPair;
use crate::rng::{rng_stream, RNG_ALGORITHM};
use crate::trees::params::mean_diagonal_score;
use crate::trees::ChandelierFamily;

/// Oracle-scale caps for the exact route.
pub const PHI_EXACT_EDGE_CAP: usize = 6;
pub const PHI_EXACT_HOST_CAP: usize = 40;
pub const PHI_EXACT_FAMILY_CAP: u128 = 50;

/// Default cap on the number of colorings per side; `ceil(1/r)` is
/// astronomically large for realistic `N`, so variance-versus-time is
/// surfaced as configuration instead of silently honoring the formula.
pub const DEFAULT_T_CAP: usize = 10_000;

/// Default ceiling on the estimated flops of one `phi_approx` call.
pub const DEFAULT_FLOP_CEILING: f64 = 2e13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    Exact,
    Approx,
}

impl ScoreMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreMode::Exact => "exact",
            ScoreMode::Approx => "approx",
        }
    }
}

/// Family parameters recorded alongside a score matrix.
#[derive(Debug, Clone)]
pub struct FamilyFingerprint {
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub r_cap: Option<u128>,
    pub n_edges: usize,
    pub family_size: u128,
}

impl FamilyFingerprint {
    pub fn of(family: &ChandelierFamily) -> Self {
        FamilyFingerprint {
            k: family.k(),
            l: family.l(),
            m: family.m(),
            r_cap: family.r_cap(),
            n_edges: family.n_edges(),
            family_size: family.size(),
        }
    }

    pub fn r_cap_string(&self) -> String {
        self.r_cap.map_or("inf".into(), |r| r.to_string())
    }
}

/// An `n x n` score matrix (rows: vertices of `A`, columns: vertices of `B`)
/// plus the scalars needed to threshold and reproduce it.
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    pub n: usize,
    pub scores: Vec<f64>,
    pub mode: ScoreMode,
    pub mu: f64,
    /// Colorful probability `r`, approx mode only.
    pub r: Option<f64>,
    /// Colorings per side, approx mode only.
    pub t: Option<usize>,
    /// Master coloring seed, approx mode only.
    pub seed: Option<u64>,
    /// Matching threshold, when one has been attached.
    pub tau: Option<f64>,
    pub fingerprint: FamilyFingerprint,
}

impl ScoreMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.scores[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.n..(i + 1) * self.n]
    }

    /// Matrix as CSV, one row per line, shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    /// Sidecar metadata: fingerprint, scalars, seeds.
    pub fn metadata_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "schema_version = 1");
        let _ = writeln!(s, "rng = {RNG_ALGORITHM}");
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "mode = {}", self.mode.as_str());
        let _ = writeln!(s, "K = {}", self.fingerprint.k);
        let _ = writeln!(s, "L = {}", self.fingerprint.l);
        let _ = writeln!(s, "M = {}", self.fingerprint.m);
        let _ = writeln!(s, "R = {}", self.fingerprint.r_cap_string());
        let _ = writeln!(s, "N = {}", self.fingerprint.n_edges);
        let _ = writeln!(s, "family_size = {}", self.fingerprint.family_size);
        let _ = writeln!(s, "mu = {}", self.mu);
        if let Some(r) = self.r {
            let _ = writeln!(s, "r = {r}");
        }
        if let Some(t) = self.t {
            let _ = writeln!(s, "t = {t}");
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "coloring_seed = {seed}");
        }
        if let Some(tau) = self.tau {
            let _ = writeln!(s, "tau = {tau}");
        }
        s
    }
}

/// Parses a matrix written by [`ScoreMatrix::to_csv`].
pub fn parse_matrix_csv(text: &str) -> Result<(usize, Vec<f64>)> {
    let mut rows = 0usize;
    let mut values = Vec::new();
    let mut width = None;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad matrix entry `{f}`")))
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => return Err(Error::InvalidInput("ragged matrix".into())),
            _ => {}
        }
        rows += 1;
        values.extend(row);
    }
    if rows == 0 || width != Some(rows) {
        return Err(Error::InvalidInput(format!(
            "matrix must be square and non-empty, got {rows} x {:?}",
            width
        )));
    }
    Ok((rows, values))
}

fn check_finite(scores: &[f64]) -> Result<()> {
    if scores.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvariantViolation(
            "score matrix contains non-finite entries".into(),
        ))
    }
}

fn check_exact_scale(pair: &GraphPair, family: &ChandelierFamily) -> Result<()> {
    if family.n_edges() > PHI_EXACT_EDGE_CAP
        || pair.n > PHI_EXACT_HOST_CAP
        || family.size() > PHI_EXACT_FAMILY_CAP
    {
        return Err(Error::CapExceeded(format!(
            "phi_exact is oracle-scale only (N <= {PHI_EXACT_EDGE_CAP}, n <= {PHI_EXACT_HOST_CAP}, |T| <= {PHI_EXACT_FAMILY_CAP}); got N = {}, n = {}, |T| = {}",
            family.n_edges(),
            pair.n,
            family.size()
        )));
    }
    Ok(())
}

fn mu_of(pair: &GraphPair, family: &ChandelierFamily) -> Result<f64> {
    mean_diagonal_score(
        family.size() as f64,
        family.n_edges(),
        pair.n,
        pair.q,
        pair.rho,
    )
}

/// Exact score matrix from backtracking counts. Oracle scale only.
pub fn phi_exact(pair: &GraphPair, family: &ChandelierFamily) -> Result<ScoreMatrix> {
    check_exact_scale(pair, family)?;
    let n = pair.n;
    let host_a = WeightedHost::centered(&pair.a, pair.q);
    let host_b = WeightedHost::centered(&pair.b, pair.q);
    let mut scores = vec![0.0; n * n];
    for ch in family.iter() {
        let shape = ch.realized(family)?;
        let wa: Vec<f64> = (0..n)
            .map(|i| exact_signed_count(&host_a, i, &shape))
            .collect::<Result<_>>()?;
        let wb: Vec<f64> = (0..n)
            .map(|j| exact_signed_count(&host_b, j, &shape))
            .collect::<Result<_>>()?;
        let aut = ch.aut() as f64;
        for i in 0..n {
            if wa[i] == 0.0 {
                continue;
            }
            let coeff = aut * wa[i];
            for j in 0..n {
                scores[i * n + j] += coeff * wb[j];
            }
        }
    }
    check_finite(&scores)?;
    Ok(ScoreMatrix {
        n,
        scores,
        mode: ScoreMode::Exact,
        mu: mu_of(pair, family)?,
        r: None,
        t: None,
        seed: None,
        tau: None,
        fingerprint: FamilyFingerprint::of(family),
    })
}

/// Exact scores for selected `(i, j)` entries only; the per-root counts each
/// side needs are computed once. Oracle scale only.
pub fn phi_exact_entries(
    pair: &GraphPair,
    family: &ChandelierFamily,
    entries: &[(usize, usize)],
) -> Result<Vec<f64>> {
    check_exact_scale(pair, family)?;
    let host_a = WeightedHost::centered(&pair.a, pair.q);
    let host_b = WeightedHost::centered(&pair.b, pair.q);
    let mut roots_a: Vec<usize> = entries.iter().map(|&(i, _)| i).collect();
    let mut roots_b: Vec<usize> = entries.iter().map(|&(_, j)| j).collect();
    roots_a.sort_unstable();
    roots_a.dedup();
    roots_b.sort_unstable();
    roots_b.dedup();
    let mut out = vec![0.0; entries.len()];
    for ch in family.iter() {
        let shape = ch.realized(family)?;
        let wa: Vec<f64> = roots_a
            .iter()
            .map(|&i| exact_signed_count(&host_a, i, &shape))
            .collect::<Result<_>>()?;
        let wb: Vec<f64> = roots_b
            .iter()
            .map(|&j| exact_signed_count(&host_b, j, &shape))
            .collect::<Result<_>>()?;
        let aut = ch.aut() as f64;
        for (slot, &(i, j)) in entries.iter().enumerate() {
            let ia = roots_a.binary_search(&i).unwrap();
            let jb = roots_b.binary_search(&j).unwrap();
            out[slot] += aut * wa[ia] * wb[jb];
        }
    }
    Ok(out)
}

/// Options for [`phi_approx`].
#[derive(Debug, Clone)]
pub struct ApproxOptions {
    /// Colorings per side; defaults to `min(ceil(1/r), t_cap)`.
    pub t_override: Option<usize>,
    pub t_cap: usize,
    /// Master seed; coloring `a` of side A uses stream `a`, side B stream `t+a`.
    pub seed: u64,
    pub flop_ceiling: f64,
    pub table_budget: usize,
    pub use_cache: bool,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions {
            t_override: None,
            t_cap: DEFAULT_T_CAP,
            seed: 0,
            flop_ceiling: DEFAULT_FLOP_CEILING,
            table_budget: DEFAULT_TABLE_BUDGET,
            use_cache: true,
        }
    }
}

impl ApproxOptions {
    pub fn seeded(seed: u64) -> Self {
        ApproxOptions {
            seed,
            ..Default::default()
        }
    }

    pub fn with_t(seed: u64, t: usize) -> Self {
        ApproxOptions {
            seed,
            t_override: Some(t),
            ..Default::default()
        }
    }
}

/// Number of colorings per side implied by the options.
pub fn resolve_t(family: &ChandelierFamily, opts: &ApproxOptions) -> Result<usize> {
    let t = match opts.t_override {
        Some(t) => t,
        None => {
            let r = colorful_probability(family.n_edges() + 1);
            ((1.0 / r).ceil() as usize).min(opts.t_cap)
        }
    };
    if t == 0 {
        return Err(Error::ParamOutOfRange(
            "t must be positive (t_override = 0 is degenerate)".into(),
        ));
    }
    Ok(t)
}

/// Color-coding estimate of the score matrix.
pub fn phi_approx(
    pair: &GraphPair,
    family: &ChandelierFamily,
    opts: &ApproxOptions,
) -> Result<ScoreMatrix> {
    let n = pair.n;
    let colors = family.n_edges() + 1;
    let idx = MaskIndex::new(colors)?;
    let r = colorful_probability(colors);
    let t = resolve_t(family, opts)?;

    let flops = 2.0 * t as f64 * family_flops_per_coloring(family, n);
    if flops > opts.flop_ceiling {
        return Err(Error::BudgetExceeded(format!(
            "estimated {flops:.3e} flops exceeds ceiling {:.3e}; lower t or the family size",
            opts.flop_ceiling
        )));
    }
    let family_len = usize::try_from(family.size())
        .map_err(|_| Error::BudgetExceeded("family does not fit in memory".into()))?;
    let acc_bytes = 2usize
        .saturating_mul(family_len)
        .saturating_mul(n)
        .saturating_mul(8);
    if acc_bytes > opts.table_budget {
        return Err(Error::BudgetExceeded(format!(
            "per-tree accumulators need {acc_bytes} bytes (> budget {})",
            opts.table_budget
        )));
    }

    let host_a = WeightedHost::centered(&pair.a, pair.q);
    let host_b = WeightedHost::centered(&pair.b, pair.q);

    // Fixed chunking keeps the reduction order independent of thread count.
    let total = 2 * t;
    let nchunks = total.min(64);
    let bounds: Vec<(usize, usize)> = (0..nchunks)
        .map(|c| (c * total / nchunks, (c + 1) * total / nchunks))
        .collect();

    let chunks: Vec<(Vec<f64>, Vec<f64>)> = bounds
        .par_iter()
        .map(|&(lo, hi)| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut acc_a = vec![0.0; family_len * n];
            let mut acc_b = vec![0.0; family_len * n];
            for c in lo..hi {
                let (host, acc) = if c < t {
                    (&host_a, &mut acc_a)
                } else {
                    (&host_b, &mut acc_b)
                };
                let mut rng = rng_stream(opts.seed, c as u64);
                let coloring = Coloring::random(n, colors, &mut rng);
                let mut cache =
                    BulbTableCache::new(host, family, &coloring, &idx, opts.table_budget)?;
                for (h, ch) in family.iter().enumerate() {
                    let x = if opts.use_cache {
                        cache.chandelier_counts(&ch)
                    } else {
                        cache.chandelier_counts_uncached(&ch)
                    };
                    for (a, v) in acc[h * n..(h + 1) * n].iter_mut().zip(&x) {
                        *a += v;
                    }
                }
            }
            Ok((acc_a, acc_b))
        })
        .collect::<Result<_>>()?;

    let mut sum_a = vec![0.0; family_len * n];
    let mut sum_b = vec![0.0; family_len * n];
    for (ca, cb) in &chunks {
        for (s, v) in sum_a.iter_mut().zip(ca) {
            *s += v;
        }
        for (s, v) in sum_b.iter_mut().zip(cb) {
            *s += v;
        }
    }

    let scale = 1.0 / (r * r * t as f64 * t as f64);
    let mut scores = vec![0.0; n * n];
    for (h, ch) in family.iter().enumerate() {
        let coeff0 = ch.aut() as f64 * scale;
        let xa = &sum_a[h * n..(h + 1) * n];
        let xb = &sum_b[h * n..(h + 1) * n];
        for i in 0..n {
            if xa[i] == 0.0 {
                continue;
            }
            let coeff = coeff0 * xa[i];
            let row = &mut scores[i * n..(i + 1) * n];
            for (s, &x) in row.iter_mut().zip(xb) {
                *s += coeff * x;
            }
        }
    }

    check_finite(&scores)?;
    Ok(ScoreMatrix {
        n,
        scores,
        mode: ScoreMode::Approx,
        mu: mu_of(pair, family)?,
        r: Some(r),
        t: Some(t),
        seed: Some(opts.seed),
        tau: None,
        fingerprint: FamilyFingerprint::of(family),
    })
}

/// Fixed threshold `tau = c mu`, `0 < c < 1`.
pub fn threshold_fixed(mu: f64, c: f64) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::ParamOutOfRange(format!(
            "threshold constant c = {c}, need 0 < c < 1"
        )));
    }
    Ok(c * mu)
}

/// Data-driven threshold: half the lower-median best row score.
///
/// `psi(i)` is the smallest column maximizing row `i`; `k` attains the lower
/// median of `{scores[i][psi(i)]}`; the threshold is `scores[k][psi(k)] / 2`.
pub fn threshold_data_driven(scores: &ScoreMatrix) -> f64 {
    let n = scores.n;
    let mut best: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let row = scores.row(i);
            let mut arg = 0usize;
            for j in 1..n {
                if row[j] > row[arg] {
                    arg = j;
                }
            }
            (row[arg], i)
        })
        .collect();
    best.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (value, _k) = best[(n - 1) / 2];
    value / 2.0
}
