//! Signed rooted subgraph counts.
//!
//! Two routes compute `W_{i,H}(M)`, the sum over subgraphs of the weighted
//! complete graph rooted at `i` and isomorphic to the rooted tree `H` of the
//! product of edge weights:
//!
//! * [`exact_signed_count`] enumerates injective embeddings by backtracking
//!   and divides the ordered total by `aut(H)`. Oracle scale only.
//! * [`colorful_count_all_roots`] runs the color-coding dynamic program for
//!   one random coloring: counting only copies whose vertices receive
//!   pairwise distinct colors makes the count a subset-convolution DP over
//!   color sets. `X / r` with `r = (N+1)!/(N+1)^(N+1)` is an unbiased
//!   estimator of `W`.
//!
//! Counts are plain f64: they are bounded by `n^N max|w|^N`, far below
//! overflow at the supported scales, so no log-domain bookkeeping is needed.
//!
//! The DP tables are keyed by (color subset, host vertex) with subsets
//! sliced by popcount; per tree node only subsets whose size equals the
//! subtree size are populated. Child folds enumerate submasks directly
//! (the 3^(N+1) scheme) rather than fast subset convolution.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Graph;
use crate::trees::chandelier::{Chandelier, ChandelierFamily, SUBSET_WIDTH_CAP};
use crate::trees::shape::RootedTreeShape;

/// Oracle-scale caps for the backtracking route.
pub const EXACT_EDGE_CAP: usize = 6;
pub const EXACT_HOST_CAP: usize = 40;

/// Default memory budget for cached branch tables (bytes).
pub const DEFAULT_TABLE_BUDGET: usize = 1 << 30;

/// Symmetric edge weights on the complete graph over `[n]`, zero diagonal.
#[derive(Debug, Clone)]
pub struct WeightedHost {
    n: usize,
    w: Vec<f64>,
}

impl WeightedHost {
    /// Centered adjacency `A - q`: weight `1-q` on edges, `-q` on non-edges.
    pub fn centered(graph: &Graph, q: f64) -> Self {
        let n = graph.n();
        let mut w = vec![-q; n * n];
        for u in 0..n {
            w[u * n + u] = 0.0;
            for v in graph.neighbors(u) {
                w[u * n + v] = 1.0 - q;
            }
        }
        WeightedHost { n, w }
    }

    /// Host from an explicit symmetric matrix with zero diagonal.
    pub fn from_matrix(n: usize, w: Vec<f64>) -> Result<Self> {
        if w.len() != n * n {
            return Err(Error::InvalidInput("weight matrix must be n*n".into()));
        }
        for u in 0..n {
            if w[u * n + u] != 0.0 {
                return Err(Error::InvalidInput(format!("nonzero diagonal at {u}")));
            }
            for v in 0..u {
                if w[u * n + v] != w[v * n + u] {
                    return Err(Error::InvalidInput(format!(
                        "asymmetric weights at ({u},{v})"
                    )));
                }
            }
        }
        Ok(WeightedHost { n, w })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.w[u * self.n + v]
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.w[u * self.n..(u + 1) * self.n]
    }

    pub fn is_zero(&self) -> bool {
        self.w.iter().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        WeightedHost {
            n: self.n,
            w: self.w.iter().map(|&x| c * x).collect(),
        }
    }
}

/// A coloring of host vertices by `[num_colors]`.
#[derive(Debug, Clone)]
pub struct Coloring {
    pub colors: Vec<u8>,
    pub num_colors: usize,
    pub seed: Option<u64>,
}

impl Coloring {
    pub fn new(colors: Vec<u8>, num_colors: usize) -> Result<Self> {
        if colors.iter().any(|&c| c as usize >= num_colors) {
            return Err(Error::InvalidInput("color out of range".into()));
        }
        Ok(Coloring {
            colors,
            num_colors,
            seed: None,
        })
    }

    /// I.i.d. uniform coloring.
    pub fn random(n: usize, num_colors: usize, rng: &mut impl Rng) -> Self {
        Coloring {
            colors: (0..n)
                .map(|_| rng.random_range(0..num_colors) as u8)
                .collect(),
            num_colors,
            seed: None,
        }
    }
}

/// Probability that `num_vertices` i.i.d. uniform colors over `num_vertices`
/// colors are pairwise distinct: `r = v! / v^v`.
pub fn colorful_probability(num_vertices: usize) -> f64 {
    let v = num_vertices as f64;
    let mut r = 1.0;
    for i in 1..=num_vertices {
        r *= i as f64 / v;
    }
    r
}

// ---------------------------------------------------------------------------
// Exact route: backtracking over injective embeddings.
// ---------------------------------------------------------------------------

/// Exact signed count for every root in `roots`.
pub fn exact_signed_counts(
    host: &WeightedHost,
    shape: &RootedTreeShape,
    roots: &[usize],
) -> Result<Vec<f64>> {
    roots
        .iter()
        .map(|&r| exact_signed_count(host, r, shape))
        .collect()
}

/// Exact signed count `W_{root,shape}(host)` by backtracking.
pub fn exact_signed_count(
    host: &WeightedHost,
    root: usize,
    shape: &RootedTreeShape,
) -> Result<f64> {
    if shape.edges() > EXACT_EDGE_CAP {
        return Err(Error::CapExceeded(format!(
            "exact_signed_count supports at most {EXACT_EDGE_CAP} edges, got {}",
            shape.edges()
        )));
    }
    if host.n > EXACT_HOST_CAP {
        return Err(Error::CapExceeded(format!(
            "exact_signed_count supports at most {EXACT_HOST_CAP} host vertices, got {}",
            host.n
        )));
    }
    if root >= host.n {
        return Err(Error::ParamOutOfRange(format!("root {root} >= n")));
    }
    let v = shape.vertices();
    if v == 1 {
        return Ok(1.0);
    }
    if host.n < v {
        return Ok(0.0);
    }

    let parents = shape.parents();
    let n = host.n;
    let rowsum: Vec<f64> = (0..n).map(|u| host.row(u).iter().sum()).collect();

    // assign[t] = host image of tree vertex t (canonical preorder).
    let mut assign = vec![0usize; v];
    assign[0] = root;
    let mut total = 0.0;

    // Depth-first over tree vertices 1..v-1; the last vertex is always a
    // leaf in preorder, so its sum over unused host vertices collapses to
    // rowsum(parent) minus the used entries.
    #[allow(clippy::too_many_arguments)]
    fn rec(
        t: usize,
        used: u64,
        prod: f64,
        assign: &mut [usize],
        parents: &[usize],
        host: &WeightedHost,
        rowsum: &[f64],
        total: &mut f64,
    ) {
        let v = assign.len();
        let p = assign[parents[t]];
        let row = host.row(p);
        if t == v - 1 {
            let mut s = rowsum[p];
            let mut bits = used;
            while bits != 0 {
                let u = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                s -= row[u];
            }
            *total += prod * s;
            return;
        }
        for (cand, &w) in row.iter().enumerate() {
            if used >> cand & 1 == 1 || w == 0.0 {
                continue;
            }
            assign[t] = cand;
            rec(
                t + 1,
                used | 1 << cand,
                prod * w,
                assign,
                parents,
                host,
                rowsum,
                total,
            );
        }
    }
    rec(
        1,
        1u64 << root,
        1.0,
        &mut assign,
        &parents,
        host,
        &rowsum,
        &mut total,
    );
    Ok(total / shape.aut() as f64)
}

// ---------------------------------------------------------------------------
// Color-coding route: subset-convolution DP.
// ---------------------------------------------------------------------------

/// Mask bookkeeping for one palette: masks sliced by popcount plus the slot
/// of each mask within its slice.
#[derive(Debug)]
pub struct MaskIndex {
    colors: usize,
    by_size: Vec<Vec<u32>>,
    slot: Vec<u32>,
}

impl MaskIndex {
    pub fn new(colors: usize) -> Result<Self> {
        if colors == 0 || colors > SUBSET_WIDTH_CAP {
            return Err(Error::CapExceeded(format!(
                "palette of {colors} colors; supported range is 1..={SUBSET_WIDTH_CAP}"
            )));
        }
        let total = 1usize << colors;
        let mut by_size = vec![Vec::new(); colors + 1];
        let mut slot = vec![0u32; total];
        for mask in 0..total as u32 {
            let s = mask.count_ones() as usize;
            slot[mask as usize] = by_size[s].len() as u32;
            by_size[s].push(mask);
        }
        Ok(MaskIndex {
            colors,
            by_size,
            slot,
        })
    }

    pub fn colors(&self) -> usize {
        self.colors
    }

    fn full(&self) -> u32 {
        (1u32 << self.colors) - 1
    }
}

/// DP table for one tree node: value per (color subset of fixed size, host
/// vertex). Row-major by subset slot.
#[derive(Debug, Clone)]
struct Table {
    size: usize,
    rows: Vec<f64>,
}

impl Table {
    fn zero(idx: &MaskIndex, size: usize, n: usize) -> Table {
        Table {
            size,
            rows: vec![0.0; idx.by_size[size].len() * n],
        }
    }
}

struct DpContext<'a> {
    host: &'a WeightedHost,
    idx: &'a MaskIndex,
    /// Singleton table shared by every leaf: 1 at (mask {c}, u) iff
    /// `color(u) = c`.
    leaf: Table,
}

impl<'a> DpContext<'a> {
    fn new(host: &'a WeightedHost, coloring: &'a Coloring, idx: &'a MaskIndex) -> Result<Self> {
        if coloring.colors.len() != host.n {
            return Err(Error::InvalidInput(
                "coloring and host disagree on n".into(),
            ));
        }
        if coloring.num_colors != idx.colors {
            return Err(Error::InvalidInput(
                "coloring and mask index disagree on palette size".into(),
            ));
        }
        let n = host.n;
        let mut leaf = Table::zero(idx, 1, n);
        for (u, &c) in coloring.colors.iter().enumerate() {
            // Singleton masks are listed in ascending order, so slot = color.
            leaf.rows[c as usize * n + u] = 1.0;
        }
        Ok(DpContext { host, idx, leaf })
    }

    /// `E[m][u] = sum_u' w(u,u') D[m][u']`: pushes a child table through
    /// its parent edge.
    fn edge_fold(&self, table: &Table) -> Table {
        let n = self.host.n;
        let mut out = Table::zero(self.idx, table.size, n);
        for slot in 0..self.idx.by_size[table.size].len() {
            let src = &table.rows[slot * n..(slot + 1) * n];
            let dst = &mut out.rows[slot * n..(slot + 1) * n];
            for (u_prime, &d) in src.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let wrow = self.host.row(u_prime);
                for (acc, &w) in dst.iter_mut().zip(wrow) {
                    *acc += d * w;
                }
            }
        }
        out
    }

    /// Folds a child into a partial parent table: disjoint-union subset
    /// convolution by submask enumeration.
    fn conv_merge(&self, partial: &Table, child: &Table) -> Table {
        let n = self.host.n;
        let out_size = partial.size + child.size;
        debug_assert!(out_size <= self.idx.colors);
        let mut out = Table::zero(self.idx, out_size, n);
        for (mslot, &mask) in self.idx.by_size[out_size].iter().enumerate() {
            let dst = &mut out.rows[mslot * n..(mslot + 1) * n];
            let mut sub = mask;
            loop {
                if sub.count_ones() as usize == child.size {
                    let rest = mask ^ sub;
                    let p = self.idx.slot[rest as usize] as usize;
                    let c = self.idx.slot[sub as usize] as usize;
                    let prow = &partial.rows[p * n..(p + 1) * n];
                    let crow = &child.rows[c * n..(c + 1) * n];
                    for ((acc, &a), &b) in dst.iter_mut().zip(prow).zip(crow) {
                        *acc += a * b;
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & mask;
            }
        }
        out
    }

    /// Full DP table of the subtree rooted at canonical vertex `v`.
    fn eval_node(&self, children: &[Vec<usize>], v: usize) -> Table {
        let mut partial = self.leaf.clone();
        for &c in &children[v] {
            let child = self.eval_node(children, c);
            let pushed = self.edge_fold(&child);
            partial = self.conv_merge(&partial, &pushed);
        }
        partial
    }

    /// Reads the root table at the full color set and divides by `aut`.
    fn finish(&self, root_table: &Table, aut: u128) -> Vec<f64> {
        let n = self.host.n;
        debug_assert_eq!(root_table.size, self.idx.colors);
        let full_slot = self.idx.slot[self.idx.full() as usize] as usize;
        root_table.rows[full_slot * n..(full_slot + 1) * n]
            .iter()
            .map(|&y| y / aut as f64)
            .collect()
    }
}

fn check_palette(shape: &RootedTreeShape, coloring: &Coloring) -> Result<()> {
    if coloring.num_colors != shape.vertices() {
        return Err(Error::InvalidInput(format!(
            "coloring has {} colors but the tree has {} vertices",
            coloring.num_colors,
            shape.vertices()
        )));
    }
    Ok(())
}

/// Colorful signed count `X_{i,shape}` for every root `i` in one DP pass.
pub fn colorful_count_all_roots(
    host: &WeightedHost,
    shape: &RootedTreeShape,
    coloring: &Coloring,
) -> Result<Vec<f64>> {
    check_palette(shape, coloring)?;
    if shape.edges() >= 1 && host.is_zero() {
        return Ok(vec![0.0; host.n]);
    }
    let idx = MaskIndex::new(shape.vertices())?;
    let ctx = DpContext::new(host, coloring, &idx)?;
    let root_table = ctx.eval_node(&shape.children(), 0);
    Ok(ctx.finish(&root_table, shape.aut()))
}

/// Colorful signed count for a single root (same DP, one read-out).
pub fn colorful_count(
    host: &WeightedHost,
    root: usize,
    shape: &RootedTreeShape,
    coloring: &Coloring,
) -> Result<f64> {
    if root >= host.n {
        return Err(Error::ParamOutOfRange(format!("root {root} >= n")));
    }
    Ok(colorful_count_all_roots(host, shape, coloring)?[root])
}

// ---------------------------------------------------------------------------
// Chandelier evaluation with shared branch tables.
// ---------------------------------------------------------------------------

/// Per-coloring cache of branch tables.
///
/// A branch table is the bulb DP table propagated up the `M`-wire and
/// through the root edge; every chandelier fold then only combines `L`
/// cached tables, so each bulb is evaluated once per coloring instead of
/// once per chandelier.
pub struct BulbTableCache<'a> {
    ctx: DpContext<'a>,
    family: &'a ChandelierFamily,
    tables: Vec<Option<Table>>,
    hits: usize,
    misses: usize,
}

impl<'a> BulbTableCache<'a> {
    pub fn new(
        host: &'a WeightedHost,
        family: &'a ChandelierFamily,
        coloring: &'a Coloring,
        idx: &'a MaskIndex,
        byte_budget: usize,
    ) -> Result<Self> {
        let colors = family.n_edges() + 1;
        if idx.colors != colors || coloring.num_colors != colors {
            return Err(Error::InvalidInput(
                "palette must have N+1 colors for the family".into(),
            ));
        }
        let branch_masks = idx.by_size[family.k() + family.m()].len();
        let estimate = family.catalog().len() * branch_masks * host.n * 8;
        if estimate > byte_budget {
            return Err(Error::BudgetExceeded(format!(
                "branch tables need ~{estimate} bytes (> budget {byte_budget})"
            )));
        }
        Ok(BulbTableCache {
            ctx: DpContext::new(host, coloring, idx)?,
            family,
            tables: vec![None; family.catalog().len()],
            hits: 0,
            misses: 0,
        })
    }

    /// (cache hits, cache misses) over the lifetime of this cache.
    pub fn stats(&self) -> (usize, usize) {
        (self.hits, self.misses)
    }

    fn build_branch(ctx: &DpContext, family: &ChandelierFamily, bulb_id: usize) -> Table {
        let bulb = family.catalog().bulb(bulb_id);
        let mut t = ctx.eval_node(&bulb.children(), 0);
        // Wire vertices below the branch top: M-1 single-child extensions.
        for _ in 1..family.m() {
            let pushed = ctx.edge_fold(&t);
            t = ctx.conv_merge(&ctx.leaf, &pushed);
        }
        // Final push through the root edge.
        ctx.edge_fold(&t)
    }

    fn ensure(&mut self, bulb_id: usize) {
        if self.tables[bulb_id].is_none() {
            self.tables[bulb_id] = Some(Self::build_branch(&self.ctx, self.family, bulb_id));
            self.misses += 1;
        } else {
            self.hits += 1;
        }
    }

    /// Colorful counts of one chandelier for all roots, using cached branch
    /// tables. Branches fold in bulb-id order.
    pub fn chandelier_counts(&mut self, chandelier: &Chandelier) -> Vec<f64> {
        for &id in chandelier.bulb_ids() {
            self.ensure(id);
        }
        let mut partial = self.ctx.leaf.clone();
        for &id in chandelier.bulb_ids() {
            partial = self
                .ctx
                .conv_merge(&partial, self.tables[id].as_ref().unwrap());
        }
        self.ctx.finish(&partial, chandelier.aut())
    }

    /// Same fold without touching the cache: branch tables are rebuilt for
    /// each call. Bit-identical to the cached path.
    pub fn chandelier_counts_uncached(&self, chandelier: &Chandelier) -> Vec<f64> {
        let mut partial = self.ctx.leaf.clone();
        for &id in chandelier.bulb_ids() {
            let branch = Self::build_branch(&self.ctx, self.family, id);
            partial = self.ctx.conv_merge(&partial, &branch);
        }
        self.ctx.finish(&partial, chandelier.aut())
    }
}

/// Coarse flop estimate for one coloring of one side of a family evaluation;
/// used for the pre-start budget check.
pub fn family_flops_per_coloring(family: &ChandelierFamily, n: usize) -> f64 {
    let colors = family.n_edges() + 1;
    let branch = family.k() + family.m();
    let branch_masks = crate::trees::params::binomial_f64(colors, branch);
    let build = family.catalog().len() as f64
        * branch as f64
        * branch_masks
        * n as f64
        * n as f64
        * (branch as f64 / colors as f64);
    let fold = family.size() as f64
        * family.l() as f64
        * branch_masks
        * 2f64.powi(branch as i32)
        * n as f64;
    2.0 * (build + fold)
}
