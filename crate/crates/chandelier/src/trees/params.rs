//! Parameter recipe: turns `(n, q, rho, epsilon)` into integer chandelier
//! parameters, reports the expected diagonal score, and checks the general
//! feasibility clauses (which are expected to fail at desk scale; they hold
//! asymptotically for large `n`).

use super::catalog::build_catalog;
use super::chandelier::binomial_u128;
use crate::error::{Error, Result};

/// Growth constant of unlabeled tree counts (`alpha`), to the precision the
/// recipe needs.
pub const OTTER_ALPHA: f64 = 0.338_321_856_9;

/// Recipe constants. The theory guarantees existence of suitable absolute
/// constants without giving values; these defaults keep `K` in 2..=5 for
/// desk-scale `n`.
#[derive(Debug, Clone, Copy)]
pub struct RecipeConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl Default for RecipeConstants {
    fn default() -> Self {
        RecipeConstants {
            c1: 2.0,
            c2: 1.0,
            c3: 1.0,
            c4: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClauseCheck {
    pub name: &'static str,
    pub satisfied: bool,
    pub detail: String,
}

/// Output of the recipe: integer parameters, the derived scalars, and the
/// feasibility report.
#[derive(Debug, Clone)]
pub struct ParamChoice {
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub r_cap: u128,
    pub n_edges: usize,
    pub catalog_size: usize,
    /// Fraction `|J(K,R)| / |J(K)|` retained by the automorphism cap.
    pub catalog_fraction: f64,
    pub family_size: f64,
    pub mu: f64,
    /// Advisory: whether `rho^2 >= alpha + epsilon`.
    pub rho_above_threshold: bool,
    pub clauses: Vec<ClauseCheck>,
    pub feasible: bool,
    pub first_violated: Option<&'static str>,
}

/// Expected diagonal score
/// `mu = |T| (rho sigma^2)^N (n-1)! / (n-N-1)!` with `sigma^2 = q(1-q)`.
///
/// Returns 0 when the host is too small to contain any copy (`n < N+1`).
/// Rejects `rho < 0` with odd `N`, where the mean goes negative and cannot
/// serve as a threshold base.
pub fn mean_diagonal_score(
    family_size: f64,
    n_edges: usize,
    n: usize,
    q: f64,
    rho: f64,
) -> Result<f64> {
    if rho < 0.0 && n_edges % 2 == 1 {
        return Err(Error::ParamOutOfRange(format!(
            "rho = {rho} < 0 with odd N = {n_edges}: mean score is negative; use an even N"
        )));
    }
    if n < n_edges + 1 {
        return Ok(0.0);
    }
    let sigma2 = q * (1.0 - q);
    let mut falling = 1.0;
    for i in (n - n_edges)..n {
        falling *= i as f64;
    }
    Ok(family_size * (rho * sigma2).powi(n_edges as i32) * falling)
}

/// Rounds the asymptotic recipe
/// `L = C1/eps, K = C2 log n, M = C3 K / log(nq), R = exp(C4 K)`
/// to integers, bumps `M` if needed so `N = (K+M)L` is even, and evaluates
/// the general feasibility clauses with unit constants.
pub fn select_parameters(
    n: usize,
    q: f64,
    rho: f64,
    epsilon: f64,
    constants: RecipeConstants,
) -> Result<ParamChoice> {
    if n < 2 {
        return Err(Error::ParamOutOfRange(format!("n = {n}, need n >= 2")));
    }
    if epsilon <= 0.0 {
        return Err(Error::ParamOutOfRange("epsilon must be positive".into()));
    }
    let nq = n as f64 * q;
    if nq <= 1.0 {
        return Err(Error::ParamOutOfRange(format!(
            "nq = {nq}, the recipe needs nq > 1 (M scales by 1/log(nq))"
        )));
    }
    let log_n = (n as f64).ln();
    let log_nq = nq.ln();

    let l = ((constants.c1 / epsilon).round() as usize).max(1);
    let k = ((constants.c2 * log_n).round() as usize).max(1);
    let mut m = ((constants.c3 * k as f64 / log_nq).round() as usize).max(1);
    // Parity fix: if N is odd, K+M and L are both odd; one extra wire edge
    // makes K+M even.
    if (k + m) * l % 2 == 1 {
        m += 1;
    }
    let n_edges = (k + m) * l;
    let r_real = (constants.c4 * k as f64).exp();
    let r_cap = if r_real >= u128::MAX as f64 {
        u128::MAX
    } else {
        (r_real.ceil() as u128).max(1)
    };

    let catalog = build_catalog(k, Some(r_cap))?;
    let full = build_catalog(k, None)?;
    let catalog_fraction = if full.is_empty() {
        0.0
    } else {
        catalog.len() as f64 / full.len() as f64
    };
    let family_size = binomial_f64(catalog.len(), l);
    let mu = mean_diagonal_score(family_size, n_edges, n, q, rho)?;

    let rho2 = rho * rho;
    let rho_above_threshold = rho2 >= OTTER_ALPHA + epsilon;

    // General clauses, unit constants. `log` is natural throughout.
    let mut clauses = Vec::new();
    let loglog_n = log_n.ln();
    clauses.push(ClauseCheck {
        name: "L <= log n / log log n",
        satisfied: loglog_n > 0.0 && (l as f64) <= log_n / loglog_n,
        detail: format!("L = {l}, bound = {:.3}", log_n / loglog_n),
    });
    clauses.push(ClauseCheck {
        name: "L <= sqrt(nq)",
        satisfied: (l as f64) <= nq.sqrt(),
        detail: format!("L = {l}, sqrt(nq) = {:.3}", nq.sqrt()),
    });
    clauses.push(ClauseCheck {
        name: "M/K >= 1/log(nq)",
        satisfied: m as f64 / k as f64 >= 1.0 / log_nq,
        detail: format!(
            "M/K = {:.3}, 1/log(nq) = {:.3}",
            m as f64 / k as f64,
            1.0 / log_nq
        ),
    });
    let ratio_upper = if rho2 <= OTTER_ALPHA {
        f64::NEG_INFINITY
    } else if rho2 >= 1.0 {
        f64::INFINITY
    } else {
        (rho2 / OTTER_ALPHA).ln() / (2.0 * (1.0 / rho2).ln())
    };
    clauses.push(ClauseCheck {
        name: "M/K <= log(rho^2/alpha) / (2 log(1/rho^2))",
        satisfied: m as f64 / k as f64 <= ratio_upper,
        detail: format!("M/K = {:.3}, bound = {ratio_upper:.3}", m as f64 / k as f64),
    });
    let kl_lower = if rho2 > OTTER_ALPHA {
        log_n / (rho2 / OTTER_ALPHA).ln()
    } else {
        f64::INFINITY
    };
    clauses.push(ClauseCheck {
        name: "K L >= log n / log(rho^2/alpha)",
        satisfied: (k * l) as f64 >= kl_lower,
        detail: format!("K L = {}, bound = {kl_lower:.3}", k * l),
    });
    clauses.push(ClauseCheck {
        name: "K + M <= log n",
        satisfied: ((k + m) as f64) <= log_n,
        detail: format!("K + M = {}, log n = {log_n:.3}", k + m),
    });

    let feasible = clauses.iter().all(|c| c.satisfied);
    let first_violated = clauses.iter().find(|c| !c.satisfied).map(|c| c.name);
    Ok(ParamChoice {
        k,
        l,
        m,
        r_cap,
        n_edges,
        catalog_size: catalog.len(),
        catalog_fraction,
        family_size,
        mu,
        rho_above_threshold,
        clauses,
        feasible,
        first_violated,
    })
}

pub(crate) fn binomial_f64(n: usize, k: usize) -> f64 {
    if let Some(v) = binomial_u128(n, k) {
        if v < (1u128 << 100) {
            return v as f64;
        }
    }
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc *= (n - i) as f64 / (i + 1) as f64;
    }
    acc
}
