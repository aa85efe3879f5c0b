//! Numerically stable hypergeometric probability mass function.
//!
//! The hypergeometric distribution models the number of marked items
//! seen when drawing without replacement: a population of `N` items
//! contains `K` marked ones, `n` are drawn, and
//!
//! ```text
//! P(X = k) = C(K, k) * C(N - K, n - k) / C(N, n)
//! ```
//!
//! Small populations are evaluated exactly in 128-bit integers; large
//! ones go through compensated log-space sums so the pmf stays accurate
//! for populations in the millions.

use crate::error::{Error, Result};
use crate::numeric::Compensated;

/// Largest `n` for which the iterative `C(n, k)` computation cannot
/// overflow a `u128` (the running value times the next factor stays
/// below 2^128 for all k).
const EXACT_MAX_N: u64 = 124;

/// Validated parameter triple (population, successes, draws).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HypergeomParams {
    population: u64,
    successes: u64,
    draws: u64,
}

impl HypergeomParams {
    /// Requires `successes <= population` and `draws <= population`.
    pub fn new(population: u64, successes: u64, draws: u64) -> Result<Self> {
        if successes > population {
            return Err(Error::Domain(format!(
                "hypergeometric successes {successes} exceed population {population}"
            )));
        }
        if draws > population {
            return Err(Error::Domain(format!(
                "hypergeometric draws {draws} exceed population {population}"
            )));
        }
        Ok(Self {
            population,
            successes,
            draws,
        })
    }

    pub fn population(&self) -> u64 {
        self.population
    }

    pub fn successes(&self) -> u64 {
        self.successes
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Inclusive support bounds `[max(0, n - (N - K)), min(n, K)]`.
    pub fn support(&self) -> (u64, u64) {
        let lo = self
            .draws
            .saturating_sub(self.population - self.successes);
        let hi = self.draws.min(self.successes);
        (lo, hi)
    }
}

/// `C(n, k)` as an exact 128-bit integer. Caller guarantees
/// `k <= n <= EXACT_MAX_N`.
fn binomial_exact(n: u64, k: u64) -> u128 {
    debug_assert!(k <= n && n <= EXACT_MAX_N);
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        // Exact at every step: acc holds C(n - k + i - 1, i - 1), and
        // C(n - k + i, i) = acc * (n - k + i) / i divides evenly.
        acc = acc * (n - k + i) as u128 / i as u128;
    }
    acc
}

/// `ln C(n, k)` for large `n` via a compensated sum of ratio logs.
fn log_binomial_large(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    let mut acc = Compensated::new();
    for i in 1..=k {
        acc.add((((n - k + i) as f64) / (i as f64)).ln());
    }
    acc.value()
}

/// Natural log of the binomial coefficient `C(n, k)`.
///
/// Exact-integer evaluation for `n <= 124`, compensated log sums above
/// that. Cost is `O(min(k, n - k))` in the large regime.
pub fn log_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::Domain(format!(
            "log_binomial: k = {k} exceeds n = {n}"
        )));
    }
    if n <= EXACT_MAX_N {
        Ok((binomial_exact(n, k) as f64).ln())
    } else {
        Ok(log_binomial_large(n, k))
    }
}

/// Hypergeometric pmf at `k`. Returns exactly `0.0` outside the support
/// so callers may iterate over any candidate range unconditionally.
pub fn hypergeom_pmf(params: &HypergeomParams, k: u64) -> f64 {
    // Successes and draws play interchangeable roles; canonicalising the
    // order makes the symmetry exact in floating point as well.
    let (successes, draws) = if params.successes <= params.draws {
        (params.successes, params.draws)
    } else {
        (params.draws, params.successes)
    };
    let canonical = HypergeomParams {
        population: params.population,
        successes,
        draws,
    };
    let (lo, hi) = canonical.support();
    if k < lo || k > hi {
        return 0.0;
    }
    if canonical.population <= EXACT_MAX_N {
        pmf_exact(&canonical, k)
    } else {
        pmf_log(&canonical, k).exp().min(1.0)
    }
}

fn pmf_exact(p: &HypergeomParams, k: u64) -> f64 {
    let a = binomial_exact(p.successes, k) as f64;
    let b = binomial_exact(p.population - p.successes, p.draws - k) as f64;
    let c = binomial_exact(p.population, p.draws) as f64;
    a * b / c
}

/// Log pmf arranged so every partial sum stays small near the mode:
///
/// ```text
/// pmf = C(n, k) * prod_{j<k} (K - j)/(N - j)
///              * prod_{i<n-k} (N - K - i)/(N - k - i)
/// ```
fn pmf_log(p: &HypergeomParams, k: u64) -> f64 {
    let n_pop = p.population;
    let k_succ = p.successes;
    let draws = p.draws;
    let mut acc = Compensated::new();
    if draws <= EXACT_MAX_N {
        acc.add((binomial_exact(draws, k) as f64).ln());
    } else {
        acc.add(log_binomial_large(draws, k));
    }
    for j in 0..k {
        acc.add((((k_succ - j) as f64) / ((n_pop - j) as f64)).ln());
    }
    for i in 0..(draws - k) {
        acc.add((((n_pop - k_succ - i) as f64) / ((n_pop - k - i) as f64)).ln());
    }
    acc.value()
}
