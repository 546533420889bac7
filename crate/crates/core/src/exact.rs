//! Exact stationary quantities for an LRU cache under independent requests:
//! hit rate, per-item occupancy probabilities, the search-cost distribution
//! of the matching move-to-front list, and tail-sum cost functionals.
//!
//! Everything here rests on the exponential-age representation: attach an
//! independent `Exp(p_i)` age to each item; the stationary cache of capacity
//! `C` holds the `C` items with the smallest ages. The hit rate is the
//! expected popularity mass of that random set, which collapses to a finite
//! alternating sum over item subsets `R` with `|R| >= L = N - C + 1`:
//!
//! ```text
//!   H_C(p) = sum_{m=L..N} alpha_m * sum_{|R|=m} (sum_{i in R} p_i^2) / p_R
//! ```
//!
//! The module also carries an independent ground-truth oracle that walks all
//! `N!` recency orders via the size-biased ordering law; the subset formula
//! is tested against it, never calibrated to it.

use crate::error::{Error, Result};
use crate::model::{binomial, ModelParams, PopularityVector};
use crate::subset::{KahanSum, SubsetTables};
use itertools::Itertools;

/// Default cap on the item count for the `O(2^N)` subset enumerations.
pub const DEFAULT_EXACT_CAP: usize = 20;

/// Cap for the `N!`-permutation oracle.
pub const ORACLE_CAP: usize = 9;

/// Which formula produced a hit-rate value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitRateMethod {
    /// Alternating residual-subset expansion.
    Residual,
    /// Uniform term plus pair-square fluctuation sum.
    PairSquare,
    /// Full permutation enumeration (ground truth, small N only).
    BruteForce,
    /// Popularity-weighted occupancy probabilities.
    PerItem,
}

/// A computed hit rate together with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitRateResult {
    pub value: f64,
    pub capacity: usize,
    pub method: HitRateMethod,
    /// Set when `capacity == n_items`: the value is the trivial constant 1,
    /// returned without touching the subset formulas.
    pub full_capacity: bool,
}

/// Stationary in-cache probability for every item.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyProfile {
    /// `pi[k]` is the probability that item `k` is cached; the entries sum
    /// to the capacity because the cache size is deterministic.
    pub pi: Vec<f64>,
    pub capacity: usize,
}

/// Exact law of the stationary move-to-front search cost `D` on `{1..N}`.
///
/// Index `c` (zero-based) holds `P(D <= c+1)`, which equals the hit rate of
/// a capacity-`c+1` cache; the final entry is exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchCostDistribution {
    pub cdf: Vec<f64>,
    pub pmf: Vec<f64>,
}

impl SearchCostDistribution {
    /// `P(D <= depth)` with `depth` in `1..=N`.
    pub fn cdf_at(&self, depth: usize) -> f64 {
        self.cdf[depth - 1]
    }

    /// Expected search cost `E[D]`.
    pub fn mean(&self) -> f64 {
        let n = self.cdf.len();
        let mut acc = KahanSum::new();
        acc.add(1.0);
        for c in 1..n {
            acc.add(1.0 - self.cdf[c - 1]);
        }
        acc.value()
    }
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::TooManyItems { n_items: n, cap })
    } else {
        Ok(())
    }
}

fn check_dims(p: &PopularityVector, params: &ModelParams) -> Result<()> {
    if p.len() != params.n_items() {
        return Err(Error::LengthMismatch {
            expected: params.n_items(),
            actual: p.len(),
        });
    }
    Ok(())
}

/// Residual sum over prebuilt tables; shared by the per-capacity entry point
/// and the full distribution so both produce bit-identical values.
fn residual_sum_on_tables(tables: &SubsetTables, params: &ModelParams) -> f64 {
    let n = tables.n;
    let low = params.residual_order();
    let alphas: Vec<f64> = (low..=n)
        .map(|m| {
            let magnitude = binomial(m - 2, m - low) as f64;
            if (m - low).is_multiple_of(2) {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();

    let mut acc = KahanSum::new();
    for mask in 1..(1usize << n) {
        let m = mask.count_ones() as usize;
        if m >= low {
            acc.add(alphas[m - low] * tables.sq[mask] / tables.mass[mask]);
        }
    }
    let value = acc.value();
    debug_assert!(
        (-1e-9..=1.0 + 1e-9).contains(&value),
        "residual sum {value} outside [0, 1] beyond cancellation tolerance"
    );
    value.clamp(0.0, 1.0)
}

/// Exact hit rate via the alternating residual-subset expansion.
///
/// `capacity == n_items` short-circuits to the trivial constant 1 (flagged on
/// the result); the subset formula itself is only defined for `C < N`.
pub fn hit_rate_residual(p: &PopularityVector, params: &ModelParams) -> Result<HitRateResult> {
    hit_rate_residual_with_cap(p, params, DEFAULT_EXACT_CAP)
}

/// [`hit_rate_residual`] with an explicit enumeration cap.
pub fn hit_rate_residual_with_cap(
    p: &PopularityVector,
    params: &ModelParams,
    cap: usize,
) -> Result<HitRateResult> {
    check_dims(p, params)?;
    if params.is_full_capacity() {
        return Ok(HitRateResult {
            value: 1.0,
            capacity: params.capacity(),
            method: HitRateMethod::Residual,
            full_capacity: true,
        });
    }
    check_cap(p.len(), cap)?;
    let tables = SubsetTables::build(p.probs());
    Ok(HitRateResult {
        value: residual_sum_on_tables(&tables, params),
        capacity: params.capacity(),
        method: HitRateMethod::Residual,
        full_capacity: false,
    })
}

/// Per-item stationary occupancy probabilities.
///
/// Item `i` contributes `p_i * P(i cached)` to the hit rate, and conditioning
/// on its age gives
///
/// ```text
///   P(i cached) = p_i * sum_{B, |B| <= C-1} (-1)^(C-1-|B|) C(N-2-|B|, C-1-|B|) / (1 - p_B)
/// ```
///
/// with `B` ranging over subsets of the other items. The popularity-weighted
/// sum of the profile reproduces the residual hit rate.
pub fn occupancy_per_item(p: &PopularityVector, params: &ModelParams) -> Result<OccupancyProfile> {
    occupancy_per_item_with_cap(p, params, DEFAULT_EXACT_CAP)
}

/// [`occupancy_per_item`] with an explicit enumeration cap.
pub fn occupancy_per_item_with_cap(
    p: &PopularityVector,
    params: &ModelParams,
    cap: usize,
) -> Result<OccupancyProfile> {
    check_dims(p, params)?;
    let n = params.n_items();
    let c = params.capacity();
    if params.is_full_capacity() {
        return Ok(OccupancyProfile {
            pi: vec![1.0; n],
            capacity: c,
        });
    }
    check_cap(n, cap)?;

    // Coefficient depends only on |B|.
    let coef: Vec<f64> = (0..c)
        .map(|b| {
            let magnitude = binomial(n - 2 - b, c - 1 - b) as f64;
            if (c - 1 - b).is_multiple_of(2) {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();

    let mass = crate::subset::additive_table(p.probs());
    let mut acc = vec![KahanSum::new(); n];
    for (mask, &p_b) in mass.iter().enumerate() {
        let b = mask.count_ones() as usize;
        if b >= c {
            continue;
        }
        let w = coef[b] / (1.0 - p_b);
        for (i, slot) in acc.iter_mut().enumerate() {
            if mask >> i & 1 == 0 {
                slot.add(w);
            }
        }
    }

    let pi: Vec<f64> = p
        .probs()
        .iter()
        .zip(&acc)
        .map(|(&pi_prob, slot)| {
            let value = pi_prob * slot.value();
            debug_assert!((-1e-9..=1.0 + 1e-9).contains(&value));
            value.clamp(0.0, 1.0)
        })
        .collect();
    Ok(OccupancyProfile { pi, capacity: c })
}

/// Hit rate as the popularity-weighted occupancy sum `sum_k p_k pi_k`.
pub fn hit_rate_per_item(p: &PopularityVector, params: &ModelParams) -> Result<HitRateResult> {
    let profile = occupancy_per_item(p, params)?;
    let mut acc = KahanSum::new();
    for (prob, pi) in p.probs().iter().zip(&profile.pi) {
        acc.add(prob * pi);
    }
    Ok(HitRateResult {
        value: acc.value(),
        capacity: params.capacity(),
        method: HitRateMethod::PerItem,
        full_capacity: params.is_full_capacity(),
    })
}

/// Negative-pmf floor: first differences of nearly equal hit rates may dip
/// this far below zero before they are clamped.
const PMF_FLOOR: f64 = -1e-12;

/// Exact search-cost law: cdf entry `c` is the capacity-`c+1` hit rate, the
/// last entry is exactly 1, and the pmf is the first-difference vector.
pub fn search_cost_distribution(p: &PopularityVector) -> Result<SearchCostDistribution> {
    search_cost_distribution_with_cap(p, DEFAULT_EXACT_CAP)
}

/// [`search_cost_distribution`] with an explicit enumeration cap.
pub fn search_cost_distribution_with_cap(
    p: &PopularityVector,
    cap: usize,
) -> Result<SearchCostDistribution> {
    let n = p.len();
    check_cap(n, cap)?;
    let tables = SubsetTables::build(p.probs());
    let mut cdf = Vec::with_capacity(n);
    for capacity in 1..n {
        let params = ModelParams::new(n, capacity)?;
        cdf.push(residual_sum_on_tables(&tables, &params));
    }
    cdf.push(1.0);

    let mut pmf = Vec::with_capacity(n);
    let mut prev = 0.0;
    for &value in &cdf {
        let diff = value - prev;
        debug_assert!(diff >= PMF_FLOOR, "pmf entry {diff} below floor");
        pmf.push(diff.max(0.0));
        prev = value;
    }
    Ok(SearchCostDistribution { cdf, pmf })
}

/// Expected value of a per-depth cost `g` under the stationary search-cost
/// law, via the tail-sum decomposition
/// `E g(D) = g(1) + sum_c (g(c+1) - g(c)) P(D > c)`.
///
/// For nondecreasing `g` every coefficient is nonnegative, so the value
/// inherits the stochastic-order monotonicity of the tails.
pub fn expected_cost_functional(p: &PopularityVector, g: &[f64]) -> Result<f64> {
    let n = p.len();
    if g.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: g.len(),
        });
    }
    let dist = search_cost_distribution(p)?;
    let mut acc = KahanSum::new();
    acc.add(g[0]);
    for c in 1..n {
        acc.add((g[c] - g[c - 1]) * (1.0 - dist.cdf[c - 1]));
    }
    Ok(acc.value())
}

/// Full permutation enumeration of the stationary recency order.
///
/// The exponential-clock order is a size-biased permutation: the next item is
/// drawn from the remaining ones with probability proportional to its rate.
/// Walking all `N!` orders gives ground-truth hit rate and occupancies with
/// no subset algebra involved, which is exactly what makes it a useful
/// oracle for the residual expansion.
fn brute_force_stationary(p: &PopularityVector, capacity: usize) -> (f64, Vec<f64>) {
    let n = p.len();
    let probs = p.probs();
    let mut hit = KahanSum::new();
    let mut pi = vec![KahanSum::new(); n];
    for perm in (0..n).permutations(n) {
        let mut remaining: f64 = probs.iter().sum();
        let mut order_prob = 1.0;
        for &item in &perm {
            order_prob *= probs[item] / remaining;
            remaining -= probs[item];
        }
        let cached_mass: f64 = perm[..capacity].iter().map(|&i| probs[i]).sum();
        hit.add(order_prob * cached_mass);
        for &item in &perm[..capacity] {
            pi[item].add(order_prob);
        }
    }
    (hit.value(), pi.iter().map(KahanSum::value).collect())
}

/// Ground-truth hit rate by enumerating all `N!` recency orders (`N <= 9`).
pub fn brute_force_hit_rate(p: &PopularityVector, params: &ModelParams) -> Result<HitRateResult> {
    check_dims(p, params)?;
    let n = params.n_items();
    if n > ORACLE_CAP {
        return Err(Error::TooManyItemsForOracle {
            n_items: n,
            cap: ORACLE_CAP,
        });
    }
    let (value, _) = brute_force_stationary(p, params.capacity());
    Ok(HitRateResult {
        value,
        capacity: params.capacity(),
        method: HitRateMethod::BruteForce,
        full_capacity: params.is_full_capacity(),
    })
}

/// Ground-truth occupancy profile from the same permutation walk.
pub fn brute_force_occupancy(
    p: &PopularityVector,
    params: &ModelParams,
) -> Result<OccupancyProfile> {
    check_dims(p, params)?;
    let n = params.n_items();
    if n > ORACLE_CAP {
        return Err(Error::TooManyItemsForOracle {
            n_items: n,
            cap: ORACLE_CAP,
        });
    }
    let (_, pi) = brute_force_stationary(p, params.capacity());
    Ok(OccupancyProfile {
        pi,
        capacity: params.capacity(),
    })
}
