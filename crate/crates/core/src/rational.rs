//! Exact-rational evaluation of the residual hit-rate expansion.
//!
//! The alternating subset sum is the numerically riskiest formula in the
//! crate, so this module re-evaluates it with no rounding at all: the
//! popularity vector is given as integer weights `w_i` (so `p_i = w_i / W`),
//! every subset mass is an integer, and the result is a `BigRational`.
//! Intended for `N <= 12`; the float path is validated against it.

use crate::error::{Error, Result};
use crate::model::{binomial, ModelParams};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

/// Cap for the exact-rational path.
pub const DEFAULT_RATIONAL_CAP: usize = 12;

/// Exact hit rate for the rational popularity vector `w / sum(w)`.
///
/// Terms are grouped by their integer subset mass before any rational
/// arithmetic happens: the numerator contribution `alpha_m * sq_R` is an
/// integer, so each distinct mass contributes a single small fraction and
/// denominators stay tame.
pub fn hit_rate_residual_rational(weights: &[u64], capacity: usize) -> Result<BigRational> {
    let n = weights.len();
    let params = ModelParams::new(n, capacity)?;
    if n > DEFAULT_RATIONAL_CAP {
        return Err(Error::TooManyItems {
            n_items: n,
            cap: DEFAULT_RATIONAL_CAP,
        });
    }
    for (index, &w) in weights.iter().enumerate() {
        if w == 0 {
            return Err(Error::NonPositiveEntry {
                index,
                value: 0.0,
            });
        }
    }
    if params.is_full_capacity() {
        return Ok(BigRational::from_integer(BigInt::from(1)));
    }

    let total: u64 = weights.iter().sum();
    let low = params.residual_order();
    let alphas: Vec<i128> = (low..=n)
        .map(|m| {
            let magnitude = binomial(m - 2, m - low) as i128;
            if (m - low).is_multiple_of(2) {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();

    // numerators[mass] accumulates alpha_m * sum_{i in R} w_i^2 over all
    // subsets R with that integer mass.
    let mut masses = vec![0u64; 1usize << n];
    let mut squares = vec![0u64; 1usize << n];
    let mut numerators = vec![0i128; total as usize + 1];
    for mask in 1..(1usize << n) {
        let low_bit = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        masses[mask] = masses[rest] + weights[low_bit];
        squares[mask] = squares[rest] + weights[low_bit] * weights[low_bit];
        let m = mask.count_ones() as usize;
        if m >= low {
            numerators[masses[mask] as usize] += alphas[m - low] * squares[mask] as i128;
        }
    }

    // H = sum_mass numerators[mass] / (W * mass).
    let mut acc = BigRational::zero();
    let big_total = BigInt::from(total);
    for (mass, &numerator) in numerators.iter().enumerate() {
        if numerator != 0 {
            acc += BigRational::new(BigInt::from(numerator), &big_total * BigInt::from(mass));
        }
    }
    Ok(acc)
}

/// Exact value as `f64`, for comparisons against the float engine.
pub fn hit_rate_residual_rational_f64(weights: &[u64], capacity: usize) -> Result<f64> {
    Ok(hit_rate_residual_rational(weights, capacity)?
        .to_f64()
        .expect("hit rate fits in f64"))
}
