//! Domain types: popularity vectors on the open simplex, model parameters,
//! rays from the uniform vector, and the alternating residual coefficients.
//!
//! A popularity vector is a point of the open probability simplex: every
//! entry strictly positive, entries summing to one. Boundary points are
//! rejected at construction because the subset formulas downstream divide
//! by subset masses, which vanish on the boundary.

use crate::error::{Error, Result};

/// Raw-input sum tolerance: inputs whose entries sum further than this from 1
/// are rejected instead of renormalized.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// Largest item count accepted by the exact binomial helper (the engines cap
/// out far below this).
pub const BINOMIAL_CAP: usize = 63;

/// A request-probability vector on the open simplex.
///
/// Entries are strictly positive and renormalized by their raw sum at
/// construction, so downstream alternating sums always see a vector that
/// sums to one up to a single rounding step.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityVector {
    probs: Vec<f64>,
}

impl PopularityVector {
    /// Validates and renormalizes a raw probability vector.
    ///
    /// Rejects vectors with fewer than two entries, any entry that is zero,
    /// negative, or non-finite, and raw sums further than [`SUM_TOLERANCE`]
    /// from 1.
    pub fn new(raw: &[f64]) -> Result<Self> {
        if raw.len() < 2 {
            return Err(Error::BadLength(raw.len()));
        }
        for (index, &value) in raw.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::NonPositiveEntry { index, value });
            }
        }
        let sum: f64 = raw.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::SumOutOfTolerance {
                sum,
                tolerance: SUM_TOLERANCE,
            });
        }
        Ok(Self {
            probs: raw.iter().map(|v| v / sum).collect(),
        })
    }

    /// The uniform vector `(1/n, ..., 1/n)`.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(&vec![1.0 / n as f64; n.max(1)])
    }

    /// Zipf-like popularity: entry `i` proportional to `(i+1)^-exponent`.
    /// Exponent 0 gives the uniform vector.
    pub fn zipf(n: usize, exponent: f64) -> Result<Self> {
        if exponent.is_nan() || exponent < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "zipf exponent must be nonnegative, got {exponent}"
            )));
        }
        if n < 2 {
            return Err(Error::BadLength(n));
        }
        let weights: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-exponent)).collect();
        let total: f64 = weights.iter().sum();
        // Bypass the sum-tolerance check: the weights are an arbitrary
        // positive vector, normalized here.
        Ok(Self {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// Smallest entry; used for conditioning checks near the simplex boundary.
    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sum of squared entries. This equals the hit rate of a capacity-1 cache.
    pub fn sum_of_squares(&self) -> f64 {
        self.probs.iter().map(|p| p * p).sum()
    }

    /// Maximum absolute deviation from the uniform vector.
    pub fn uniform_distance(&self) -> f64 {
        let u = 1.0 / self.len() as f64;
        self.probs
            .iter()
            .map(|p| (p - u).abs())
            .fold(0.0, f64::max)
    }
}

/// Item count and cache capacity, with the derived residual order
/// `L = N - C + 1` that controls which subset cardinalities enter the
/// alternating expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelParams {
    n_items: usize,
    capacity: usize,
}

impl ModelParams {
    pub fn new(n_items: usize, capacity: usize) -> Result<Self> {
        if n_items < 2 {
            return Err(Error::BadLength(n_items));
        }
        if capacity < 1 || capacity > n_items {
            return Err(Error::BadCapacity { capacity, n_items });
        }
        Ok(Self { n_items, capacity })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// The residual order `L = N - C + 1`. Subsets of cardinality below `L`
    /// drop out of the residual expansion; `2 <= L <= N` whenever `C < N`.
    pub fn residual_order(&self) -> usize {
        self.n_items - self.capacity + 1
    }

    /// True when the cache holds every item, so the hit rate is trivially 1.
    pub fn is_full_capacity(&self) -> bool {
        self.capacity == self.n_items
    }

    /// Errors with [`Error::CapacityFull`] unless `capacity < n_items`.
    pub fn require_partial(&self) -> Result<()> {
        if self.is_full_capacity() {
            Err(Error::CapacityFull {
                capacity: self.capacity,
            })
        } else {
            Ok(())
        }
    }
}

/// The segment `p(theta) = u + theta (q - u)` from the uniform vector to an
/// endpoint `q`, along which the hit rate is strictly increasing.
#[derive(Debug, Clone)]
pub struct RayPath {
    endpoint: PopularityVector,
}

impl RayPath {
    pub fn new(endpoint: PopularityVector) -> Self {
        Self { endpoint }
    }

    pub fn endpoint(&self) -> &PopularityVector {
        &self.endpoint
    }

    /// Evaluates the ray at `theta in [0, 1]`.
    ///
    /// `theta = 0` returns the uniform vector (bit-identical to
    /// [`PopularityVector::uniform`]) and `theta = 1` returns the endpoint
    /// unchanged. Interior points are affine combinations of interior
    /// points, so they always re-validate.
    pub fn at(&self, theta: f64) -> Result<PopularityVector> {
        if !(0.0..=1.0).contains(&theta) || theta.is_nan() {
            return Err(Error::ThetaOutOfRange(theta));
        }
        if theta == 1.0 {
            return Ok(self.endpoint.clone());
        }
        let n = self.endpoint.len();
        let u = 1.0 / n as f64;
        let raw: Vec<f64> = self
            .endpoint
            .probs()
            .iter()
            .map(|&q| u + theta * (q - u))
            .collect();
        PopularityVector::new(&raw)
    }
}

/// Convenience form of [`RayPath::at`].
pub fn ray_point(q: &PopularityVector, theta: f64) -> Result<PopularityVector> {
    RayPath::new(q.clone()).at(theta)
}

/// Exact binomial coefficient `C(n, k)` for `n <= 63`.
///
/// The running product is kept in `u128`; each intermediate division is
/// exact, so the result is the true integer value.
pub fn binomial(n: usize, k: usize) -> u64 {
    assert!(n <= BINOMIAL_CAP, "binomial cap exceeded: n = {n}");
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i as u128 + 1);
    }
    acc as u64
}

/// Signed coefficient of the residual expansion,
/// `alpha_m = (-1)^(m-L) * C(m-2, m-L)`, computed in exact integer
/// arithmetic. Requires `capacity < n_items` and `L <= m <= N`.
pub fn residual_coefficient(m: usize, params: &ModelParams) -> Result<i64> {
    params.require_partial()?;
    let low = params.residual_order();
    let high = params.n_items();
    if m < low || m > high {
        return Err(Error::MOutOfRange { m, low, high });
    }
    let magnitude = binomial(m - 2, m - low) as i64;
    Ok(if (m - low).is_multiple_of(2) {
        magnitude
    } else {
        -magnitude
    })
}
