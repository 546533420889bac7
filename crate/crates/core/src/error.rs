//! Crate-wide error type.

/// Errors produced by the model constructors and the analysis engines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A popularity or rate vector with fewer than two entries.
    #[error("need at least 2 items, got {0}")]
    BadLength(usize),

    /// A zero or negative probability/rate. The engines work on the open
    /// simplex; boundary points are rejected at construction.
    #[error("entry {index} is {value}; every entry must be strictly positive")]
    NonPositiveEntry { index: usize, value: f64 },

    /// Probabilities whose raw sum deviates from 1 by more than the
    /// construction tolerance.
    #[error("entries sum to {sum}; must be within {tolerance} of 1")]
    SumOutOfTolerance { sum: f64, tolerance: f64 },

    /// Capacity outside `1..=n_items`.
    #[error("capacity {capacity} out of range for {n_items} items")]
    BadCapacity { capacity: usize, n_items: usize },

    /// Capacity equal to the item count, where a subset formula that
    /// requires `capacity < n_items` was requested.
    #[error("capacity {capacity} fills the cache; this formula requires capacity < n_items")]
    CapacityFull { capacity: usize },

    /// Ray parameter outside `[0, 1]`.
    #[error("theta {0} outside [0, 1]")]
    ThetaOutOfRange(f64),

    /// Subset cardinality outside the residual range `L..=N`.
    #[error("cardinality {m} outside [{low}, {high}]")]
    MOutOfRange { m: usize, low: usize, high: usize },

    /// Item count above the subset-enumeration cap.
    #[error("{n_items} items exceeds the engine cap {cap}")]
    TooManyItems { n_items: usize, cap: usize },

    /// Item count above the N!-permutation oracle cap.
    #[error("{n_items} items exceeds the permutation oracle cap {cap}")]
    TooManyItemsForOracle { n_items: usize, cap: usize },

    /// Pair indices that are out of bounds, equal, or unordered.
    #[error("invalid pair ({a}, {b}) for {n_items} items")]
    BadPair { a: usize, b: usize, n_items: usize },

    /// Derivative rank outside `0..=|T|`.
    #[error("rank {r} outside [0, {max}]")]
    RankOutOfRange { r: usize, max: usize },

    /// A pair kernel evaluated to a non-positive value. The kernels are
    /// provably positive, so this signals an implementation bug, not bad
    /// input.
    #[error("pair kernel K[{a}][{b}] = {value} is not strictly positive (internal error)")]
    NonPositiveKernel { a: usize, b: usize, value: f64 },

    /// Successive quadrature refinements failed to settle.
    #[error("quadrature did not converge: last refinement changed by {delta} (tolerance {tolerance})")]
    QuadratureNotConverged { delta: f64, tolerance: f64 },

    /// A Bernoulli success probability outside `[0, 1]`.
    #[error("success probability {value} at index {index} outside [0, 1]")]
    ProbOutOfRange { index: usize, value: f64 },

    /// A claimed permutation that does not visit every index exactly once.
    #[error("not a permutation of 0..{n}")]
    NotAPermutation { n: usize },

    /// A vector argument whose length does not match the model size.
    #[error("expected {expected} entries, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// A configuration value outside its documented domain.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
