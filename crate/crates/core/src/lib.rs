//! Exact analysis of stationary LRU caches and move-to-front lists under the
//! independent reference model: requests are i.i.d. draws from a fixed
//! popularity vector over `N` items, and a capacity-`C` LRU cache holds the
//! `C` most recently requested ones.
//!
//! Everything the crate computes is exact (finite subset algebra or
//! convergence-checked quadrature), and every formula is cross-checked
//! against an independent route:
//!
//! * [`exact`] — hit rates, per-item occupancies, the search-cost law of the
//!   matching move-to-front list, and cost functionals, via the alternating
//!   residual-subset expansion; plus an `N!`-permutation ground-truth oracle.
//! * [`kernel`] — the pair-square decomposition `H_C = C/N + sum (p_a -
//!   p_b)^2 J_ab`, the strictly positive pair kernels `K_ab`, the radial
//!   derivative of the hit rate along rays from the uniform vector, and the
//!   positivity witness `B_r(y, t)` with its quadrature cross-checks.
//! * [`jacobian`] — occupancy sensitivities `d pi_k / d lambda_i`, the
//!   symmetric positive kernel behind them, and an independent derivative
//!   formula that must (and does) agree with the kernel route.
//! * [`sim`] — seeded stationary-stack sampling and a move-to-front chain
//!   for statistical verification.
//! * [`rational`] — an exact `BigRational` evaluation of the riskiest
//!   alternating sum, used to bound the float engine's rounding error.
//! * [`verify`] — the one-shot property suite behind the CLI `verify`
//!   subcommand.
//!
//! The headline fact the numerics keep confirming: the hit rate is strictly
//! increasing along every nonuniform segment from the uniform vector, even
//! though it is not monotone under general majorization transfers, and the
//! uniform vector is the unique worst case.

pub mod error;
pub mod exact;
pub mod jacobian;
pub mod kernel;
pub mod model;
pub mod quad;
pub mod rational;
pub mod sim;
pub mod subset;
pub mod verify;

pub use error::{Error, Result};
pub use exact::{
    brute_force_hit_rate, expected_cost_functional, hit_rate_residual, occupancy_per_item,
    search_cost_distribution, HitRateMethod, HitRateResult, OccupancyProfile,
    SearchCostDistribution,
};
pub use jacobian::{
    directional_pair_term, master_identity_derivative, occupancy_jacobian, ordering_probability,
    poisson_binomial_pmf, sensitivity_g, MasterDerivativeReport, OccupancyJacobian, RateVector,
    SensitivityKernel,
};
pub use kernel::{
    b_polynomial, hit_rate_pair_square, kernel_split, pair_coeff_j, pair_kernel_k,
    pair_kernel_matrix, phi_psi_quadrature, radial_derivative, KernelSplit, PairKernelMatrix,
    RadialDerivativeReport,
};
pub use model::{ray_point, residual_coefficient, ModelParams, PopularityVector, RayPath};
pub use quad::QuadratureConfig;
pub use sim::{
    estimate_hit_rate_stationary, sample_stationary_stack, simulate_mtf_chain, SimConfig,
    SimResult,
};
pub use verify::{run_verification, PropertyResult, VerifyTier};
