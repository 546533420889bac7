//! Occupancy sensitivities: how the per-item cache probabilities respond to
//! rate perturbations, and a second, independent formula for the radial
//! derivative built from them.
//!
//! With independent `Exp(lambda_i)` ages, the occupancy map `pi_k(lambda)`
//! is homogeneous of degree zero and satisfies, for `i != k`,
//!
//! ```text
//!   d pi_k / d lambda_i = -lambda_k * G_ik,
//!   G_ik = int_0^inf t e^{-(lambda_i+lambda_k) t} P(M_ik(t) = C-1) dt,
//! ```
//!
//! where `M_ik(t)` counts the other items with age below `t` (a
//! Poisson-binomial variable). `G` is symmetric and strictly positive, the
//! Jacobian rows sum to zero, and along a ray from the uniform vector the
//! sensitivity part of the chain rule collapses to a positive square:
//!
//! ```text
//!   H'(theta) = (H_C - C/N)/theta
//!             + (1/(N theta)) sum_{i<k} G_ik (lambda_i - lambda_k)^2.
//! ```
//!
//! Off the ray the same expression carries the minor
//! `lambda_k d_i - lambda_i d_k`, which has no fixed sign; that is why the
//! monotonicity is radial and not a majorization statement.

use crate::error::{Error, Result};
use crate::exact::occupancy_per_item;
use crate::model::{ModelParams, PopularityVector, RayPath};
use crate::quad::{integrate_t_exp_weighted, QuadratureConfig};
use crate::subset::KahanSum;

/// Default cap for Jacobian assembly (quadrature per pair, Poisson-binomial
/// recurrence per node).
pub const DEFAULT_JACOBIAN_CAP: usize = 12;

/// A vector of strictly positive exponential rates. No normalization is
/// required or performed: occupancies are scale-invariant in the rates.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector {
    rates: Vec<f64>,
}

impl RateVector {
    pub fn new(rates: &[f64]) -> Result<Self> {
        if rates.len() < 2 {
            return Err(Error::BadLength(rates.len()));
        }
        for (index, &value) in rates.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::NonPositiveEntry { index, value });
            }
        }
        Ok(Self {
            rates: rates.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn get(&self, i: usize) -> f64 {
        self.rates[i]
    }

    /// The simplex point with the same ratios. Occupancies computed there
    /// equal occupancies at the raw rates by degree-zero homogeneity.
    pub fn normalized(&self) -> PopularityVector {
        let total: f64 = self.rates.iter().sum();
        let probs: Vec<f64> = self.rates.iter().map(|&r| r / total).collect();
        PopularityVector::new(&probs).expect("positive rates normalize to the open simplex")
    }
}

impl From<&PopularityVector> for RateVector {
    fn from(p: &PopularityVector) -> Self {
        Self {
            rates: p.probs().to_vec(),
        }
    }
}

/// Symmetric positive sensitivity kernel `G_ik` (diagonal unused, stored as
/// zero).
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityKernel {
    n: usize,
    g: Vec<f64>,
}

impl SensitivityKernel {
    pub fn n_items(&self) -> usize {
        self.n
    }

    pub fn g(&self, i: usize, k: usize) -> f64 {
        self.g[i * self.n + k]
    }
}

/// The occupancy Jacobian `d pi_k / d lambda_i` together with the kernel it
/// was assembled from.
#[derive(Debug, Clone)]
pub struct OccupancyJacobian {
    n: usize,
    entries: Vec<f64>,
    pub kernel: SensitivityKernel,
}

impl OccupancyJacobian {
    pub fn n_items(&self) -> usize {
        self.n
    }

    /// `d pi_k / d lambda_i`.
    pub fn entry(&self, i: usize, k: usize) -> f64 {
        self.entries[i * self.n + k]
    }

    /// Sums over `k` for each `i`; all zero up to quadrature error because
    /// the occupancies always add up to the capacity.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let mut acc = KahanSum::new();
                for k in 0..self.n {
                    acc.add(self.entry(i, k));
                }
                acc.value()
            })
            .collect()
    }
}

/// Radial derivative assembled from the occupancy Jacobian: the uniform-gap
/// term plus the positive sensitivity square.
#[derive(Debug, Clone)]
pub struct MasterDerivativeReport {
    pub theta: f64,
    /// `(H_C(lambda(theta)) - C/N) / theta`, nonnegative.
    pub t1: f64,
    /// `(1/(N theta)) sum_{i<k} G_ik (lambda_i - lambda_k)^2`, positive off
    /// the uniform vector.
    pub t2: f64,
    /// `t1 + t2`; must agree with the pair-kernel radial derivative.
    pub derivative: f64,
    pub kernel: SensitivityKernel,
}

/// Probability that exactly `m` of independent Bernoulli trials with the
/// given success probabilities fire, by the standard forward recurrence in
/// O(n * m).
pub fn poisson_binomial_pmf(success_probs: &[f64], m: usize) -> Result<f64> {
    let n = success_probs.len();
    if m > n {
        return Err(Error::MOutOfRange { m, low: 0, high: n });
    }
    for (index, &value) in success_probs.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) || value.is_nan() {
            return Err(Error::ProbOutOfRange { index, value });
        }
    }
    // dp[j] = P(j successes among the trials seen so far), truncated at m.
    let mut dp = vec![0.0; m + 1];
    dp[0] = 1.0;
    for (seen, &q) in success_probs.iter().enumerate() {
        let top = m.min(seen + 1);
        for j in (1..=top).rev() {
            dp[j] = dp[j] * (1.0 - q) + dp[j - 1] * q;
        }
        dp[0] *= 1.0 - q;
    }
    Ok(dp[m])
}

fn check_rate_inputs(lambda: &RateVector, params: &ModelParams, cap: usize) -> Result<()> {
    if lambda.len() != params.n_items() {
        return Err(Error::LengthMismatch {
            expected: params.n_items(),
            actual: lambda.len(),
        });
    }
    params.require_partial()?;
    if lambda.len() > cap {
        return Err(Error::TooManyItems {
            n_items: lambda.len(),
            cap,
        });
    }
    Ok(())
}

/// Sensitivity kernel entry `G_ik` by quadrature against the weight
/// `t e^{-(lambda_i+lambda_k) t}`, with the Poisson-binomial mass rebuilt at
/// every node. The pair is canonicalized first, so `G_ik` and `G_ki` are the
/// same evaluation, bit for bit.
pub fn sensitivity_g(
    lambda: &RateVector,
    params: &ModelParams,
    i: usize,
    k: usize,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let n = params.n_items();
    if i == k || i >= n || k >= n {
        return Err(Error::BadPair {
            a: i,
            b: k,
            n_items: n,
        });
    }
    check_rate_inputs(lambda, params, DEFAULT_JACOBIAN_CAP)?;
    quad.validate()?;
    let (a, b) = (i.min(k), i.max(k));
    let s = lambda.get(a) + lambda.get(b);
    let others: Vec<f64> = (0..n)
        .filter(|&j| j != a && j != b)
        .map(|j| lambda.get(j))
        .collect();
    let target = params.capacity() - 1;
    integrate_t_exp_weighted(s, quad, |t| {
        let alive: Vec<f64> = others.iter().map(|&l| 1.0 - (-l * t).exp()).collect();
        poisson_binomial_pmf(&alive, target).expect("probabilities stay in [0, 1]")
    })
}

/// Full symmetric kernel, one quadrature per unordered pair.
pub fn sensitivity_kernel(
    lambda: &RateVector,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<SensitivityKernel> {
    check_rate_inputs(lambda, params, DEFAULT_JACOBIAN_CAP)?;
    let n = params.n_items();
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for k in (i + 1)..n {
            let value = sensitivity_g(lambda, params, i, k, quad)?;
            g[i * n + k] = value;
            g[k * n + i] = value;
        }
    }
    Ok(SensitivityKernel { n, g })
}

/// The occupancy Jacobian: off-diagonal `-lambda_k G_ik`, diagonal
/// `sum_{k != i} lambda_k G_ik`, so each row sums to zero by construction.
pub fn occupancy_jacobian(
    lambda: &RateVector,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<OccupancyJacobian> {
    occupancy_jacobian_with_cap(lambda, params, quad, DEFAULT_JACOBIAN_CAP)
}

/// [`occupancy_jacobian`] with an explicit cap.
pub fn occupancy_jacobian_with_cap(
    lambda: &RateVector,
    params: &ModelParams,
    quad: &QuadratureConfig,
    cap: usize,
) -> Result<OccupancyJacobian> {
    check_rate_inputs(lambda, params, cap)?;
    let kernel = sensitivity_kernel(lambda, params, quad)?;
    let n = kernel.n;
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        let mut diagonal = KahanSum::new();
        for k in 0..n {
            if k != i {
                let off = lambda.get(k) * kernel.g(i, k);
                entries[i * n + k] = -off;
                diagonal.add(off);
            }
        }
        entries[i * n + i] = diagonal.value();
    }
    Ok(OccupancyJacobian { n, entries, kernel })
}

/// Probability of one full recency order under the size-biased ordering law:
/// `prod_r lambda_{sigma_r} / (remaining rate mass at step r)`.
pub fn ordering_probability(lambda: &RateVector, sigma: &[usize]) -> Result<f64> {
    let n = lambda.len();
    if sigma.len() != n {
        return Err(Error::NotAPermutation { n });
    }
    let mut seen = vec![false; n];
    for &s in sigma {
        if s >= n || seen[s] {
            return Err(Error::NotAPermutation { n });
        }
        seen[s] = true;
    }
    let mut remaining: f64 = lambda.rates().iter().sum();
    let mut prob = 1.0;
    for &s in sigma {
        prob *= lambda.get(s) / remaining;
        remaining -= lambda.get(s);
    }
    Ok(prob)
}

/// Occupancies at raw rates, through normalization and degree-zero
/// homogeneity. This reuses the exact subset engine instead of introducing a
/// second integral path.
pub fn occupancy_at_rates(lambda: &RateVector, params: &ModelParams) -> Result<Vec<f64>> {
    if lambda.len() != params.n_items() {
        return Err(Error::LengthMismatch {
            expected: params.n_items(),
            actual: lambda.len(),
        });
    }
    Ok(occupancy_per_item(&lambda.normalized(), params)?.pi)
}

/// Radial derivative from the occupancy Jacobian route:
/// `T1 = (H_C(p(theta)) - C/N)/theta` plus
/// `T2 = (1/(N theta)) sum_{i<k} G_ik (lambda_i - lambda_k)^2`.
///
/// Independent of the pair-kernel formula (different integrals, different
/// subset algebra), so agreement between the two derivatives checks both.
pub fn master_identity_derivative(
    q: &PopularityVector,
    theta: f64,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<MasterDerivativeReport> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::ThetaOutOfRange(theta));
    }
    let point = RayPath::new(q.clone()).at(theta)?;
    let lambda = RateVector::from(&point);
    check_rate_inputs(&lambda, params, DEFAULT_JACOBIAN_CAP)?;

    let n = params.n_items() as f64;
    let hit = crate::exact::hit_rate_residual(&point, params)?;
    let t1 = (hit.value - params.capacity() as f64 / n) / theta;

    let kernel = sensitivity_kernel(&lambda, params, quad)?;
    let mut acc = KahanSum::new();
    for i in 0..params.n_items() {
        for k in (i + 1)..params.n_items() {
            let diff = lambda.get(i) - lambda.get(k);
            acc.add(kernel.g(i, k) * diff * diff);
        }
    }
    let t2 = acc.value() / (n * theta);
    Ok(MasterDerivativeReport {
        theta,
        t1,
        t2,
        derivative: t1 + t2,
        kernel,
    })
}

/// The sensitivity part of a directional derivative in an arbitrary tangent
/// direction: `sum_{i<k} G_ik (lambda_i - lambda_k)(lambda_k delta_i -
/// lambda_i delta_k)`.
///
/// Along rays from the uniform vector the minor collapses to a positive
/// square, but in general it has no fixed sign; searching for a negative
/// value of this form shows why the radial monotonicity cannot be
/// strengthened to majorization monotonicity.
pub fn directional_pair_term(
    lambda: &RateVector,
    delta: &[f64],
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<f64> {
    if delta.len() != lambda.len() {
        return Err(Error::LengthMismatch {
            expected: lambda.len(),
            actual: delta.len(),
        });
    }
    let kernel = sensitivity_kernel(lambda, params, quad)?;
    let mut acc = KahanSum::new();
    for i in 0..lambda.len() {
        for k in (i + 1)..lambda.len() {
            let gap = lambda.get(i) - lambda.get(k);
            let minor = lambda.get(k) * delta[i] - lambda.get(i) * delta[k];
            acc.add(kernel.g(i, k) * gap * minor);
        }
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::radial_derivative;
    use approx::assert_abs_diff_eq;
    use itertools::Itertools;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pv(raw: &[f64]) -> PopularityVector {
        PopularityVector::new(raw).unwrap()
    }

    fn random_interior(rng: &mut impl Rng, n: usize) -> PopularityVector {
        let raw: Vec<f64> = (0..n).map(|_| (-(1.0 - rng.random::<f64>()).ln()).max(1e-12)).collect();
        let total: f64 = raw.iter().sum();
        pv(&raw.iter().map(|w| w / total).collect::<Vec<_>>())
    }

    // ------------------------------------------------------------------
    // Poisson binomial
    // ------------------------------------------------------------------

    #[test]
    fn poisson_binomial_small_cases() {
        assert_abs_diff_eq!(
            poisson_binomial_pmf(&[0.5, 0.5], 1).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(poisson_binomial_pmf(&[0.0, 0.0], 0).unwrap(), 1.0, epsilon = 1e-15);
        // Enumerating all 8 outcomes of (0.2, 0.3, 0.5) with two successes.
        assert_abs_diff_eq!(
            poisson_binomial_pmf(&[0.2, 0.3, 0.5], 2).unwrap(),
            0.22,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(poisson_binomial_pmf(&[], 0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn poisson_binomial_input_checks() {
        assert!(matches!(
            poisson_binomial_pmf(&[0.5], 2),
            Err(Error::MOutOfRange { .. })
        ));
        assert!(matches!(
            poisson_binomial_pmf(&[1.5], 0),
            Err(Error::ProbOutOfRange { .. })
        ));
    }

    #[test]
    fn poisson_binomial_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..20 {
            let n = rng.random_range(1..=8);
            let probs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            for m in 0..=n {
                let mut direct = 0.0;
                for mask in 0..(1usize << n) {
                    if mask.count_ones() as usize != m {
                        continue;
                    }
                    let mut term = 1.0;
                    for (j, &q) in probs.iter().enumerate() {
                        term *= if mask >> j & 1 == 1 { q } else { 1.0 - q };
                    }
                    direct += term;
                }
                let dp = poisson_binomial_pmf(&probs, m).unwrap();
                assert_abs_diff_eq!(dp, direct, epsilon = 1e-12);
            }
        }
    }

    // ------------------------------------------------------------------
    // Sensitivity kernel
    // ------------------------------------------------------------------

    #[test]
    fn two_item_kernel_closed_form() {
        // With no third item, M is identically zero, so
        // G = int t e^{-(l1+l2) t} dt = 1/(l1+l2)^2.
        let quad = QuadratureConfig::default();
        let params = ModelParams::new(2, 1).unwrap();
        let lambda = RateVector::new(&[1.0, 1.0]).unwrap();
        let g = sensitivity_g(&lambda, &params, 0, 1, &quad).unwrap();
        assert_abs_diff_eq!(g, 0.25, epsilon = 1e-10);

        let lambda = RateVector::new(&[0.4, 1.6]).unwrap();
        let g = sensitivity_g(&lambda, &params, 0, 1, &quad).unwrap();
        assert_abs_diff_eq!(g, 0.25, epsilon = 1e-10);
    }

    #[test]
    fn kernel_is_symmetric_and_positive() {
        let quad = QuadratureConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for _ in 0..10 {
            let n = rng.random_range(2..=6);
            let c = rng.random_range(1..n);
            let params = ModelParams::new(n, c).unwrap();
            let rates: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let lambda = RateVector::new(&rates).unwrap();
            let kernel = sensitivity_kernel(&lambda, &params, &quad).unwrap();
            for i in 0..n {
                for k in 0..n {
                    if i != k {
                        assert!(kernel.g(i, k) > 0.0);
                        assert_eq!(kernel.g(i, k), kernel.g(k, i));
                    }
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // Jacobian
    // ------------------------------------------------------------------

    #[test]
    fn two_item_jacobian_closed_form() {
        let quad = QuadratureConfig::default();
        let params = ModelParams::new(2, 1).unwrap();
        let lambda = RateVector::new(&[1.0, 1.0]).unwrap();
        let jac = occupancy_jacobian(&lambda, &params, &quad).unwrap();
        assert_abs_diff_eq!(jac.entry(0, 1), -0.25, epsilon = 1e-10);
        assert_abs_diff_eq!(jac.entry(0, 0), 0.25, epsilon = 1e-10);
    }

    #[test]
    fn jacobian_structure() {
        let quad = QuadratureConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..8 {
            let n = rng.random_range(2..=6);
            let c = rng.random_range(1..n);
            let params = ModelParams::new(n, c).unwrap();
            let rates: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let lambda = RateVector::new(&rates).unwrap();
            let jac = occupancy_jacobian(&lambda, &params, &quad).unwrap();
            for sum in jac.row_sums() {
                assert_abs_diff_eq!(sum, 0.0, epsilon = 1e-9);
            }
            for i in 0..n {
                for k in 0..n {
                    if i == k {
                        assert!(jac.entry(i, k) >= 0.0);
                    } else {
                        assert!(jac.entry(i, k) <= 0.0);
                        // Column k scales with lambda_k off the diagonal.
                        assert_abs_diff_eq!(
                            jac.entry(i, k),
                            -lambda.get(k) * jac.kernel.g(i, k),
                            epsilon = 1e-14
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let quad = QuadratureConfig::default();
        let params = ModelParams::new(4, 2).unwrap();
        let lambda = RateVector::new(&[0.8, 0.5, 0.3, 0.9]).unwrap();
        let jac = occupancy_jacobian(&lambda, &params, &quad).unwrap();
        let h = 1e-5;
        for i in 0..4 {
            let mut up = lambda.rates().to_vec();
            let mut down = up.clone();
            up[i] += h;
            down[i] -= h;
            let pi_up = occupancy_at_rates(&RateVector::new(&up).unwrap(), &params).unwrap();
            let pi_down = occupancy_at_rates(&RateVector::new(&down).unwrap(), &params).unwrap();
            for k in 0..4 {
                let fd = (pi_up[k] - pi_down[k]) / (2.0 * h);
                assert!(
                    (jac.entry(i, k) - fd).abs() < 1e-5,
                    "entry ({i},{k}) = {} vs fd {fd}",
                    jac.entry(i, k)
                );
            }
        }
    }

    // ------------------------------------------------------------------
    // Ordering law
    // ------------------------------------------------------------------

    #[test]
    fn ordering_probability_examples() {
        let lambda = RateVector::new(&[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(
            ordering_probability(&lambda, &[1, 0]).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-15
        );

        let lambda = RateVector::new(&[0.5, 0.3, 0.2]).unwrap();
        assert_abs_diff_eq!(
            ordering_probability(&lambda, &[0, 1, 2]).unwrap(),
            0.3,
            epsilon = 1e-14
        );

        let uniform = RateVector::new(&[1.0; 4]).unwrap();
        for sigma in (0..4).permutations(4) {
            assert_abs_diff_eq!(
                ordering_probability(&uniform, &sigma).unwrap(),
                1.0 / 24.0,
                epsilon = 1e-14
            );
        }

        assert!(matches!(
            ordering_probability(&uniform, &[0, 1, 2, 2]),
            Err(Error::NotAPermutation { .. })
        ));
        assert!(matches!(
            ordering_probability(&uniform, &[0, 1]),
            Err(Error::NotAPermutation { .. })
        ));
    }

    #[test]
    fn ordering_probabilities_normalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for n in 2..=6usize {
            let rates: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
            let lambda = RateVector::new(&rates).unwrap();
            let total: f64 = (0..n)
                .permutations(n)
                .map(|sigma| ordering_probability(&lambda, &sigma).unwrap())
                .sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    // ------------------------------------------------------------------
    // Master identity
    // ------------------------------------------------------------------

    #[test]
    fn uniform_ray_master_terms_vanish() {
        let quad = QuadratureConfig::default();
        let u = PopularityVector::uniform(4).unwrap();
        let params = ModelParams::new(4, 2).unwrap();
        let report = master_identity_derivative(&u, 0.7, &params, &quad).unwrap();
        assert_abs_diff_eq!(report.t1, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.t2, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.derivative, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn two_item_master_closed_form() {
        // At theta = 0.5 with q = (0.7, 0.3): lambda = (0.6, 0.4),
        // H_1 = 0.52, G = 1, so T1 = 0.04, T2 = 0.04.
        let quad = QuadratureConfig::default();
        let q = pv(&[0.7, 0.3]);
        let params = ModelParams::new(2, 1).unwrap();
        let report = master_identity_derivative(&q, 0.5, &params, &quad).unwrap();
        assert_abs_diff_eq!(report.t1, 0.04, epsilon = 1e-10);
        assert_abs_diff_eq!(report.t2, 0.04, epsilon = 1e-10);
        assert_abs_diff_eq!(report.derivative, 0.08, epsilon = 1e-10);

        assert!(matches!(
            master_identity_derivative(&q, 0.0, &params, &quad),
            Err(Error::ThetaOutOfRange(_))
        ));
    }

    // ------------------------------------------------------------------
    // Sign-indefiniteness off the ray
    // ------------------------------------------------------------------

    /// Regression fixture found by randomized search: a tangent direction in
    /// which the occupancy-sensitivity form is negative, against the radial
    /// direction at the same rates, which is positive. This is the
    /// demonstrator for why the monotonicity result is radial rather than a
    /// majorization statement.
    #[test]
    fn sensitivity_form_negative_direction_fixture() {
        let quad = QuadratureConfig::default();
        let params = ModelParams::new(3, 2).unwrap();
        let lambda = RateVector::new(&[0.9, 0.47, 0.2]).unwrap();

        let skew = [0.2, -0.56, 0.36];
        let value = directional_pair_term(&lambda, &skew, &params, &quad).unwrap();
        assert!(value < -0.18, "fixture direction no longer negative: {value}");

        let mean: f64 = lambda.rates().iter().sum::<f64>() / 3.0;
        let radial: Vec<f64> = lambda.rates().iter().map(|&l| l - mean).collect();
        let radial_value = directional_pair_term(&lambda, &radial, &params, &quad).unwrap();
        assert!(radial_value > 0.0, "radial form not positive: {radial_value}");
    }

    #[test]
    fn randomized_search_finds_negative_direction() {
        let quad = QuadratureConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
        let mut found = false;
        for _ in 0..100 {
            let n = rng.random_range(3..=6);
            let c = rng.random_range(1..n);
            let params = ModelParams::new(n, c).unwrap();
            let rates: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let lambda = RateVector::new(&rates).unwrap();
            let mut delta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let shift: f64 = delta.iter().sum::<f64>() / n as f64;
            for d in &mut delta {
                *d -= shift;
            }
            if directional_pair_term(&lambda, &delta, &params, &quad).unwrap() < -1e-6 {
                found = true;
                break;
            }
        }
        assert!(found, "no negative direction in 100 random draws");
    }

    #[test]
    fn master_identity_matches_pair_kernel_derivative() {
        let quad = QuadratureConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        for _ in 0..8 {
            let n = rng.random_range(2..=6);
            let c = rng.random_range(1..n);
            let q = random_interior(&mut rng, n);
            let theta = rng.random_range(0.1..=1.0);
            let params = ModelParams::new(n, c).unwrap();
            let master = master_identity_derivative(&q, theta, &params, &quad).unwrap();
            let kernel_route = radial_derivative(&q, theta, &params).unwrap();
            assert!(
                (master.derivative - kernel_route.derivative).abs() <= 1e-7,
                "master {} vs kernel {} at n={n} c={c} theta={theta}",
                master.derivative,
                kernel_route.derivative
            );
            assert!(master.t1 >= -1e-12);
            if q.uniform_distance() > 1e-9 {
                assert!(master.t2 > 0.0);
            }
        }
    }
}
