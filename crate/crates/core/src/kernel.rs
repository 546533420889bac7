//! Pair-square decomposition of the hit rate and the positive pair kernels
//! behind its radial derivative.
//!
//! Applying the within-subset variance identity to the residual expansion
//! splits the hit rate into the uniform baseline plus pairwise fluctuations:
//!
//! ```text
//!   H_C(p) = C/N + sum_{a<b} (p_a - p_b)^2 J_ab(p)
//! ```
//!
//! Differentiating along the ray `p(theta) = u + theta (q - u)` turns each
//! `J_ab` into the kernel
//!
//! ```text
//!   K_ab(p) = N * sum_{R >= {a,b}, |R| >= L} alpha_|R| (1/(|R| p_R) + 1/(N p_R^2))
//! ```
//!
//! and the derivative into `(1/(N theta)) sum_{a<b} (p_a - p_b)^2 K_ab`.
//! Every `K_ab` is strictly positive, which is what makes the hit rate
//! strictly increasing along every nonuniform ray. The positivity has a
//! constructive witness: grouping subsets through the pair's complement `T`
//! rewrites `K_ab/N` as `Phi_r + Psi_r/N`, and both pieces are integrals of
//! the manifestly nonnegative polynomial `B_r(y, t)`, which this module
//! evaluates both as an alternating sum and in product form, plus by direct
//! quadrature, so the three routes can be cross-checked.

use crate::error::{Error, Result};
use crate::exact::{HitRateMethod, HitRateResult};
use crate::model::{binomial, ModelParams, PopularityVector, RayPath};
use crate::quad::{integrate_exp_weighted, integrate_t_exp_weighted, QuadratureConfig, UnitLegendre};
use crate::subset::{additive_table, set_bits, KahanSum};

/// Default cap for full-matrix kernel sweeps.
pub const DEFAULT_KERNEL_CAP: usize = 18;

/// Inputs whose smallest probability is below this are accepted but flagged:
/// the `1/p_R^2` terms grow as the simplex boundary is approached.
pub const CONDITIONING_MIN_PROB: f64 = 1e-6;

/// Strictly-upper-triangular pair coefficients `J_ab` and kernels `K_ab`.
#[derive(Debug, Clone)]
pub struct PairKernelMatrix {
    n: usize,
    j: Vec<f64>,
    k: Vec<f64>,
    pub params: ModelParams,
    /// Set when the evaluation point sits within [`CONDITIONING_MIN_PROB`]
    /// of the simplex boundary.
    pub poorly_conditioned: bool,
}

impl PairKernelMatrix {
    fn tri_index(&self, a: usize, b: usize) -> usize {
        debug_assert!(a < b && b < self.n);
        a * (2 * self.n - a - 1) / 2 + (b - a - 1)
    }

    pub fn n_items(&self) -> usize {
        self.n
    }

    /// Pair-square coefficient `J_ab` for `a < b`.
    pub fn j(&self, a: usize, b: usize) -> f64 {
        self.j[self.tri_index(a, b)]
    }

    /// Pair kernel `K_ab` for `a < b`.
    pub fn k(&self, a: usize, b: usize) -> f64 {
        self.k[self.tri_index(a, b)]
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |a| ((a + 1)..self.n).map(move |b| (a, b)))
    }
}

/// The complement-side split of one pair kernel: `K_ab/N = Phi_r + Psi_r/N`
/// with `r = L - 2` and `T` the items outside the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSplit {
    pub phi: f64,
    pub psi: f64,
    /// Combined mass `s = p_a + p_b` of the pair.
    pub pair_mass: f64,
    /// Derivative rank `r = L - 2 = N - C - 1`.
    pub residual_rank: usize,
    /// Indices of the complement `T`.
    pub complement: Vec<usize>,
}

/// Radial-derivative evaluation at one point of a ray.
#[derive(Debug, Clone)]
pub struct RadialDerivativeReport {
    pub theta: f64,
    pub derivative: f64,
    /// Per-pair contributions `(a, b, (p_a - p_b)^2 K_ab / (N theta))`; their
    /// sum is the derivative.
    pub pair_terms: Vec<(usize, usize, f64)>,
    pub poorly_conditioned: bool,
}

/// Both evaluations of the derivative polynomial `B_r(y, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BPolynomialValue {
    /// Alternating subset sum `sum_U (-1)^(|U|-r) C(|U|, r) y^|U| e^{-p_U t}`.
    pub alternating: f64,
    /// Positive product form
    /// `y^r sum_{|W|=r} e^{-p_W t} prod_{j notin W} (1 - y e^{-p_j t})`.
    pub product_form: f64,
}

fn check_pair(params: &ModelParams, a: usize, b: usize) -> Result<()> {
    let n = params.n_items();
    if a >= b || b >= n {
        return Err(Error::BadPair { a, b, n_items: n });
    }
    Ok(())
}

fn check_kernel_inputs(p: &PopularityVector, params: &ModelParams, cap: usize) -> Result<()> {
    if p.len() != params.n_items() {
        return Err(Error::LengthMismatch {
            expected: params.n_items(),
            actual: p.len(),
        });
    }
    params.require_partial()?;
    if p.len() > cap {
        return Err(Error::TooManyItems {
            n_items: p.len(),
            cap,
        });
    }
    Ok(())
}

fn signed_alpha(m: usize, low: usize) -> f64 {
    let magnitude = binomial(m - 2, m - low) as f64;
    if (m - low).is_multiple_of(2) {
        magnitude
    } else {
        -magnitude
    }
}

/// Enumerates subsets of the pair's complement, feeding `p_R = s + p_U` and
/// the signed coefficient to the supplied accumulator.
fn for_each_pair_subset(
    p: &PopularityVector,
    params: &ModelParams,
    a: usize,
    b: usize,
    mut visit: impl FnMut(usize, f64, f64),
) {
    let n = params.n_items();
    let low = params.residual_order();
    let s = p.get(a) + p.get(b);
    let rest: Vec<f64> = (0..n)
        .filter(|&i| i != a && i != b)
        .map(|i| p.get(i))
        .collect();
    let masses = additive_table(&rest);
    for (mask, &p_u) in masses.iter().enumerate() {
        let m = mask.count_ones() as usize + 2;
        if m >= low {
            visit(m, signed_alpha(m, low), s + p_u);
        }
    }
}

/// Pair-square coefficient `J_ab` by direct enumeration over subsets that
/// contain the pair.
pub fn pair_coeff_j(
    p: &PopularityVector,
    params: &ModelParams,
    a: usize,
    b: usize,
) -> Result<f64> {
    check_pair(params, a, b)?;
    check_kernel_inputs(p, params, DEFAULT_KERNEL_CAP)?;
    let mut acc = KahanSum::new();
    for_each_pair_subset(p, params, a, b, |m, alpha, p_r| {
        acc.add(alpha / (m as f64 * p_r));
    });
    Ok(acc.value())
}

/// Pair kernel `K_ab` by direct enumeration; errors with
/// [`Error::NonPositiveKernel`] if the provably positive value comes out
/// nonpositive, which would mean a bug in this crate.
pub fn pair_kernel_k(
    p: &PopularityVector,
    params: &ModelParams,
    a: usize,
    b: usize,
) -> Result<f64> {
    check_pair(params, a, b)?;
    check_kernel_inputs(p, params, DEFAULT_KERNEL_CAP)?;
    let n = params.n_items() as f64;
    let mut acc = KahanSum::new();
    for_each_pair_subset(p, params, a, b, |m, alpha, p_r| {
        acc.add(alpha * (n / (m as f64 * p_r) + 1.0 / (p_r * p_r)));
    });
    let value = acc.value();
    if value <= 0.0 {
        return Err(Error::NonPositiveKernel { a, b, value });
    }
    Ok(value)
}

/// All pair coefficients and kernels in one sweep over subset masks: each
/// mask contributes to every pair it contains, which beats per-pair
/// re-enumeration whenever the whole matrix is needed.
pub fn pair_kernel_matrix(p: &PopularityVector, params: &ModelParams) -> Result<PairKernelMatrix> {
    pair_kernel_matrix_with_cap(p, params, DEFAULT_KERNEL_CAP)
}

/// [`pair_kernel_matrix`] with an explicit enumeration cap.
pub fn pair_kernel_matrix_with_cap(
    p: &PopularityVector,
    params: &ModelParams,
    cap: usize,
) -> Result<PairKernelMatrix> {
    check_kernel_inputs(p, params, cap)?;
    let n = params.n_items();
    let low = params.residual_order();
    let min_card = low.max(2);
    let nf = n as f64;
    let masses = additive_table(p.probs());

    let pair_count = n * (n - 1) / 2;
    let mut j_acc = vec![KahanSum::new(); pair_count];
    let mut k_acc = vec![KahanSum::new(); pair_count];
    let mut bits = [0usize; 32];
    for (mask, &p_r) in masses.iter().enumerate() {
        let m = mask.count_ones() as usize;
        if m < min_card {
            continue;
        }
        let alpha = signed_alpha(m, low);
        let j_term = alpha / (m as f64 * p_r);
        let k_term = alpha * (nf / (m as f64 * p_r) + 1.0 / (p_r * p_r));
        let count = set_bits(mask, &mut bits);
        for ai in 0..count {
            let a = bits[ai];
            let row_base = a * (2 * n - a - 1) / 2;
            for &b in &bits[ai + 1..count] {
                let idx = row_base + b - a - 1;
                j_acc[idx].add(j_term);
                k_acc[idx].add(k_term);
            }
        }
    }

    let matrix = PairKernelMatrix {
        n,
        j: j_acc.iter().map(KahanSum::value).collect(),
        k: k_acc.iter().map(KahanSum::value).collect(),
        params: *params,
        poorly_conditioned: p.min_prob() < CONDITIONING_MIN_PROB,
    };
    for (a, b) in matrix.pairs() {
        let value = matrix.k(a, b);
        if value <= 0.0 {
            return Err(Error::NonPositiveKernel { a, b, value });
        }
    }
    Ok(matrix)
}

/// Hit rate reconstructed from the pair-square expansion,
/// `C/N + sum_{a<b} (p_a - p_b)^2 J_ab`. Must agree with the residual path.
pub fn hit_rate_pair_square(p: &PopularityVector, params: &ModelParams) -> Result<HitRateResult> {
    if params.is_full_capacity() {
        return Ok(HitRateResult {
            value: 1.0,
            capacity: params.capacity(),
            method: HitRateMethod::PairSquare,
            full_capacity: true,
        });
    }
    let matrix = pair_kernel_matrix(p, params)?;
    let mut acc = KahanSum::new();
    acc.add(params.capacity() as f64 / params.n_items() as f64);
    for (a, b) in matrix.pairs() {
        let diff = p.get(a) - p.get(b);
        acc.add(diff * diff * matrix.j(a, b));
    }
    Ok(HitRateResult {
        value: acc.value(),
        capacity: params.capacity(),
        method: HitRateMethod::PairSquare,
        full_capacity: false,
    })
}

/// Complement-side split of one pair kernel into `Phi_r` and `Psi_r`:
///
/// ```text
///   Phi_r = sum_{U <= T} (-1)^(|U|-r) C(|U|, r) / ((|U|+2)(s + p_U))
///   Psi_r = sum_{U <= T} (-1)^(|U|-r) C(|U|, r) / (s + p_U)^2
/// ```
///
/// Terms with `|U| < r` vanish through the binomial factor. Both values are
/// strictly positive; `N Phi + Psi` reproduces `K_ab`.
pub fn kernel_split(
    p: &PopularityVector,
    params: &ModelParams,
    a: usize,
    b: usize,
) -> Result<KernelSplit> {
    check_pair(params, a, b)?;
    check_kernel_inputs(p, params, DEFAULT_KERNEL_CAP)?;
    let n = params.n_items();
    let r = params.residual_order() - 2;
    let s = p.get(a) + p.get(b);
    let complement: Vec<usize> = (0..n).filter(|&i| i != a && i != b).collect();
    let rest: Vec<f64> = complement.iter().map(|&i| p.get(i)).collect();
    let masses = additive_table(&rest);

    let mut phi = KahanSum::new();
    let mut psi = KahanSum::new();
    for (mask, &p_u) in masses.iter().enumerate() {
        let card = mask.count_ones() as usize;
        if card < r {
            continue;
        }
        let mut coeff = binomial(card, r) as f64;
        if !(card - r).is_multiple_of(2) {
            coeff = -coeff;
        }
        let denom = s + p_u;
        phi.add(coeff / ((card + 2) as f64 * denom));
        psi.add(coeff / (denom * denom));
    }
    Ok(KernelSplit {
        phi: phi.value(),
        psi: psi.value(),
        pair_mass: s,
        residual_rank: r,
        complement,
    })
}

/// Evaluates `B_r(y, t)` over the complement rates both ways.
///
/// The two forms are algebraically equal; returning both lets callers verify
/// the sign structure: the product form is visibly nonnegative for
/// `y in [0, 1]`, `t >= 0`, and strictly positive for `y in (0, 1]`, `t > 0`.
pub fn b_polynomial(y: f64, t: f64, r: usize, rates: &[f64]) -> Result<BPolynomialValue> {
    let size = rates.len();
    if r > size {
        return Err(Error::RankOutOfRange { r, max: size });
    }
    if size > DEFAULT_KERNEL_CAP {
        return Err(Error::TooManyItems {
            n_items: size,
            cap: DEFAULT_KERNEL_CAP,
        });
    }
    let exps: Vec<f64> = rates.iter().map(|&p| (-p * t).exp()).collect();

    let mut alternating = KahanSum::new();
    let masses = additive_table(rates);
    for (mask, &p_u) in masses.iter().enumerate() {
        let card = mask.count_ones() as usize;
        if card < r {
            continue;
        }
        let mut coeff = binomial(card, r) as f64;
        if !(card - r).is_multiple_of(2) {
            coeff = -coeff;
        }
        alternating.add(coeff * y.powi(card as i32) * (-p_u * t).exp());
    }

    let product_form = b_product_with_exps(y, r, &exps);
    Ok(BPolynomialValue {
        alternating: alternating.value(),
        product_form,
    })
}

/// Product form of `B_r` given precomputed factors `e^{-p_j t}`.
fn b_product_with_exps(y: f64, r: usize, exps: &[f64]) -> f64 {
    let size = exps.len();
    let mut total = KahanSum::new();
    for w_mask in combination_masks(size, r) {
        let mut term = 1.0;
        for (j, &e) in exps.iter().enumerate() {
            if w_mask >> j & 1 == 1 {
                term *= e;
            } else {
                term *= 1.0 - y * e;
            }
        }
        total.add(term);
    }
    y.powi(r as i32) * total.value()
}

/// All bitmasks over `size` bits with exactly `r` bits set, in increasing
/// order (Gosper's hack).
fn combination_masks(size: usize, r: usize) -> Vec<usize> {
    if r == 0 {
        return vec![0];
    }
    let limit = 1usize << size;
    let mut masks = Vec::with_capacity(binomial(size, r) as usize);
    let mut mask = (1usize << r) - 1;
    while mask < limit {
        masks.push(mask);
        let low = mask & mask.wrapping_neg();
        let ripple = mask + low;
        mask = ripple | (((mask ^ ripple) >> 2) / low);
    }
    masks
}

/// `Phi_r` and `Psi_r` by direct quadrature through the positive product
/// form of `B_r`:
///
/// ```text
///   Phi_r = int_0^inf e^{-st} int_0^1 y B_r(y, t) dy dt
///   Psi_r = int_0^inf t e^{-st} B_r(1, t) dt
/// ```
///
/// Independent of the subset sums in [`kernel_split`], so agreement between
/// the two is a real cross-check rather than a tautology.
pub fn phi_psi_quadrature(
    p: &PopularityVector,
    params: &ModelParams,
    a: usize,
    b: usize,
    quad: &QuadratureConfig,
) -> Result<(f64, f64)> {
    check_pair(params, a, b)?;
    check_kernel_inputs(p, params, DEFAULT_KERNEL_CAP)?;
    quad.validate()?;
    let n = params.n_items();
    let r = params.residual_order() - 2;
    let s = p.get(a) + p.get(b);
    let rates: Vec<f64> = (0..n)
        .filter(|&i| i != a && i != b)
        .map(|i| p.get(i))
        .collect();
    let combos = combination_masks(rates.len(), r);

    let product_at = |y: f64, exps: &[f64]| -> f64 {
        let mut total = KahanSum::new();
        for &w_mask in &combos {
            let mut term = 1.0;
            for (j, &e) in exps.iter().enumerate() {
                if w_mask >> j & 1 == 1 {
                    term *= e;
                } else {
                    term *= 1.0 - y * e;
                }
            }
            total.add(term);
        }
        y.powi(r as i32) * total.value()
    };

    let legendre = UnitLegendre::new(quad.y_order);
    let phi = integrate_exp_weighted(s, quad, |t| {
        let exps: Vec<f64> = rates.iter().map(|&p_j| (-p_j * t).exp()).collect();
        legendre.integrate(|y| y * product_at(y, &exps))
    })?;
    let psi = integrate_t_exp_weighted(s, quad, |t| {
        let exps: Vec<f64> = rates.iter().map(|&p_j| (-p_j * t).exp()).collect();
        product_at(1.0, &exps)
    })?;
    Ok((phi, psi))
}

/// Radial derivative of the hit rate at `p(theta) = u + theta (q - u)`:
/// `(1/(N theta)) sum_{a<b} (p_a - p_b)^2 K_ab(p(theta))`, reported with its
/// per-pair contributions.
///
/// At `theta = 0` the pair differences scale as `theta`, so the `1/theta`
/// formula has limit 0; that value is returned directly.
pub fn radial_derivative(
    q: &PopularityVector,
    theta: f64,
    params: &ModelParams,
) -> Result<RadialDerivativeReport> {
    let ray = RayPath::new(q.clone());
    let point = ray.at(theta)?;
    let n = params.n_items() as f64;
    if theta == 0.0 {
        let pair_terms = (0..params.n_items())
            .flat_map(|a| ((a + 1)..params.n_items()).map(move |b| (a, b, 0.0)))
            .collect();
        return Ok(RadialDerivativeReport {
            theta,
            derivative: 0.0,
            pair_terms,
            poorly_conditioned: point.min_prob() < CONDITIONING_MIN_PROB,
        });
    }
    let matrix = pair_kernel_matrix(&point, params)?;
    let scale = 1.0 / (n * theta);
    let mut pair_terms = Vec::with_capacity(params.n_items() * (params.n_items() - 1) / 2);
    let mut acc = KahanSum::new();
    for (a, b) in matrix.pairs() {
        let diff = point.get(a) - point.get(b);
        let term = diff * diff * matrix.k(a, b) * scale;
        acc.add(term);
        pair_terms.push((a, b, term));
    }
    Ok(RadialDerivativeReport {
        theta,
        derivative: acc.value(),
        pair_terms,
        poorly_conditioned: matrix.poorly_conditioned,
    })
}
