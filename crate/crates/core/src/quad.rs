//! Quadrature configuration and the exponentially weighted integral
//! transforms shared by the kernel and Jacobian engines.
//!
//! Both engines need integrals of the shape `int_0^inf e^{-st} f(t) dt` and
//! `int_0^inf t e^{-st} f(t) dt` for smooth, bounded `f`. Substituting
//! `x = s t` turns these into Gauss-Laguerre integrals (weight `e^{-x}`,
//! respectively `x e^{-x}`), evaluated with order doubling until two
//! successive estimates agree; the node/weight tables come from the
//! `gauss-quad` crate's Golub-Welsch implementation.

use crate::error::{Error, Result};
use gauss_quad::{GaussLaguerre, GaussLegendre};

/// Quadrature settings: base orders for the `t` and `y` integrals, how many
/// order doublings to attempt, and the refinement agreement tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub t_order: usize,
    pub y_order: usize,
    pub refine_limit: usize,
    pub tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            t_order: 32,
            y_order: 32,
            refine_limit: 6,
            tolerance: 1e-9,
        }
    }
}

impl QuadratureConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.t_order < 16 || self.y_order < 16 {
            return Err(Error::InvalidConfig(format!(
                "quadrature orders must be at least 16, got t_order={} y_order={}",
                self.t_order, self.y_order
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "quadrature tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

fn laguerre_rule(order: usize, alpha: f64) -> GaussLaguerre {
    GaussLaguerre::new(order, alpha).expect("order >= 16 and alpha > -1")
}

/// `int_0^inf e^{-st} f(t) dt` at a fixed order.
fn exp_weighted_at_order(s: f64, f: &impl Fn(f64) -> f64, order: usize) -> f64 {
    let rule = laguerre_rule(order, 0.0);
    let acc: f64 = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| w * f(x / s))
        .sum();
    acc / s
}

/// `int_0^inf t e^{-st} f(t) dt` at a fixed order (generalized Laguerre,
/// weight `x e^{-x}`).
fn t_exp_weighted_at_order(s: f64, f: &impl Fn(f64) -> f64, order: usize) -> f64 {
    let rule = laguerre_rule(order, 1.0);
    let acc: f64 = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| w * f(x / s))
        .sum();
    acc / (s * s)
}

fn refine(cfg: &QuadratureConfig, eval: impl Fn(usize) -> f64) -> Result<f64> {
    let mut order = cfg.t_order;
    let mut prev = eval(order);
    let mut delta = f64::INFINITY;
    for _ in 0..cfg.refine_limit {
        order *= 2;
        let current = eval(order);
        delta = (current - prev).abs();
        if delta <= cfg.tolerance {
            return Ok(current);
        }
        prev = current;
    }
    Err(Error::QuadratureNotConverged {
        delta,
        tolerance: cfg.tolerance,
    })
}

/// `int_0^inf e^{-st} f(t) dt` with order-doubling refinement.
pub(crate) fn integrate_exp_weighted(
    s: f64,
    cfg: &QuadratureConfig,
    f: impl Fn(f64) -> f64,
) -> Result<f64> {
    debug_assert!(s > 0.0);
    refine(cfg, |order| exp_weighted_at_order(s, &f, order))
}

/// `int_0^inf t e^{-st} f(t) dt` with order-doubling refinement.
pub(crate) fn integrate_t_exp_weighted(
    s: f64,
    cfg: &QuadratureConfig,
    f: impl Fn(f64) -> f64,
) -> Result<f64> {
    debug_assert!(s > 0.0);
    refine(cfg, |order| t_exp_weighted_at_order(s, &f, order))
}

/// Fixed-order Gauss-Legendre rule on `[0, 1]`.
pub(crate) struct UnitLegendre {
    rule: GaussLegendre,
}

impl UnitLegendre {
    pub fn new(order: usize) -> Self {
        Self {
            rule: GaussLegendre::new(order).expect("order >= 16"),
        }
    }

    pub fn integrate(&self, f: impl FnMut(f64) -> f64) -> f64 {
        self.rule.integrate(0.0, 1.0, f)
    }
}
