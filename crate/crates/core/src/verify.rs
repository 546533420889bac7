//! One-shot verification suite: every identity the crate rests on, checked
//! at desk scale with seeded randomness. The CLI `verify` subcommand prints
//! one line per property; the integration tests pin the same properties at
//! their full scales.

use crate::error::Result;
use crate::exact::{
    brute_force_hit_rate, expected_cost_functional, hit_rate_residual, occupancy_per_item,
    search_cost_distribution, ORACLE_CAP,
};
use crate::jacobian::{
    directional_pair_term, master_identity_derivative, occupancy_jacobian, ordering_probability,
    RateVector,
};
use crate::kernel::{
    b_polynomial, hit_rate_pair_square, kernel_split, pair_kernel_matrix, phi_psi_quadrature,
    radial_derivative,
};
use crate::model::{ModelParams, PopularityVector, RayPath};
use crate::quad::QuadratureConfig;
use crate::rational::hit_rate_residual_rational_f64;
use crate::sim::{estimate_hit_rate_stationary, simulate_mtf_chain, SimConfig};
use itertools::Itertools;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Scale of the verification run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyTier {
    /// Small item counts, few repetitions; finishes in seconds.
    Quick,
    /// Larger item counts including the exact-rational cross-check; takes
    /// minutes.
    Full,
}

/// Outcome of one verified property.
#[derive(Debug, Clone)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

struct Scales {
    exact_n: usize,
    oracle_n: usize,
    derivative_n: usize,
    rational_n: usize,
    instances: usize,
    theta_points: usize,
    sim_samples: usize,
}

impl Scales {
    fn new(tier: VerifyTier, max_n: Option<usize>) -> Self {
        let cap = |n: usize| max_n.map_or(n, |m| m.min(n)).max(2);
        match tier {
            VerifyTier::Quick => Self {
                exact_n: cap(6),
                oracle_n: cap(6),
                derivative_n: cap(6),
                rational_n: cap(6),
                instances: 20,
                theta_points: 25,
                sim_samples: 20_000,
            },
            VerifyTier::Full => Self {
                exact_n: cap(12),
                oracle_n: cap(ORACLE_CAP),
                derivative_n: cap(10),
                rational_n: cap(12),
                instances: 60,
                theta_points: 100,
                sim_samples: 100_000,
            },
        }
    }
}

/// Accumulates worst-case deviations over many cases of one property.
struct Tally {
    cases: usize,
    worst: f64,
    tolerance: f64,
    failures: usize,
    first_failure: Option<String>,
}

impl Tally {
    fn new(tolerance: f64) -> Self {
        Self {
            cases: 0,
            worst: 0.0,
            tolerance,
            failures: 0,
            first_failure: None,
        }
    }

    fn check(&mut self, deviation: f64, context: impl FnOnce() -> String) {
        self.cases += 1;
        if deviation.is_nan() || deviation > self.worst {
            self.worst = deviation;
        }
        if deviation.is_nan() || deviation > self.tolerance {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(context());
            }
        }
    }

    /// A hard condition with no numeric slack.
    fn require(&mut self, ok: bool, context: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(context());
            }
        }
    }

    fn result(self, name: &'static str) -> PropertyResult {
        let passed = self.failures == 0;
        let detail = if passed {
            format!(
                "{} cases, worst deviation {:.2e} (tolerance {:.0e})",
                self.cases, self.worst, self.tolerance
            )
        } else {
            format!(
                "{}/{} cases failed, worst deviation {:.2e} (tolerance {:.0e}); first: {}",
                self.failures,
                self.cases,
                self.worst,
                self.tolerance,
                self.first_failure.unwrap_or_default()
            )
        };
        PropertyResult {
            name,
            passed,
            detail,
        }
    }
}

fn random_interior(rng: &mut impl Rng, n: usize) -> PopularityVector {
    let raw: Vec<f64> = (0..n)
        .map(|_| (-(1.0 - rng.random::<f64>()).ln()).max(1e-12))
        .collect();
    let total: f64 = raw.iter().sum();
    PopularityVector::new(&raw.iter().map(|w| w / total).collect::<Vec<_>>()).unwrap()
}

/// Random interior point kept visibly away from the uniform vector, for the
/// strict-monotonicity checks.
fn random_nonuniform(rng: &mut impl Rng, n: usize) -> PopularityVector {
    loop {
        let p = random_interior(rng, n);
        if p.uniform_distance() > 0.05 {
            return p;
        }
    }
}

fn fallible(name: &'static str, body: impl FnOnce() -> Result<PropertyResult>) -> PropertyResult {
    body().unwrap_or_else(|err| PropertyResult {
        name,
        passed: false,
        detail: format!("engine error: {err}"),
    })
}

/// Runs every property at the tier's scale. `max_n` additionally caps every
/// item count. Fixed `seed` makes the whole run deterministic.
pub fn run_verification(tier: VerifyTier, seed: u64, max_n: Option<usize>) -> Vec<PropertyResult> {
    let scales = Scales::new(tier, max_n);
    let quad = QuadratureConfig::default();
    let mut results = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // --- exact engine -------------------------------------------------

    results.push(fallible("uniform baseline H_C(u) = C/N", || {
        let mut tally = Tally::new(1e-12);
        for n in 2..=scales.exact_n {
            let u = PopularityVector::uniform(n)?;
            for c in 1..n {
                let hit = hit_rate_residual(&u, &ModelParams::new(n, c)?)?;
                tally.check((hit.value - c as f64 / n as f64).abs(), || {
                    format!("n={n} c={c}")
                });
            }
        }
        Ok(tally.result("uniform baseline H_C(u) = C/N"))
    }));

    results.push(fallible("capacity-1 hit rate = sum of squares", || {
        let mut tally = Tally::new(1e-12);
        for _ in 0..scales.instances {
            let n = rng.random_range(2..=scales.exact_n);
            let p = random_interior(&mut rng, n);
            let hit = hit_rate_residual(&p, &ModelParams::new(n, 1)?)?;
            tally.check((hit.value - p.sum_of_squares()).abs(), || format!("n={n}"));
        }
        Ok(tally.result("capacity-1 hit rate = sum of squares"))
    }));

    results.push(fallible("residual formula vs permutation oracle", || {
        let mut tally = Tally::new(1e-10);
        for _ in 0..scales.instances {
            let n = rng.random_range(2..=scales.oracle_n.min(7));
            let c = rng.random_range(1..n);
            let p = random_interior(&mut rng, n);
            let params = ModelParams::new(n, c)?;
            let residual = hit_rate_residual(&p, &params)?;
            let oracle = brute_force_hit_rate(&p, &params)?;
            tally.check((residual.value - oracle.value).abs(), || {
                format!("n={n} c={c}")
            });
        }
        Ok(tally.result("residual formula vs permutation oracle"))
    }));

    results.push(fallible("occupancy sums and weighted hit rate", || {
        let mut tally = Tally::new(1e-10);
        for _ in 0..scales.instances {
            let n = rng.random_range(2..=scales.exact_n);
            let c = rng.random_range(1..n);
            let p = random_interior(&mut rng, n);
            let params = ModelParams::new(n, c)?;
            let profile = occupancy_per_item(&p, &params)?;
            let total: f64 = profile.pi.iter().sum();
            tally.check((total - c as f64).abs(), || format!("sum pi, n={n} c={c}"));
            let weighted: f64 = p.probs().iter().zip(&profile.pi).map(|(a, b)| a * b).sum();
            let hit = hit_rate_residual(&p, &params)?;
            tally.check((weighted - hit.value).abs(), || {
                format!("weighted sum, n={n} c={c}")
            });
        }
        Ok(tally.result("occupancy sums and weighted hit rate"))
    }));

    results.push(fallible("occupancy monotone in popularity", || {
        let mut tally = Tally::new(1e-12);
        for _ in 0..scales.instances {
            let n = rng.random_range(3..=scales.exact_n);
            let c = rng.random_range(1..n);
            let p = random_interior(&mut rng, n);
            let profile = occupancy_per_item(&p, &ModelParams::new(n, c)?)?;
            let mut pairs: Vec<(f64, f64)> = p
                .probs()
                .iter()
                .copied()
                .zip(profile.pi.iter().copied())
                .collect();
            pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            let violation = pairs
                .windows(2)
                .map(|w| (w[1].1 - w[0].1).max(0.0))
                .fold(0.0, f64::max);
            tally.check(violation, || format!("n={n} c={c}"));
        }
        Ok(tally.result("occupancy monotone in popularity"))
    }));

    results.push(fallible("search-cost cdf monotone, pmf normalized", || {
        let mut tally = Tally::new(1e-10);
        for _ in 0..scales.instances {
            let n = rng.random_range(2..=scales.exact_n);
            let p = random_interior(&mut rng, n);
            let dist = search_cost_distribution(&p)?;
            let cdf_violation = dist
                .cdf
                .windows(2)
                .map(|w| (w[0] - w[1]).max(0.0))
                .fold(0.0, f64::max);
            tally.check(cdf_violation, || format!("cdf order, n={n}"));
            let pmf_total: f64 = dist.pmf.iter().sum();
            tally.check((pmf_total - 1.0).abs(), || format!("pmf total, n={n}"));
            tally.check((dist.cdf[n - 1] - 1.0).abs(), || format!("cdf end, n={n}"));
        }
        Ok(tally.result("search-cost cdf monotone, pmf normalized"))
    }));

    results.push(fallible("uniform lower bound H_C >= C/N", || {
        let mut tally = Tally::new(1e-12);
        for _ in 0..scales.instances {
            let n = rng.random_range(2..=scales.exact_n);
            let c = rng.random_range(1..n);
            let p = random_interior(&mut rng, n);
            let hit = hit_rate_residual(&p, &ModelParams::new(n, c)?)?;
            tally.check((c as f64 / n as f64 - hit.value).max(0.0), || {
                format!("n={n} c={c}")
            });
        }
        Ok(tally.result("uniform lower bound H_C >= C/N"))
    }));

    // --- pair kernels ---------------------------------------------------

    results.push(fallible("pair-square expansion reproduces hit rate", || {
        let mut tally = Tally::new(1e-10);
        for _ in 0..scales.instances {
            let n = rng.random_range(2..=scales.exact_n);
            let c = rng.random_range(1..n);
            let p = random_interior(&mut rng, n);
            let params = ModelParams::new(n, c)?;
            let pair = hit_rate_pair_square(&p, &params)?;
            let residual = hit_rate_residual(&p, &params)?;
            tally.check((pair.value - residual.value).abs(), || {
                format!("n={n} c={c}")
            });
        }
        Ok(tally.result("pair-square expansion reproduces hit rate"))
    }));

    results.push(fallible("kernel positivity and split identity", || {
        let mut tally = Tally::new(1e-10);
        for _ in 0..scales.instances {
            let n = rng.random_range(2..=scales.exact_n);
            let c = rng.random_range(1..n);
            let p = random_interior(&mut rng, n);
            let params = ModelParams::new(n, c)?;
            let matrix = pair_kernel_matrix(&p, &params)?;
            for (a, b) in matrix.pairs() {
                tally.require(matrix.k(a, b) > 0.0, || {
                    format!("K[{a}][{b}] <= 0 at n={n} c={c}")
                });
                let split = kernel_split(&p, &params, a, b)?;
                tally.require(split.phi > 0.0 && split.psi > 0.0, || {
                    format!("split not positive at n={n} c={c}")
                });
                tally.check(
                    (matrix.k(a, b) - (n as f64 * split.phi + split.psi)).abs(),
                    || format!("split identity n={n} c={c} pair ({a},{b})"),
                );
            }
        }
        Ok(tally.result("kernel positivity and split identity"))
    }));

    results.push(fallible("derivative polynomial forms agree", || {
        let mut tally = Tally::new(1e-12);
        for _ in 0..scales.instances {
            let size = rng.random_range(1..=6);
            let rates: Vec<f64> = (0..size).map(|_| rng.random_range(0.05..1.0)).collect();
            let r = rng.random_range(0..=size);
            let y = rng.random::<f64>();
            let t = rng.random_range(0.0..6.0);
            let value = b_polynomial(y, t, r, &rates)?;
            tally.check((value.alternating - value.product_form).abs(), || {
                format!("size={size} r={r} y={y:.3} t={t:.3}")
            });
            tally.require(value.product_form >= -1e-15, || {
                format!("negative product form at size={size} r={r}")
            });
        }
        Ok(tally.result("derivative polynomial forms agree"))
    }));

    results.push(fallible("quadrature matches subset sums", || {
        let mut tally = Tally::new(1e-8);
        for _ in 0..scales.instances.min(12) {
            let n = rng.random_range(2..=scales.exact_n.min(6));
            let c = rng.random_range(1..n);
            let p = random_interior(&mut rng, n);
            let params = ModelParams::new(n, c)?;
            let b = rng.random_range(1..n);
            let (phi_q, psi_q) = phi_psi_quadrature(&p, &params, 0, b, &quad)?;
            let split = kernel_split(&p, &params, 0, b)?;
            tally.check((phi_q - split.phi).abs(), || format!("phi at n={n} c={c}"));
            tally.check((psi_q - split.psi).abs(), || format!("psi at n={n} c={c}"));
        }
        Ok(tally.result("quadrature matches subset sums"))
    }));

    results.push(fallible("radial derivative vs finite differences", || {
        let mut tally = Tally::new(1e-6);
        let h = 1e-5;
        for _ in 0..scales.instances.min(25) {
            let n = rng.random_range(2..=scales.derivative_n);
            let c = rng.random_range(1..n);
            let q = random_nonuniform(&mut rng, n);
            let theta = rng.random_range(0.1..=0.99);
            let params = ModelParams::new(n, c)?;
            let ray = RayPath::new(q.clone());
            let report = radial_derivative(&q, theta, &params)?;
            let up = hit_rate_residual(&ray.at(theta + h)?, &params)?;
            let down = hit_rate_residual(&ray.at(theta - h)?, &params)?;
            let fd = (up.value - down.value) / (2.0 * h);
            tally.check((report.derivative - fd).abs() / fd.abs().max(1e-12), || {
                format!("n={n} c={c} theta={theta:.3}")
            });
        }
        Ok(tally.result("radial derivative vs finite differences"))
    }));

    results.push(fallible("strict radial monotonicity", || {
        let mut tally = Tally::new(0.0);
        for _ in 0..scales.instances.min(10) {
            let n = rng.random_range(2..=scales.derivative_n);
            let c = rng.random_range(1..n);
            let q = random_nonuniform(&mut rng, n);
            let params = ModelParams::new(n, c)?;
            let ray = RayPath::new(q.clone());
            let mut previous = hit_rate_residual(&ray.at(0.0)?, &params)?.value;
            for j in 1..=scales.theta_points {
                let theta = j as f64 / scales.theta_points as f64;
                let value = hit_rate_residual(&ray.at(theta)?, &params)?.value;
                tally.require(value > previous, || {
                    format!("H not increasing at n={n} c={c} theta={theta:.3}")
                });
                let derivative = radial_derivative(&q, theta, &params)?.derivative;
                tally.require(derivative > 0.0, || {
                    format!("derivative not positive at n={n} c={c} theta={theta:.3}")
                });
                previous = value;
            }
        }
        Ok(tally.result("strict radial monotonicity"))
    }));

    results.push(fallible("stochastic order along rays", || {
        let mut tally = Tally::new(0.0);
        for _ in 0..scales.instances.min(10) {
            let n = rng.random_range(2..=scales.exact_n);
            let q = random_nonuniform(&mut rng, n);
            let ray = RayPath::new(q.clone());
            let theta1 = rng.random_range(0.05..0.5);
            let theta2 = rng.random_range(theta1 + 0.1..=1.0);
            let lower = search_cost_distribution(&ray.at(theta1)?)?;
            let upper = search_cost_distribution(&ray.at(theta2)?)?;
            for c in 0..n - 1 {
                tally.require(upper.cdf[c] > lower.cdf[c] + 1e-12, || {
                    format!("no strict dominance at n={n} depth={}", c + 1)
                });
            }
        }
        Ok(tally.result("stochastic order along rays"))
    }));

    results.push(fallible("nondecreasing cost functionals decrease", || {
        let mut tally = Tally::new(0.0);
        for _ in 0..scales.instances.min(10) {
            let n = rng.random_range(2..=scales.exact_n);
            let q = random_nonuniform(&mut rng, n);
            let ray = RayPath::new(q.clone());
            // Random nondecreasing, nonconstant cost.
            let mut g = vec![rng.random_range(0.0..1.0)];
            for _ in 1..n {
                g.push(g.last().unwrap() + rng.random_range(0.01..1.0));
            }
            let theta1 = rng.random_range(0.05..0.5);
            let theta2 = rng.random_range(theta1 + 0.1..=1.0);
            let cost1 = expected_cost_functional(&ray.at(theta1)?, &g)?;
            let cost2 = expected_cost_functional(&ray.at(theta2)?, &g)?;
            tally.require(cost2 < cost1, || {
                format!("cost did not decrease at n={n}: {cost1} -> {cost2}")
            });
        }
        Ok(tally.result("nondecreasing cost functionals decrease"))
    }));

    // --- occupancy Jacobian ----------------------------------------------

    results.push(fallible("ordering law normalizes", || {
        let mut tally = Tally::new(1e-12);
        for n in 2..=scales.oracle_n.min(6) {
            let rates: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
            let lambda = RateVector::new(&rates)?;
            let total: f64 = (0..n)
                .permutations(n)
                .map(|sigma| ordering_probability(&lambda, &sigma).unwrap())
                .sum();
            tally.check((total - 1.0).abs(), || format!("n={n}"));
        }
        Ok(tally.result("ordering law normalizes"))
    }));

    results.push(fallible("Jacobian rows, signs, symmetry, finite differences", || {
        let mut tally = Tally::new(1e-9);
        let h = 1e-5;
        for _ in 0..scales.instances.min(6) {
            let n = rng.random_range(2..=scales.exact_n.min(6));
            let c = rng.random_range(1..n);
            let params = ModelParams::new(n, c)?;
            let rates: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let lambda = RateVector::new(&rates)?;
            let jac = occupancy_jacobian(&lambda, &params, &quad)?;
            for sum in jac.row_sums() {
                tally.check(sum.abs(), || format!("row sum at n={n} c={c}"));
            }
            for i in 0..n {
                for k in 0..n {
                    if i != k {
                        tally.require(jac.entry(i, k) <= 0.0, || {
                            format!("positive off-diagonal at n={n} c={c}")
                        });
                        tally.require(jac.kernel.g(i, k) == jac.kernel.g(k, i), || {
                            format!("kernel asymmetry at n={n} c={c}")
                        });
                    }
                }
            }
            let i = rng.random_range(0..n);
            let mut up = rates.clone();
            let mut down = rates.clone();
            up[i] += h;
            down[i] -= h;
            let pi_up = crate::jacobian::occupancy_at_rates(&RateVector::new(&up)?, &params)?;
            let pi_down = crate::jacobian::occupancy_at_rates(&RateVector::new(&down)?, &params)?;
            for k in 0..n {
                let fd = (pi_up[k] - pi_down[k]) / (2.0 * h);
                // Finite differences are good to ~1e-5 here, not 1e-9.
                tally.require((jac.entry(i, k) - fd).abs() < 1e-5, || {
                    format!("fd mismatch at n={n} c={c} ({i},{k})")
                });
            }
        }
        Ok(tally.result("Jacobian rows, signs, symmetry, finite differences"))
    }));

    results.push(fallible("master identity equals kernel derivative", || {
        let mut tally = Tally::new(1e-7);
        for _ in 0..scales.instances.min(8) {
            let n = rng.random_range(2..=scales.exact_n.min(6));
            let c = rng.random_range(1..n);
            let q = random_nonuniform(&mut rng, n);
            let theta = rng.random_range(0.05..=1.0);
            let params = ModelParams::new(n, c)?;
            let master = master_identity_derivative(&q, theta, &params, &quad)?;
            let kernel_route = radial_derivative(&q, theta, &params)?;
            tally.check((master.derivative - kernel_route.derivative).abs(), || {
                format!("n={n} c={c} theta={theta:.3}")
            });
            tally.require(master.t1 >= -1e-12 && master.t2 > 0.0, || {
                format!("term signs at n={n} c={c}")
            });
        }
        Ok(tally.result("master identity equals kernel derivative"))
    }));

    results.push(fallible("sensitivity minor changes sign off the ray", || {
        // Demonstrator, not a proof: searches for one tangent direction in
        // which the occupancy-sensitivity form goes negative.
        let mut tally = Tally::new(0.0);
        let mut found = false;
        'search: for _ in 0..200 {
            let n = rng.random_range(3..=6);
            let c = rng.random_range(1..n);
            let params = ModelParams::new(n, c).unwrap();
            let rates: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let lambda = match RateVector::new(&rates) {
                Ok(l) => l,
                Err(_) => continue,
            };
            let mut delta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let shift: f64 = delta.iter().sum::<f64>() / n as f64;
            for d in &mut delta {
                *d -= shift;
            }
            if let Ok(value) = directional_pair_term(&lambda, &delta, &params, &quad) {
                if value < -1e-10 {
                    found = true;
                    break 'search;
                }
            }
        }
        tally.require(found, || "no negative direction found in 200 draws".into());
        Ok(tally.result("sensitivity minor changes sign off the ray"))
    }));

    // --- simulation -------------------------------------------------------

    results.push(fallible("simulators agree with exact hit rate", || {
        let mut tally = Tally::new(0.0);
        for round in 0..3u64 {
            let n = rng.random_range(2..=scales.exact_n.min(8));
            let c = rng.random_range(1..n);
            let p = random_interior(&mut rng, n);
            let params = ModelParams::new(n, c)?;
            let exact = hit_rate_residual(&p, &params)?.value;
            let cfg = SimConfig {
                seed: seed ^ (0xA5A5_0000 + round),
                samples: scales.sim_samples,
                steps: scales.sim_samples,
                burn_in: Some(2_000),
                replicas: 1,
            };
            let stationary = estimate_hit_rate_stationary(&p, &params, &cfg)?;
            tally.require(
                (stationary.hit_rate_estimate - exact).abs()
                    <= 4.0 * stationary.std_error.max(1e-9),
                || {
                    format!(
                        "stationary {} vs exact {exact} (se {})",
                        stationary.hit_rate_estimate, stationary.std_error
                    )
                },
            );
            let chain = simulate_mtf_chain(&p, &params, &cfg)?;
            // Chain draws are autocorrelated; allow 6x the iid-based error.
            tally.require(
                (chain.hit_rate_estimate - exact).abs() <= 6.0 * chain.std_error.max(1e-9),
                || {
                    format!(
                        "chain {} vs exact {exact} (se {})",
                        chain.hit_rate_estimate, chain.std_error
                    )
                },
            );
        }
        Ok(tally.result("simulators agree with exact hit rate"))
    }));

    // --- exact rational cross-check ----------------------------------------

    results.push(fallible("float engine agrees with exact rationals", || {
        let mut tally = Tally::new(1e-12);
        for _ in 0..scales.instances.min(20) {
            let n = rng.random_range(2..=scales.rational_n);
            let c = rng.random_range(1..n);
            let weights: Vec<u64> = (0..n).map(|_| rng.random_range(1..=30)).collect();
            let total: f64 = weights.iter().map(|&w| w as f64).sum();
            let probs: Vec<f64> = weights.iter().map(|&w| w as f64 / total).collect();
            let p = PopularityVector::new(&probs)?;
            let float = hit_rate_residual(&p, &ModelParams::new(n, c)?)?.value;
            let exact = hit_rate_residual_rational_f64(&weights, c)?;
            tally.check((float - exact).abs(), || format!("n={n} c={c}"));
        }
        Ok(tally.result("float engine agrees with exact rationals"))
    }));

    results
}
