//! Stochastic verification: samples of the stationary recency stack via the
//! size-biased ordering law, and a discrete-time move-to-front chain. Both
//! estimate the hit rate and the search-cost law, giving the exact engines
//! an independent statistical check.

use crate::error::{Error, Result};
use crate::model::{ModelParams, PopularityVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Simulation settings.
///
/// Replicas run on separate, statistically independent RNG streams derived
/// from `(seed, replica index)` and merge in replica order, so any fixed
/// configuration reproduces bit-identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub seed: u64,
    /// Independent stationary stacks to draw (stationary sampler).
    pub samples: usize,
    /// Recorded requests per replica (move-to-front chain).
    pub steps: usize,
    /// Warm-up requests before recording; `None` selects the heuristic
    /// `50 * N * max(p)/min(p)`, a crude coupling-style bound. The value
    /// actually used is reported on the result.
    pub burn_in: Option<usize>,
    pub replicas: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 100_000,
            steps: 100_000,
            burn_in: None,
            replicas: 1,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.steps == 0 || self.replicas == 0 {
            return Err(Error::InvalidConfig(
                "samples, steps and replicas must all be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn stream(&self, replica: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replica as u64);
        rng
    }
}

/// Point estimate with its sampling error and the observed depth histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub hit_rate_estimate: f64,
    /// Sample standard deviation of the per-sample estimate divided by
    /// `sqrt(samples_used)`.
    pub std_error: f64,
    /// Depth counts, index `d-1` for depth `d`. Integer counts for the
    /// chain; expected (popularity-weighted) counts for the stationary
    /// sampler. Totals `samples_used` either way.
    pub search_cost_histogram: Vec<f64>,
    pub samples_used: usize,
    /// Warm-up actually applied per replica (0 for the stationary sampler).
    pub burn_in_used: usize,
}

/// Streaming mean/variance accumulator with exact pairwise merging, so
/// replica merge order is fixed and reproducible.
#[derive(Debug, Clone, Copy, Default)]
struct RunningMoments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &RunningMoments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / total;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / total;
        self.count += other.count;
    }

    fn std_error(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        (self.m2 / (self.count - 1) as f64).sqrt() / (self.count as f64).sqrt()
    }
}

/// One draw of the stationary recency stack: a size-biased permutation,
/// front of the list first.
///
/// Repeatedly picks the next item from the remaining ones with probability
/// proportional to its popularity. The resulting order has the same law as
/// sorting independent `Exp(p_i)` ages, i.e. the stationary LRU/MTF order.
pub fn sample_stationary_stack<R: Rng + ?Sized>(p: &PopularityVector, rng: &mut R) -> Vec<usize> {
    let probs = p.probs();
    let mut remaining: Vec<usize> = (0..probs.len()).collect();
    let mut stack = Vec::with_capacity(probs.len());
    while remaining.len() > 1 {
        let total: f64 = remaining.iter().map(|&i| probs[i]).sum();
        let mut u: f64 = rng.random::<f64>() * total;
        let mut chosen = remaining.len() - 1;
        for (slot, &item) in remaining.iter().enumerate() {
            u -= probs[item];
            if u <= 0.0 {
                chosen = slot;
                break;
            }
        }
        stack.push(remaining.swap_remove(chosen));
    }
    stack.push(remaining[0]);
    stack
}

/// Hit-rate estimate from independent stationary stacks.
///
/// Each stack contributes its conditional hit probability, the popularity
/// mass of the top `C` positions, rather than a single Bernoulli request:
/// same mean, strictly smaller variance per sample.
pub fn estimate_hit_rate_stationary(
    p: &PopularityVector,
    params: &ModelParams,
    cfg: &SimConfig,
) -> Result<SimResult> {
    cfg.validate()?;
    if p.len() != params.n_items() {
        return Err(Error::LengthMismatch {
            expected: params.n_items(),
            actual: p.len(),
        });
    }
    let n = p.len();
    let capacity = params.capacity();
    let probs = p.probs();

    let mut moments = RunningMoments::default();
    let mut histogram = vec![0.0; n];
    for replica in 0..cfg.replicas {
        let mut rng = cfg.stream(replica);
        let mut local = RunningMoments::default();
        for _ in 0..cfg.samples {
            let stack = sample_stationary_stack(p, &mut rng);
            let mut cached_mass = 0.0;
            for (depth_idx, &item) in stack.iter().enumerate() {
                let mass = probs[item];
                histogram[depth_idx] += mass;
                if depth_idx < capacity {
                    cached_mass += mass;
                }
            }
            local.push(cached_mass);
        }
        moments.merge(&local);
    }
    Ok(SimResult {
        hit_rate_estimate: moments.mean,
        std_error: moments.std_error(),
        search_cost_histogram: histogram,
        samples_used: moments.count,
        burn_in_used: 0,
    })
}

/// Default warm-up for the chain when none is configured.
pub fn default_burn_in(p: &PopularityVector) -> usize {
    let max = p.probs().iter().cloned().fold(0.0, f64::max);
    let ratio = max / p.min_prob();
    (50.0 * p.len() as f64 * ratio).ceil() as usize
}

/// Discrete-time move-to-front chain: draw a request, record its current
/// list depth, move it to the front. After warm-up the depth sequence
/// samples the stationary search-cost law, and `depth <= C` is a cache hit.
pub fn simulate_mtf_chain(
    p: &PopularityVector,
    params: &ModelParams,
    cfg: &SimConfig,
) -> Result<SimResult> {
    cfg.validate()?;
    if p.len() != params.n_items() {
        return Err(Error::LengthMismatch {
            expected: params.n_items(),
            actual: p.len(),
        });
    }
    let n = p.len();
    let capacity = params.capacity();
    let probs = p.probs();
    let burn_in = cfg.burn_in.unwrap_or_else(|| default_burn_in(p));

    let mut moments = RunningMoments::default();
    let mut histogram = vec![0.0; n];
    for replica in 0..cfg.replicas {
        let mut rng = cfg.stream(replica);
        let mut list: Vec<usize> = (0..n).collect();
        let mut local = RunningMoments::default();
        for step in 0..burn_in + cfg.steps {
            let mut u: f64 = rng.random::<f64>();
            let mut item = n - 1;
            for (candidate, &mass) in probs.iter().enumerate() {
                u -= mass;
                if u <= 0.0 {
                    item = candidate;
                    break;
                }
            }
            let depth_idx = list.iter().position(|&x| x == item).expect("item in list");
            if step >= burn_in {
                histogram[depth_idx] += 1.0;
                local.push(if depth_idx < capacity { 1.0 } else { 0.0 });
            }
            list.remove(depth_idx);
            list.insert(0, item);
        }
        moments.merge(&local);
    }
    Ok(SimResult {
        hit_rate_estimate: moments.mean,
        std_error: moments.std_error(),
        search_cost_histogram: histogram,
        samples_used: moments.count,
        burn_in_used: burn_in,
    })
}
