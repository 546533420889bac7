//! Bitmask subset enumeration: per-mask additive tables and compensated
//! summation for the alternating expansions built on top of them.

/// One subset `R` of the item set, identified by a bitmask, together with its
/// probability mass `p_R` and cardinality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetTerm {
    pub mask: u32,
    pub subset_mass: f64,
    pub cardinality: u32,
}

/// Kahan compensated accumulator. The residual expansion alternates in sign
/// with terms far larger than the result, so plain summation loses digits.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    err: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.err;
        let t = self.sum + y;
        self.err = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Additive set function over all `2^n` bitmasks: entry `mask` holds the sum
/// of `values[i]` over the set bits of `mask`. Built in one pass by peeling
/// the lowest set bit, so construction is O(2^n).
pub fn additive_table(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    assert!(n < 32, "additive_table needs n < 32, got {n}");
    let mut table = vec![0.0; 1usize << n];
    for mask in 1..table.len() {
        let low = mask.trailing_zeros() as usize;
        table[mask] = table[mask & (mask - 1)] + values[low];
    }
    table
}

/// The two per-mask tables the exact engine needs: subset mass `p_R` and the
/// within-subset square sum `sum_{i in R} p_i^2`.
pub struct SubsetTables {
    pub mass: Vec<f64>,
    pub sq: Vec<f64>,
    pub n: usize,
}

impl SubsetTables {
    pub fn build(probs: &[f64]) -> Self {
        let squares: Vec<f64> = probs.iter().map(|p| p * p).collect();
        Self {
            mass: additive_table(probs),
            sq: additive_table(&squares),
            n: probs.len(),
        }
    }

    pub fn term(&self, mask: u32) -> SubsetTerm {
        SubsetTerm {
            mask,
            subset_mass: self.mass[mask as usize],
            cardinality: mask.count_ones(),
        }
    }
}

/// Collects the set bit positions of `mask` into a small buffer and returns
/// the filled prefix.
pub(crate) fn set_bits(mask: usize, buf: &mut [usize; 32]) -> usize {
    let mut m = mask;
    let mut count = 0;
    while m != 0 {
        buf[count] = m.trailing_zeros() as usize;
        count += 1;
        m &= m - 1;
    }
    count
}
