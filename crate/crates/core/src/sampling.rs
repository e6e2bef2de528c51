//! Seeded randomness and exact discrete sampling.
//!
//! * [`Rng`]: ChaCha8 keyed by a 64-bit seed, with independent streams so
//!   that the inner-loop length and the `(j, i)` draws never share state.
//! * [`DiscreteDistribution`]: Walker/Vose alias table, one `u64` per draw.
//! * [`GeometricLaw`]: inverse-CDF sampling of the inner-loop length.
//! * [`PairSampler`]: coordinate `j ~ p` then component `i ~ q_{.j}`, with the
//!   per-column tables built on first use.

use std::sync::OnceLock;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::Distribution;

use crate::error::{invalid, Error, Result};
use crate::problem::LipschitzTable;

/// Stream identifiers. Same seed with different streams gives independent
/// sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Data = 0,
    Pairs = 1,
    InnerLength = 2,
    Probes = 3,
}

/// Reproducible generator: ChaCha8 (`rand_chacha`) seeded via
/// `seed_from_u64`. Output depends only on seed and stream, never on the
/// platform.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn from_seed(seed: u64) -> Self {
        Self::with_stream(seed, Stream::Data)
    }

    pub fn with_stream(seed: u64, stream: Stream) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream as u64);
        Self { inner }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        // Lemire's multiply-shift with rejection
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.inner.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    pub fn sample<T, D: Distribution<T>>(&mut self, dist: D) -> T {
        dist.sample(self)
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Finite distribution over `0..len` proportional to nonnegative weights,
/// sampled in O(1) through an alias table.
#[derive(Debug, Clone)]
pub struct DiscreteDistribution {
    probabilities: Vec<f64>,
    threshold: Vec<f64>,
    alias: Vec<usize>,
}

impl DiscreteDistribution {
    pub fn new(weights: &[f64]) -> Result<Self> {
        let mut total = 0.0;
        for (index, &value) in weights.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::BadWeight { index, value });
            }
            total += value;
        }
        if !(total > 0.0) {
            return Err(Error::AllZeroWeights);
        }
        let len = weights.len();
        let probabilities: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut scaled: Vec<f64> = probabilities.iter().map(|p| p * len as f64).collect();
        let mut threshold = vec![0.0; len];
        let mut alias: Vec<usize> = (0..len).collect();

        // Worklists filled in ascending index order and consumed from the
        // front, so construction is fully deterministic.
        let mut small = std::collections::VecDeque::new();
        let mut large = std::collections::VecDeque::new();
        for (k, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push_back(k);
            } else {
                large.push_back(k);
            }
        }
        while let (Some(&l), Some(&g)) = (small.front(), large.front()) {
            small.pop_front();
            threshold[l] = scaled[l];
            alias[l] = g;
            scaled[g] = (scaled[g] + scaled[l]) - 1.0;
            if scaled[g] < 1.0 {
                large.pop_front();
                small.push_back(g);
            }
        }
        for g in large {
            threshold[g] = 1.0;
        }
        // Leftovers from rounding. A zero-weight entry must keep threshold 0
        // and point at a positive entry.
        let fallback = weights.iter().position(|&w| w > 0.0).expect("positive total");
        for l in small {
            if weights[l] > 0.0 {
                threshold[l] = 1.0;
            } else {
                threshold[l] = 0.0;
                alias[l] = fallback;
            }
        }
        Ok(Self { probabilities, threshold, alias })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Normalized probabilities `w_k / sum(w)`.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// One draw. A single-point distribution consumes no randomness.
    pub fn sample(&self, rng: &mut Rng) -> usize {
        let len = self.len();
        if len == 1 {
            return 0;
        }
        let wide = (rng.next_u64() as u128) * (len as u128);
        let column = (wide >> 64) as usize;
        let coin = (wide as u64) as f64 * (1.0 / 18446744073709551616.0);
        if coin < self.threshold[column] {
            column
        } else {
            self.alias[column]
        }
    }
}

/// Law of the inner-loop length: `P(T) = rho^(m - T) / beta` on `1..=m`,
/// where `rho = 1 - mu h`.
#[derive(Debug, Clone)]
pub struct GeometricLaw {
    m: usize,
    rho: f64,
    beta: f64,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl GeometricLaw {
    /// `mu_h` is the product of the strong-convexity bound and the stepsize.
    /// Zero is allowed and yields the uniform law on `1..=m`.
    pub fn new(m: usize, mu_h: f64) -> Result<Self> {
        if m == 0 {
            return Err(invalid("inner-loop bound m must be at least 1"));
        }
        if !(0.0..1.0).contains(&mu_h) {
            return Err(invalid(format!("mu*h = {mu_h} must lie in [0, 1)")));
        }
        let rho = 1.0 - mu_h;
        // weight of T is rho^(m-T); fill from T = m downwards
        let mut weights = vec![0.0; m];
        let mut w = 1.0;
        for t in (0..m).rev() {
            weights[t] = w;
            w *= rho;
        }
        let mut cumulative = Vec::with_capacity(m);
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        Ok(Self { m, rho, beta: acc, weights, cumulative })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `P(T = t)` for `t` in `1..=m`, zero elsewhere.
    pub fn probability(&self, t: usize) -> f64 {
        if t == 0 || t > self.m {
            return 0.0;
        }
        self.weights[t - 1] / self.beta
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        if self.m == 1 {
            return 1;
        }
        let target = rng.next_f64() * self.beta;
        let k = self.cumulative.partition_point(|&c| c <= target);
        k.min(self.m - 1) + 1
    }
}

/// A sampled `(j, i)` pair; `slot` addresses the entry in the column-major
/// storage of the Lipschitz table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairDraw {
    pub coordinate: usize,
    pub component: usize,
    pub slot: usize,
}

/// Sampler for `p_ij = p_j q_ij`.
///
/// Shareable across threads; per-column tables are memoized in `OnceLock`s.
#[derive(Debug)]
pub struct PairSampler {
    coordinates: DiscreteDistribution,
    col_ptr: Vec<usize>,
    slot_rows: Vec<usize>,
    slot_weights: Vec<f64>,
    conditionals: Vec<OnceLock<DiscreteDistribution>>,
    joint: OnceLock<DiscreteDistribution>,
}

impl PairSampler {
    pub fn new(table: &LipschitzTable) -> Result<Self> {
        let coordinates = DiscreteDistribution::new(table.v())?;
        let d = table.d();
        let lip = table.matrix();
        let mut col_ptr = Vec::with_capacity(d + 1);
        col_ptr.push(0);
        let mut slot_rows = Vec::with_capacity(lip.nnz());
        let mut slot_weights = Vec::with_capacity(lip.nnz());
        for j in 0..d {
            for s in lip.col_slots(j) {
                let i = lip.slot_row(s);
                slot_rows.push(i);
                slot_weights.push(table.omega()[i] as f64 * lip.slot_value(s));
            }
            col_ptr.push(slot_rows.len());
        }
        Ok(Self {
            coordinates,
            col_ptr,
            slot_rows,
            slot_weights,
            conditionals: (0..d).map(|_| OnceLock::new()).collect(),
            joint: OnceLock::new(),
        })
    }

    pub fn coordinate_distribution(&self) -> &DiscreteDistribution {
        &self.coordinates
    }

    /// Conditional law `q_{.j}` over the slots of column `j`.
    pub fn conditional(&self, j: usize) -> &DiscreteDistribution {
        self.conditionals[j].get_or_init(|| {
            let w = &self.slot_weights[self.col_ptr[j]..self.col_ptr[j + 1]];
            DiscreteDistribution::new(w).expect("column with positive v_j has a positive entry")
        })
    }

    fn draw_from_slot(&self, slot: usize) -> PairDraw {
        let coordinate = self.col_ptr.partition_point(|&c| c <= slot) - 1;
        PairDraw { coordinate, component: self.slot_rows[slot], slot }
    }

    /// `j ~ p`, then `i ~ q_{.j}`.
    pub fn sample(&self, rng: &mut Rng) -> PairDraw {
        let j = self.coordinates.sample(rng);
        let slot = self.col_ptr[j] + self.conditional(j).sample(rng);
        PairDraw { coordinate: j, component: self.slot_rows[slot], slot }
    }

    /// Direct draw from the flattened joint table `p_ij`.
    pub fn sample_joint(&self, rng: &mut Rng) -> PairDraw {
        let joint = self.joint.get_or_init(|| {
            DiscreteDistribution::new(&self.slot_weights).expect("positive total weight")
        });
        self.draw_from_slot(joint.sample(rng))
    }
}
