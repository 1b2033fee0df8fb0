//! Finite urn runs: seeds, step records, simulation, and views of a run as a
//! share trajectory or a 1-Lipschitz path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::float::Real;
use crate::paths::{LipschitzPath, Trajectory};
use crate::urn::UrnFunction;

/// Initial composition: the urn starts with `black + white >= 1` balls that
/// count toward capacity and toward every share.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seed {
    black: u64,
    white: u64,
}

impl Seed {
    pub fn new(black: u64, white: u64) -> Result<Self> {
        if black + white == 0 {
            return Err(Error::InvalidArgument(
                "seed must contain at least one ball".into(),
            ));
        }
        Ok(Seed { black, white })
    }

    pub fn black(&self) -> u64 {
        self.black
    }

    pub fn white(&self) -> u64 {
        self.white
    }

    /// Number of seed balls `n0`.
    pub fn total(&self) -> u64 {
        self.black + self.white
    }
}

impl Default for Seed {
    /// One black, one white: the smallest symmetric start.
    fn default() -> Self {
        Seed { black: 1, white: 1 }
    }
}

/// One complete run to capacity: the seed plus every extraction outcome
/// (`true` = black ball added). Shares are derived, not stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct History {
    capacity: u64,
    seed: Seed,
    rng_seed: u64,
    steps: Vec<bool>,
}

impl History {
    /// Assemble a history from recorded steps. `steps.len()` must equal
    /// `capacity - seed.total()`.
    pub fn from_steps(capacity: u64, seed: Seed, rng_seed: u64, steps: Vec<bool>) -> Result<Self> {
        if capacity < seed.total() {
            return Err(Error::InvalidArgument(format!(
                "capacity {capacity} smaller than seed size {}",
                seed.total()
            )));
        }
        if steps.len() as u64 != capacity - seed.total() {
            return Err(Error::InvalidArgument(format!(
                "expected {} steps for capacity {capacity}, got {}",
                capacity - seed.total(),
                steps.len()
            )));
        }
        Ok(History {
            capacity,
            seed,
            rng_seed,
            steps,
        })
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Extraction outcomes for balls `n0+1 ..= T`.
    pub fn steps(&self) -> &[bool] {
        &self.steps
    }

    pub fn final_black(&self) -> u64 {
        self.seed.black + self.steps.iter().filter(|&&s| s).count() as u64
    }

    /// Black counts after each ball `n = n0 ..= T`.
    pub fn black_counts(&self) -> Vec<u64> {
        let mut counts = Vec::with_capacity(self.steps.len() + 1);
        let mut black = self.seed.black;
        counts.push(black);
        for &s in &self.steps {
            black += u64::from(s);
            counts.push(black);
        }
        counts
    }
}

/// Run the urn to capacity. Fully deterministic in `(urn, capacity, seed,
/// rng_seed)`: draws come from ChaCha8 seeded with `seed_from_u64(rng_seed)`
/// on stream 0, one uniform `f64` per step.
pub fn simulate(
    urn: &UrnFunction,
    capacity: u64,
    seed: Seed,
    rng_seed: u64,
) -> Result<History> {
    simulate_stream(urn, capacity, seed, rng_seed, 0)
}

/// Stream-split variant for batch drivers: run `i` uses stream `i` of the
/// same base seed, so the partition of runs across threads cannot change any
/// run's draw sequence.
pub(crate) fn simulate_stream(
    urn: &UrnFunction,
    capacity: u64,
    seed: Seed,
    rng_seed: u64,
    stream: u64,
) -> Result<History> {
    if capacity < seed.total() {
        return Err(Error::InvalidArgument(format!(
            "capacity {capacity} smaller than seed size {}",
            seed.total()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(stream);
    let mut black = seed.black();
    let mut steps = Vec::with_capacity((capacity - seed.total()) as usize);
    for n in seed.total()..capacity {
        let share = black as f64 / n as f64;
        let p: f64 = urn.eval_clamped(share);
        let is_black = rng.random::<f64>() < p;
        black += u64::from(is_black);
        steps.push(is_black);
    }
    History::from_steps(capacity, seed, rng_seed, steps)
}

/// The run as saturation/share samples `(n/T, psi_n)` for `n = n0 ..= T`.
pub fn share_sequence<F: Real>(h: &History) -> Trajectory<F> {
    let t = F::cast_u64(h.capacity());
    let counts = h.black_counts();
    let n0 = h.seed().total();
    let mut taus = Vec::with_capacity(counts.len());
    let mut psis = Vec::with_capacity(counts.len());
    for (i, &black) in counts.iter().enumerate() {
        let n = n0 + i as u64;
        taus.push(F::cast_u64(n) / t);
        psis.push(F::cast_u64(black) / F::cast_u64(n));
    }
    Trajectory::new(taus, psis).expect("simulated shares are admissible")
}

/// Embed the run as a 1-Lipschitz path on the grid `k/T`: cell `n` rises with
/// slope `sigma_n`, so `phi(n/T) = (black count at n)/T` for `n >= n0`. The
/// seed prefix is spread uniformly (slope `b0/n0` per cell), giving
/// `phi(0) = 0`.
pub fn embed<F: Real>(h: &History) -> LipschitzPath<F> {
    let t = F::cast_u64(h.capacity());
    let n0 = h.seed().total();
    let b0 = F::cast_u64(h.seed().black());
    let mut values = Vec::with_capacity(h.capacity() as usize + 1);
    for k in 0..=n0 {
        values.push(F::cast_u64(k) / F::cast_u64(n0) * b0 / t);
    }
    let mut black = h.seed().black();
    for &s in h.steps() {
        black += u64::from(s);
        values.push(F::cast_u64(black) / t);
    }
    LipschitzPath::new(values).expect("embedded path is 1-Lipschitz")
}
