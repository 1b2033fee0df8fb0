//! Exact final-share distributions by forward dynamic programming over
//! (step, black count), in plain double precision.

use crate::error::{Error, Result};
use crate::history::Seed;
use crate::urn::UrnFunction;

/// Cap on `T * (T - n0)` transition evaluations for one exact-distribution
/// call. The default admits capacities up to 5000 from a small seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkBudget(pub u64);

impl Default for WorkBudget {
    fn default() -> Self {
        WorkBudget(25_000_000)
    }
}

/// Probability of each final black count `k = b0 ..= b0 + (T - n0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalShareDistribution {
    capacity: u64,
    first_black: u64,
    probs: Vec<f64>,
}

impl FinalShareDistribution {
    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    /// Smallest attainable final black count (the seed's black count).
    pub fn first_black(&self) -> u64 {
        self.first_black
    }

    pub fn support(&self) -> std::ops::RangeInclusive<u64> {
        self.first_black..=self.first_black + (self.probs.len() as u64 - 1)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of finishing with exactly `k` black balls.
    pub fn prob_of_black(&self, k: u64) -> f64 {
        if k < self.first_black {
            return 0.0;
        }
        self.probs.get((k - self.first_black) as usize).copied().unwrap_or(0.0)
    }

    /// `(share, probability)` pairs, share = k / T.
    pub fn shares(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let t = self.capacity as f64;
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| ((self.first_black + i as u64) as f64 / t, p))
    }

    /// Mean final share.
    pub fn mean_share(&self) -> f64 {
        self.shares().map(|(x, p)| x * p).sum()
    }
}

/// Kahan-compensated sum; used for the normalization check so the check
/// itself does not drown in rounding.
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Exact law of the final black count by forward recursion: mass at
/// `(n, k)` splits into `k+1` with probability `pi(k/n)` and `k` with the
/// complement.
///
/// Work is `T * (T - n0)`; calls beyond `budget` are refused rather than
/// attempted. The result must renormalize to 1 within `1e-12` (checked with
/// a compensated pass) or the call reports a numerical failure.
pub fn exact_distribution(
    urn: &UrnFunction,
    capacity: u64,
    seed: Seed,
    budget: WorkBudget,
) -> Result<FinalShareDistribution> {
    if capacity < seed.total() {
        return Err(Error::InvalidArgument(format!(
            "capacity {capacity} smaller than seed size {}",
            seed.total()
        )));
    }
    let n_steps = capacity - seed.total();
    let work = capacity.saturating_mul(n_steps);
    if work > budget.0 {
        return Err(Error::BudgetExceeded {
            what: "exact distribution",
            needed: work,
            budget: budget.0,
        });
    }

    let mut probs = vec![1.0f64];
    probs.reserve(n_steps as usize);
    for n in seed.total()..capacity {
        let mut next = vec![0.0f64; probs.len() + 1];
        for (i, &mass) in probs.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let k = seed.black() + i as u64;
            let p = urn.eval_clamped(k as f64 / n as f64);
            next[i + 1] += mass * p;
            next[i] += mass * (1.0 - p);
        }
        probs = next;
    }

    let total = compensated_sum(&probs);
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Numerical(format!(
            "final-share mass sums to {total:.17}, drifted beyond 1e-12 from 1"
        )));
    }
    Ok(FinalShareDistribution {
        capacity,
        first_black: seed.black(),
        probs,
    })
}
