//! Deterministic parallel Monte Carlo: batched runs to capacity, empirical
//! entropy curves from the resulting histograms, and change-of-measure
//! importance sampling for endpoint tail events.
//!
//! Every run draws from its own counter-derived ChaCha8 stream (base seed
//! plus run index), so results are bit-for-bit identical no matter how the
//! runs are partitioned across threads; reductions happen sequentially in
//! run order after the parallel map.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::curves::{CurveKind, ScalarCurve};
use crate::error::{Error, Result};
use crate::history::{simulate_stream, Seed};
use crate::urn::UrnFunction;

/// Outcome of [`run_batch`]: the final-black-count histogram of `runs`
/// independent runs, plus enough metadata to rebuild shares and to rerun
/// the batch exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchResult {
    runs: u64,
    capacity: u64,
    first_black: u64,
    rng_seed: u64,
    /// `histogram[i]` counts runs ending with `first_black + i` black balls.
    histogram: Vec<u64>,
    /// Terminal shares in run order; retained only on request.
    #[serde(skip_serializing_if = "Option::is_none")]
    shares: Option<Vec<f64>>,
}

impl BatchResult {
    pub fn runs(&self) -> u64 {
        self.runs
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    /// Black count represented by the first histogram bin.
    pub fn first_black(&self) -> u64 {
        self.first_black
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn histogram(&self) -> &[u64] {
        &self.histogram
    }

    /// Terminal shares in run order, when the batch kept them.
    pub fn shares(&self) -> Option<&[f64]> {
        self.shares.as_deref()
    }

    /// Share represented by histogram bin `i`.
    pub fn share_of_bin(&self, i: usize) -> f64 {
        (self.first_black + i as u64) as f64 / self.capacity as f64
    }

    pub fn mean_share(&self) -> f64 {
        let total: f64 = self
            .histogram
            .iter()
            .enumerate()
            .map(|(i, &c)| self.share_of_bin(i) * c as f64)
            .sum();
        total / self.runs as f64
    }
}

/// Run `runs` independent histories to `capacity` and histogram their final
/// black counts. Run `i` draws from stream `i` of `rng_seed`; `keep_shares`
/// additionally retains the per-run terminal shares (in run order) for CSV
/// export at the cost of eight bytes per run.
pub fn run_batch(
    urn: &UrnFunction,
    capacity: u64,
    seed: Seed,
    runs: u64,
    rng_seed: u64,
    keep_shares: bool,
) -> Result<BatchResult> {
    if runs == 0 {
        return Err(Error::InvalidArgument(
            "batch needs at least one run".into(),
        ));
    }
    let finals: Vec<u64> = (0..runs)
        .into_par_iter()
        .map(|i| simulate_stream(urn, capacity, seed, rng_seed, i).map(|h| h.final_black()))
        .collect::<Result<Vec<_>>>()?;
    let bins = (capacity - seed.total()) as usize + 1;
    let mut histogram = vec![0u64; bins];
    for &k in &finals {
        histogram[(k - seed.black()) as usize] += 1;
    }
    let shares = keep_shares.then(|| {
        finals
            .iter()
            .map(|&k| k as f64 / capacity as f64)
            .collect()
    });
    Ok(BatchResult {
        runs,
        capacity,
        first_black: seed.black(),
        rng_seed,
        histogram,
        shares,
    })
}

/// Empirical entropy density of a batch: `(1/T) log(count / runs)` at each
/// populated bin, on the share grid `k / T`. Empty bins are omitted rather
/// than written as negative infinity, so downstream sup-norm comparisons
/// only see bins that carry data.
pub fn empirical_entropy(batch: &BatchResult) -> Result<ScalarCurve<f64>> {
    let t = batch.capacity as f64;
    let r = batch.runs as f64;
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for (i, &count) in batch.histogram.iter().enumerate() {
        if count > 0 {
            grid.push(batch.share_of_bin(i));
            values.push((count as f64 / r).ln() / t);
        }
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("histogram has no populated bins".into()));
    }
    ScalarCurve::new(CurveKind::EntropyDensity, grid, values)
}

/// Importance-sampling estimate of an endpoint tail probability.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ImportanceEstimate {
    estimate: f64,
    standard_error: f64,
    hits: u64,
    degenerate: bool,
}

impl ImportanceEstimate {
    pub fn estimate(&self) -> f64 {
        self.estimate
    }

    pub fn standard_error(&self) -> f64 {
        self.standard_error
    }

    /// Proposal runs whose endpoint landed in the event.
    pub fn hits(&self) -> u64 {
        self.hits
    }

    /// True when the event is reachable but no landing run carried positive
    /// weight, so the zero estimate reflects missing evidence rather than a
    /// measured probability.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

/// Estimate the probability that the final black count lands in `counts` by
/// sampling fair-coin histories and reweighting each by the likelihood
/// ratio of the urn law to the coin law.
///
/// Each step multiplies the weight by `2 pi(psi)` (black drawn) or
/// `2 (1 - pi(psi))` (white drawn); weights are accumulated in log space
/// and rescaled by their maximum once per batch, so capacities far beyond
/// the linear-space underflow point (~700 steps) stay exact. Run `i` draws
/// from stream `i` of `rng_seed`, giving the same partition-invariance
/// contract as [`run_batch`]. An event with no reachable count returns an
/// exact zero; a reachable event whose landing runs all carry zero weight
/// comes back flagged degenerate instead.
pub fn importance_estimate(
    urn: &UrnFunction,
    capacity: u64,
    seed: Seed,
    counts: RangeInclusive<u64>,
    runs: u64,
    rng_seed: u64,
) -> Result<ImportanceEstimate> {
    if runs == 0 {
        return Err(Error::InvalidArgument(
            "importance sampling needs at least one run".into(),
        ));
    }
    if capacity < seed.total() {
        return Err(Error::InvalidArgument(format!(
            "capacity {capacity} smaller than seed size {}",
            seed.total()
        )));
    }
    let lo = (*counts.start()).max(seed.black());
    let hi = (*counts.end()).min(seed.black() + (capacity - seed.total()));
    if lo > hi {
        return Ok(ImportanceEstimate {
            estimate: 0.0,
            standard_error: 0.0,
            hits: 0,
            degenerate: false,
        });
    }

    let outcomes: Vec<(bool, f64)> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(i);
            let mut black = seed.black();
            let mut log_weight = 0.0f64;
            for n in seed.total()..capacity {
                let share = black as f64 / n as f64;
                let p: f64 = urn.eval_clamped(share);
                if rng.random::<f64>() < 0.5 {
                    black += 1;
                    log_weight += (2.0 * p).ln();
                } else {
                    log_weight += (2.0 * (1.0 - p)).ln();
                }
            }
            (black >= lo && black <= hi, log_weight)
        })
        .collect();

    let hits = outcomes.iter().filter(|o| o.0).count() as u64;
    let mut shift = f64::NEG_INFINITY;
    for &(hit, lw) in &outcomes {
        if hit && lw > shift {
            shift = lw;
        }
    }
    if !shift.is_finite() {
        return Ok(ImportanceEstimate {
            estimate: 0.0,
            standard_error: 0.0,
            hits,
            degenerate: true,
        });
    }
    let r = runs as f64;
    let scaled: Vec<f64> = outcomes
        .iter()
        .map(|&(hit, lw)| if hit { (lw - shift).exp() } else { 0.0 })
        .collect();
    let mean = scaled.iter().sum::<f64>() / r;
    let variance = if runs > 1 {
        scaled.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0)
    } else {
        0.0
    };
    // Recombine with the shift in log space: the shift alone can overflow
    // exp even though the final probabilities cannot.
    let estimate = (mean.ln() + shift).exp();
    let standard_error = (0.5 * (variance / r).ln() + shift).exp();
    Ok(ImportanceEstimate {
        estimate,
        standard_error,
        hits,
        degenerate: false,
    })
}
