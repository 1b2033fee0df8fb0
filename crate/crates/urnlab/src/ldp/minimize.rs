//! Cost minimization over event-constrained path classes, and the entropy
//! density of the final share computed from it.
//!
//! The decision variables are the cell slopes of a piecewise-linear
//! cumulative path on the uniform `M`-cell grid. The minimized quantity is
//! the accumulated relative entropy of the slopes against the urn drift,
//!
//! ```text
//! C = sum_k h KL(s_k || pi(psi_k)),    psi_k = phi(mid of cell k) / tau_mid,
//! ```
//!
//! taken over the cells at saturation `tau0` and beyond. The share `phi/tau`
//! is a 0/0 form at `tau = 0`, so every variational path carries an explicit
//! start: a pinned start `(tau0, psi0)` freezes the slopes before `tau0` at
//! `psi0` and costs nothing there; a free start uses `tau0 = 1/M` with the
//! entry share (the first cell's slope) as a free, costless variable.
//!
//! The reported value is `-C_min <= 0`, the exponential rate of the event.
//!
//! The search is a multi-start projected gradient method. The feasible set
//! for the slope vector is the box `[0,1]^n` intersected with a band for the
//! slope sum (the endpoint constraint), onto which Euclidean projection is a
//! one-dimensional dual bisection. Warm starts cover the known structure of
//! the landscape: straight lines at the ends and middle of the feasible
//! band, the drift flow shot to the target (the zero-cost candidate), and a
//! few fixed pseudo-random slope vectors. Results merge deterministically by
//! exact cost comparison with lexicographic tie-breaking on path values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curves::{CurveKind, ScalarCurve};
use crate::dynamics::zero_cost_trajectory;
use crate::error::{Error, Result};
use crate::float::Real;
use crate::paths::LipschitzPath;
use crate::urn::UrnFunction;

use super::{bernoulli_kl, clamp01, EventSpec};

/// Outer iteration cap for one descent run.
const MAX_OUTER: usize = 500;
/// Step-halving cap inside one line search.
const MAX_BACKTRACK: usize = 60;
/// Sufficient-decrease constant of the line search.
const ARMIJO: f64 = 1e-4;
/// Consecutive near-stationary iterations before a run stops early.
const STALL_LIMIT: usize = 10;
/// Probabilities and slopes are kept this far from {0, 1} inside the smooth
/// objective so its logarithms stay finite; the final reported cost is
/// recomputed without it.
const CLAMP_EPS: f64 = 1e-12;
/// Seed of the fixed pseudo-random warm starts (arbitrary constant).
const START_SEED: u64 = 0x9E37_79B9;

/// The smooth discretized objective and its gradient.
struct Objective<'a, F: Real> {
    urn: &'a UrnFunction,
    /// Total number of cells `M`.
    m: usize,
    /// First variable cell; slopes before it are frozen by the pinned start.
    j0: usize,
    /// First cell whose relative entropy is charged.
    cost_start: usize,
    /// `phi(j0 / M)`.
    prefix: F,
    h: F,
}

impl<'a, F: Real> Objective<'a, F> {
    fn new(urn: &'a UrnFunction, m: usize, j0: usize, cost_start: usize, prefix: F) -> Self {
        Objective {
            urn,
            m,
            j0,
            cost_start,
            prefix,
            h: F::one() / F::cast_usize(m),
        }
    }

    fn tau_mid(&self, k: usize) -> F {
        (F::cast_usize(k) + F::half()) / F::cast_usize(self.m)
    }

    /// Smoothed cost: probabilities and slopes pulled `CLAMP_EPS` inside the
    /// unit interval. Always finite.
    fn cost(&self, z: &[F]) -> F {
        let eps = F::cast(CLAMP_EPS);
        let mut phi = self.prefix;
        let mut total = F::zero();
        for (i, &s) in z.iter().enumerate() {
            let k = self.j0 + i;
            let phi_mid = phi + self.h * s * F::half();
            phi += self.h * s;
            if k < self.cost_start {
                continue;
            }
            let psi = clamp01(phi_mid / self.tau_mid(k));
            let p = self
                .urn
                .eval_clamped(psi)
                .max(eps)
                .min(F::one() - eps);
            let sc = s.max(eps).min(F::one() - eps);
            total += self.h * bernoulli_kl(sc, p);
        }
        total
    }

    /// Reported cost: no interior clamps, each cell floored at zero so the
    /// value `-C` is exactly nonpositive. May be `+inf` for paths taking
    /// steps the urn forbids.
    fn cost_exact(&self, z: &[F]) -> F {
        let mut phi = self.prefix;
        let mut total = F::zero();
        for (i, &s) in z.iter().enumerate() {
            let k = self.j0 + i;
            let phi_mid = phi + self.h * s * F::half();
            phi += self.h * s;
            if k < self.cost_start {
                continue;
            }
            let psi = clamp01(phi_mid / self.tau_mid(k));
            let p = self.urn.eval_clamped(psi);
            total += self.h * bernoulli_kl(s, p).max(F::zero());
        }
        total
    }

    /// Gradient of [`Objective::cost`]. A slope `z_i` acts directly through
    /// its own cell's `KL(s_i || p_i)` and indirectly by shifting `phi`, and
    /// with it the share `psi_k`, of every later cell; the indirect part is
    /// accumulated with one suffix sum.
    fn grad(&self, z: &[F], g: &mut [F]) {
        let eps = F::cast(CLAMP_EPS);
        let n = z.len();
        let mut chain = vec![F::zero(); n];
        let mut phi = self.prefix;
        for (i, &s) in z.iter().enumerate() {
            let k = self.j0 + i;
            let phi_mid = phi + self.h * s * F::half();
            phi += self.h * s;
            g[i] = F::zero();
            if k < self.cost_start {
                continue;
            }
            let raw_psi = phi_mid / self.tau_mid(k);
            let psi = clamp01(raw_psi);
            let p = self
                .urn
                .eval_clamped(psi)
                .max(eps)
                .min(F::one() - eps);
            let sc = s.max(eps).min(F::one() - eps);
            g[i] = self.h
                * ((sc / (F::one() - sc)).ln() - (p / (F::one() - p)).ln());
            // The share saturates at the box edge: no sensitivity to phi.
            if raw_psi > F::zero() && raw_psi < F::one() {
                let dkl_dp = (p - sc) / (p * (F::one() - p));
                chain[i] =
                    self.h * dkl_dp * self.urn.derivative(psi) / self.tau_mid(k);
            }
        }
        // d psi_k / d z_i = h / tau_mid(k) for i < k, half that for i = k.
        let mut suffix = F::zero();
        for i in (0..n).rev() {
            g[i] += self.h * (suffix + chain[i] * F::half());
            suffix += chain[i];
        }
    }
}

/// Euclidean projection onto `[0,1]^n` intersected with
/// `{lo_sum <= sum z <= hi_sum}`: clamp after subtracting the dual shift of
/// the sum constraint, found by bisection (the clamped sum is monotone in
/// the shift).
fn project<F: Real>(z: &mut [F], lo_sum: F, hi_sum: F) {
    let boxed: F = z.iter().map(|&v| clamp01(v)).sum();
    let target = if boxed < lo_sum {
        lo_sum
    } else if boxed > hi_sum {
        hi_sum
    } else {
        for v in z.iter_mut() {
            *v = clamp01(*v);
        }
        return;
    };
    let mut lo = z.iter().copied().fold(F::infinity(), F::min) - F::one();
    let mut hi = z.iter().copied().fold(F::neg_infinity(), F::max);
    for _ in 0..100 {
        let mid = (lo + hi) * F::half();
        let s: F = z.iter().map(|&v| clamp01(v - mid)).sum();
        if s > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let shift = (lo + hi) * F::half();
    for v in z.iter_mut() {
        *v = clamp01(*v - shift);
    }
}

/// One projected-gradient descent run with a backtracking line search.
/// Returns the final iterate and its smoothed cost.
fn descend<F: Real>(obj: &Objective<'_, F>, mut z: Vec<F>, lo_sum: F, hi_sum: F) -> (Vec<F>, F) {
    project(&mut z, lo_sum, hi_sum);
    let n = z.len();
    let mut cost = obj.cost(&z);
    let mut g = vec![F::zero(); n];
    let mut step = F::one();
    let mut stalls = 0usize;
    for _ in 0..MAX_OUTER {
        obj.grad(&z, &mut g);
        let mut moved = false;
        for _ in 0..MAX_BACKTRACK {
            let mut cand: Vec<F> = z.iter().zip(&g).map(|(&v, &d)| v - step * d).collect();
            project(&mut cand, lo_sum, hi_sum);
            let dist2: F = cand
                .iter()
                .zip(&z)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            if dist2 > F::zero() {
                let cand_cost = obj.cost(&cand);
                if cand_cost <= cost - F::cast(ARMIJO) / step * dist2 {
                    let gain = cost - cand_cost;
                    z = cand;
                    cost = cand_cost;
                    step = (step * F::cast(1.5)).min(F::cast(1e6));
                    moved = true;
                    stalls = if gain <= F::cast(1e-13) * (F::one() + cost.abs()) {
                        stalls + 1
                    } else {
                        0
                    };
                    break;
                }
            }
            step *= F::half();
            if step < F::cast(1e-18) {
                break;
            }
        }
        if !moved || stalls >= STALL_LIMIT || cost <= F::zero() {
            break;
        }
    }
    (z, cost)
}

/// Slopes of the drift-following path from share `psi0` at the first
/// variable saturation; `None` when the flow cannot be integrated (stall or
/// structural error), in which case the caller just skips this warm start.
fn drift_start<F: Real>(urn: &UrnFunction, m: usize, j0: usize, psi0: F) -> Option<Vec<F>> {
    let mf = F::cast_usize(m);
    let start_cell = j0.max(1);
    let mut z = Vec::with_capacity(m - j0);
    if j0 == 0 {
        z.push(clamp01(psi0));
    }
    if start_cell == m {
        return Some(z);
    }
    let tau0 = F::cast_usize(start_cell) / mf;
    let taus: Vec<F> = (start_cell + 1..=m)
        .map(|k| F::cast_usize(k) / mf)
        .collect();
    let out = zero_cost_trajectory(urn, tau0, psi0, &taus).ok()?;
    if out.stalled_at.is_some() || out.trajectory.len() != taus.len() {
        return None;
    }
    let mut phi_prev = tau0 * psi0;
    for (t, p) in out.trajectory.points() {
        let phi = t * p;
        z.push(clamp01(mf * (phi - phi_prev)));
        phi_prev = phi;
    }
    Some(z)
}

/// Entry shares whose drift flow brackets or best-approaches the target
/// endpoint, found by bisection on the (monotone) flow endpoint map.
fn shooting_start<F: Real>(urn: &UrnFunction, m: usize, target: F) -> Option<Vec<F>> {
    let endpoint = |z: &[F]| -> F { z.iter().copied().sum::<F>() / F::cast_usize(m) };
    let z_lo = drift_start(urn, m, 0, F::zero())?;
    let z_hi = drift_start(urn, m, 0, F::one())?;
    if endpoint(&z_lo) >= target {
        return Some(z_lo);
    }
    if endpoint(&z_hi) <= target {
        return Some(z_hi);
    }
    let (mut lo, mut hi) = (F::zero(), F::one());
    let mut best = z_lo;
    for _ in 0..40 {
        let mid = (lo + hi) * F::half();
        let z = drift_start(urn, m, 0, mid)?;
        if endpoint(&z) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        best = z;
    }
    Some(best)
}

fn lex_less<F: Real>(a: &[F], b: &[F]) -> bool {
    for (&x, &y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Shared core of [`minimize_action`] and [`entropy_curve`]: minimize the
/// accumulated relative entropy subject to `phi(1)` in `[lo, hi]` and an
/// optional pinned start.
fn minimize_core<F: Real>(
    urn: &UrnFunction,
    start: Option<(F, F)>,
    (lo, hi): (F, F),
    segments: usize,
) -> Result<(LipschitzPath<F>, F)> {
    let m = segments;
    let mf = F::cast_usize(m);
    let slack = F::cast(1e-12);

    let (j0, prefix_slope) = match start {
        None => (0usize, None),
        Some((tau0, psi0)) => {
            let k0 = ((tau0.as_f64() * m as f64).round() as usize).clamp(1, m - 1);
            (k0, Some(psi0))
        }
    };
    let prefix = match prefix_slope {
        None => F::zero(),
        Some(psi0) => psi0 * F::cast_usize(j0) / mf,
    };
    let n = m - j0;

    // Reachability of the endpoint from the (possibly pinned) start.
    let reach_lo = prefix;
    let reach_hi = prefix + F::cast_usize(n) / mf;
    if lo > reach_hi + slack || hi < reach_lo - slack {
        return Err(Error::InfeasibleEvent(format!(
            "endpoint must land in [{lo}, {hi}] but phi(1) only reaches [{reach_lo}, {reach_hi}] \
             under the slope bounds"
        )));
    }
    let lo_sum = clamp_sum((lo - prefix) * mf, F::zero(), F::cast_usize(n));
    let hi_sum = clamp_sum((hi - prefix) * mf, lo_sum, F::cast_usize(n));

    let obj = Objective::new(urn, m, j0, j0.max(1), prefix);

    let mut starts: Vec<Vec<F>> = Vec::new();
    let mid_sum = (lo_sum + hi_sum) * F::half();
    for total in [mid_sum, lo_sum, hi_sum] {
        starts.push(vec![total / F::cast_usize(n); n]);
    }
    match prefix_slope {
        Some(psi0) => {
            if let Some(z) = drift_start(urn, m, j0, psi0) {
                starts.push(z);
            }
        }
        None => {
            let target = prefix + mid_sum / mf;
            if let Some(z) = shooting_start(urn, m, target) {
                starts.push(z);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    for _ in 0..4 {
        starts.push((0..n).map(|_| F::cast(rng.random::<f64>())).collect());
    }

    let mut best: Option<(F, Vec<F>)> = None;
    for start_z in starts {
        let (z, _) = descend(&obj, start_z, lo_sum, hi_sum);
        let exact = obj.cost_exact(&z);
        let better = match &best {
            None => true,
            Some((c, zb)) => exact < *c || (exact == *c && lex_less(&z, zb)),
        };
        if better {
            best = Some((exact, z));
        }
    }
    let (cost, z) = best.expect("at least one warm start");

    let mut slopes = Vec::with_capacity(m);
    if let Some(psi0) = prefix_slope {
        slopes.resize(j0, psi0);
    }
    slopes.extend_from_slice(&z);
    let path = LipschitzPath::new(build_values(&slopes))?;
    Ok((path, -cost))
}

fn clamp_sum<F: Real>(v: F, lo: F, hi: F) -> F {
    v.max(lo).min(hi)
}

/// Cumulative grid values of a slope vector, with the exact-zero offset.
fn build_values<F: Real>(slopes: &[F]) -> Vec<F> {
    let m = F::cast_usize(slopes.len());
    let mut values = Vec::with_capacity(slopes.len() + 1);
    let mut acc = F::zero();
    values.push(acc);
    for &s in slopes {
        acc += s / m;
        values.push(acc);
    }
    values
}

/// Minimize the accumulated relative entropy against the drift over paths
/// compatible with the event; returns the optimizing path and the value
/// `-C_min <= 0` (the exponential rate of the event).
///
/// The first grid cell sets the entry share and is never charged, so for
/// free-start events the value can differ from `action_report(path).entropy`
/// of the returned path by that one cell's contribution.
///
/// Infeasible events (endpoint interval out of reach from the pinned start
/// under the slope bounds `[0, 1]`) are reported as errors.
pub fn minimize_action<F: Real>(
    urn: &UrnFunction,
    event: &EventSpec<F>,
    segments: usize,
) -> Result<(LipschitzPath<F>, F)> {
    check_segments(segments)?;
    minimize_core(urn, event.start(), event.endpoint().interval(), segments)
}

/// Entropy density of the final share: for each grid point `x`, the rate of
/// the sharp endpoint event `phi(1) = x` computed by [`minimize_action`]'s
/// machinery with a width-zero target. Values are `<= 0`, with maximum zero
/// at the typical endpoints.
pub fn entropy_curve<F: Real>(
    urn: &UrnFunction,
    x_grid: &[F],
    segments: usize,
) -> Result<ScalarCurve<F>> {
    check_segments(segments)?;
    for &x in x_grid {
        if !(x >= F::zero() && x <= F::one()) {
            return Err(Error::Domain {
                what: "final share",
                value: x.as_f64(),
            });
        }
    }
    let mut values = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let (_, value) = minimize_core(urn, None, (x, x), segments)?;
        values.push(value);
    }
    ScalarCurve::new(CurveKind::EntropyDensity, x_grid.to_vec(), values)
}

fn check_segments(segments: usize) -> Result<()> {
    if segments < 8 {
        return Err(Error::InvalidArgument(format!(
            "need at least 8 path segments, got {segments}"
        )));
    }
    if segments > 1 << 20 {
        return Err(Error::InvalidArgument(format!(
            "path grid of {segments} segments is beyond the supported range"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    use crate::dp::{exact_distribution, WorkBudget};
    use crate::error::ErrorKind;
    use crate::history::Seed;

    const LN2: f64 = std::f64::consts::LN_2;

    fn binary_entropy(x: f64) -> f64 {
        -(x * x.ln() + (1.0 - x) * (1.0 - x).ln())
    }

    #[test]
    fn fair_coin_tilted_endpoint_matches_closed_form() {
        let urn = UrnFunction::constant(0.5).unwrap();
        let event = EventSpec::endpoint_eq(0.3, 1e-4).unwrap();
        let (path, value) = minimize_action(&urn, &event, 512).unwrap();
        assert!(value <= 0.0);
        assert_abs_diff_eq!(value, binary_entropy(0.3) - LN2, epsilon = 1e-3);
        // The endpoint lands inside the target window.
        let end = *path.values().last().unwrap();
        assert!((end - 0.3).abs() <= 1e-4 + 1e-9, "endpoint {end}");
        // The optimal path is straight past the entry cell.
        let slopes = path.slopes();
        let (min_s, max_s) = slopes[1..]
            .iter()
            .fold((1.0f64, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        assert!(max_s - min_s <= 1e-3, "slope spread {}", max_s - min_s);
    }

    #[test]
    fn majority_monopoly_is_free() {
        let urn = UrnFunction::majority(3).unwrap();
        let event = EventSpec::endpoint_eq(1.0, 0.01).unwrap();
        let (_, value) = minimize_action(&urn, &event, 256).unwrap();
        assert!(value <= 0.0);
        assert!(value >= -1e-3, "value {value}");
    }

    #[test]
    fn pinned_start_reaching_its_own_terminal_costs_nothing() {
        // The drift flow from (0.5, 0.2) under constant(0.8) ends exactly at
        // share 0.5, so that endpoint event is free and the optimizer must
        // recover the flow itself.
        let urn = UrnFunction::constant(0.8).unwrap();
        let event = EventSpec::endpoint_eq(0.5, 0.005)
            .unwrap()
            .with_pinned_start(0.5, 0.2)
            .unwrap();
        let (path, value) = minimize_action(&urn, &event, 256).unwrap();
        assert!(value <= 0.0);
        assert!(value >= -1e-6, "value {value}");
        // phi(tau) = tau psi(tau) with psi(tau) = 0.8 - 0.3 / tau past the pin.
        for k in [160usize, 192, 224, 256] {
            let tau = k as f64 / 256.0;
            let expected = tau * (0.8 - 0.3 / tau);
            assert_abs_diff_eq!(path.values()[k], expected, epsilon = 5e-3);
        }
        // And the frozen section really is the straight pinned segment.
        assert_abs_diff_eq!(path.values()[128], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(path.slope(10), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn unreachable_endpoint_is_infeasible() {
        let urn = UrnFunction::constant(0.5).unwrap();
        // phi(1) >= 0.45 from this pinned start, far above the target.
        let event = EventSpec::endpoint_eq(0.1, 0.01)
            .unwrap()
            .with_pinned_start(0.5, 0.9)
            .unwrap();
        let err = minimize_action(&urn, &event, 64).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::Infeasible, "{err}");
    }

    #[test]
    fn value_is_monotone_nonincreasing_under_grid_refinement() {
        let fair = UrnFunction::constant(0.5).unwrap();
        let event = EventSpec::endpoint_eq(0.3, 1e-4).unwrap();
        let values: Vec<f64> = [16usize, 64, 256]
            .iter()
            .map(|&m| minimize_action(&fair, &event, m).unwrap().1)
            .collect();
        assert!(values[0] >= values[1] - 1e-9, "{values:?}");
        assert!(values[1] >= values[2] - 1e-9, "{values:?}");

        let coupled = UrnFunction::linear(0.2, 0.6).unwrap();
        let event = EventSpec::endpoint_eq(0.7, 1e-3).unwrap();
        let values: Vec<f64> = [16usize, 64, 256]
            .iter()
            .map(|&m| minimize_action(&coupled, &event, m).unwrap().1)
            .collect();
        assert!(values[0] >= values[1] - 1e-9, "{values:?}");
        assert!(values[1] >= values[2] - 1e-9, "{values:?}");
    }

    #[test]
    fn fair_coin_entropy_curve_is_the_binomial_rate() {
        let urn = UrnFunction::constant(0.5).unwrap();
        let grid: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
        let curve = entropy_curve(&urn, &grid, 1024).unwrap();
        for (&x, &v) in curve.grid().iter().zip(curve.values()) {
            assert!(v <= 0.0);
            assert_abs_diff_eq!(v, binary_entropy(x) - LN2, epsilon = 1e-3);
        }
        // The typical endpoint x = 1/2 carries rate zero.
        let max = curve.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(max >= -1e-9 && max <= 0.0, "max {max}");
    }

    #[test]
    fn identity_drift_makes_every_endpoint_typical() {
        // pi(x) = x: any straight line follows the drift, so the whole
        // entropy curve collapses to zero.
        let urn = UrnFunction::linear(0.0, 1.0).unwrap();
        let grid: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
        let curve = entropy_curve(&urn, &grid, 256).unwrap();
        for &v in curve.values() {
            assert!(v <= 0.0);
            assert!(v >= -1e-12, "value {v}");
        }
    }

    #[test]
    fn entropy_curve_matches_exact_distribution_at_desk_scale() {
        // (1/T) log of the exact endpoint law vs the variational rate.
        let urn = UrnFunction::constant(0.8).unwrap();
        let t = 500u64;
        let dist =
            exact_distribution(&urn, t, Seed::new(1, 1).unwrap(), WorkBudget::default()).unwrap();
        let grid: Vec<f64> = (1..=19).map(|k| k as f64 * 0.05).collect();
        let curve = entropy_curve(&urn, &grid, 512).unwrap();
        for (&x, &v) in curve.grid().iter().zip(curve.values()) {
            let k = (x * t as f64).round() as u64;
            let p = dist.prob_of_black(k);
            assert!(p > 0.0, "empty bin at {x}");
            let dp_rate = p.ln() / t as f64;
            assert_abs_diff_eq!(v, dp_rate, epsilon = 0.03);
        }
    }

    #[test]
    fn validation_errors() {
        let urn = UrnFunction::constant(0.5).unwrap();
        let event = EventSpec::endpoint_eq(0.3, 0.01).unwrap();
        assert!(minimize_action(&urn, &event, 4).is_err());
        assert!(entropy_curve(&urn, &[0.2, 1.4], 64).is_err());
        assert!(entropy_curve(&urn, &[-0.1, 0.5], 64).is_err());
    }
}
