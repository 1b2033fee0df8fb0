//! Recovering the urn function from an observed share trajectory.
//!
//! Along a zero-cost trajectory, `log tau` as a function of the share equals
//! the transformed urn function up to an additive constant, and
//! `pi(psi) = psi + (d log tau / d psi)^-1`. These estimators invert that
//! relation: [`estimate_transformed`] plots the raw curve, while
//! [`estimate_urn_function`] smooths it with local linear regression and
//! differentiates the smooth.

use crate::curves::{CurveKind, ScalarCurve};
use crate::error::{Error, Result};
use crate::float::Real;
use crate::paths::Trajectory;

/// Grid points in the bandwidth window below which an estimate is flagged
/// as sparse.
const SPARSE_WINDOW: usize = 10;

/// Most grid points an estimate will report.
const MAX_GRID: usize = 512;

/// Smoothed inverse-trajectory estimate of an urn function.
///
/// Defined over the interior of the visited share range (half a bandwidth
/// trimmed at each end against boundary bias). `pi_hat` is clamped to
/// `[0, 1]`; clamping and sparse windows are surfaced in `warnings`.
#[derive(Debug, Clone)]
pub struct InverseEstimate<F: Real = f64> {
    psi_grid: Vec<F>,
    pi_hat: Vec<F>,
    density: Vec<F>,
    tau_of_psi: Vec<F>,
    sparse: Vec<bool>,
    bandwidth: F,
    warnings: Vec<String>,
}

impl<F: Real> InverseEstimate<F> {
    /// Strictly increasing shares where the estimate is defined.
    pub fn psi_grid(&self) -> &[F] {
        &self.psi_grid
    }

    /// Estimated urn-function values, clamped to `[0, 1]`.
    pub fn pi_hat(&self) -> &[F] {
        &self.pi_hat
    }

    /// Samples inside the bandwidth window of each grid point.
    pub fn density(&self) -> &[F] {
        &self.density
    }

    /// Smoothed saturation at each grid share (the inverse trajectory).
    pub fn tau_of_psi(&self) -> &[F] {
        &self.tau_of_psi
    }

    /// Whether each grid point had a sparse window.
    pub fn sparse(&self) -> &[bool] {
        &self.sparse
    }

    pub fn bandwidth(&self) -> F {
        self.bandwidth
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

/// Merge runs of equal shares (averaging `log tau`) and demand one strict
/// direction of motion; returns `(psi, log tau)` in time order.
fn merged_monotone<F: Real>(traj: &Trajectory<F>) -> Result<(Vec<F>, Vec<F>)> {
    let mut psis: Vec<F> = Vec::new();
    let mut logs: Vec<F> = Vec::new();
    let mut i = 0;
    let (ts, ps) = (traj.taus(), traj.psis());
    while i < ps.len() {
        let mut j = i + 1;
        let mut acc = ts[i].ln();
        while j < ps.len() && ps[j] == ps[i] {
            acc += ts[j].ln();
            j += 1;
        }
        psis.push(ps[i]);
        logs.push(acc / F::cast_usize(j - i));
        i = j;
    }
    if psis.len() < 2 {
        return Err(Error::NotInvertible(
            "share is constant along the trajectory".into(),
        ));
    }
    let up = psis[1] > psis[0];
    let strict = if up {
        psis.windows(2).all(|w| w[0] < w[1])
    } else {
        psis.windows(2).all(|w| w[0] > w[1])
    };
    if !strict {
        return Err(Error::NotInvertible(
            "share trajectory is not strictly monotone; saturation is not a function of the share"
                .into(),
        ));
    }
    Ok((psis, logs))
}

/// The raw inverse-trajectory curve `(psi, log tau(psi))`.
///
/// For an exact zero-cost trajectory this equals the transformed urn
/// function up to an additive constant. Runs of equal shares are merged by
/// averaging `log tau`; beyond that the share must move strictly in one
/// direction, otherwise saturation is not a function of the share.
pub fn estimate_transformed<F: Real>(traj: &Trajectory<F>) -> Result<ScalarCurve<F>> {
    let (mut psis, mut logs) = merged_monotone(traj)?;
    if psis[0] > psis[1] {
        psis.reverse();
        logs.reverse();
    }
    ScalarCurve::new(CurveKind::LogSaturation, psis, logs)
}

/// Largest excursion against the overall direction of motion.
fn counter_trend_drawdown<F: Real>(psis: &[F], rising: bool) -> F {
    let mut extreme = psis[0];
    let mut worst = F::zero();
    for &p in psis {
        if rising {
            extreme = extreme.max(p);
            worst = worst.max(extreme - p);
        } else {
            extreme = extreme.min(p);
            worst = worst.max(p - extreme);
        }
    }
    worst
}

/// Epanechnikov-weighted window sums in share coordinates centred at the
/// nominal grid point (`d = psi - x`), which keeps the normal-equation
/// cancellations benign.
struct WindowSums<F> {
    w: F,
    wd: F,
    wdd: F,
    wddd: F,
    wt: F,
    wdt: F,
}

fn window_sums<F: Real>(psi: &[F], t: &[F], x: F, h: F, i0: usize, i1: usize) -> WindowSums<F> {
    let mut s = WindowSums {
        w: F::zero(),
        wd: F::zero(),
        wdd: F::zero(),
        wddd: F::zero(),
        wt: F::zero(),
        wdt: F::zero(),
    };
    for i in i0..i1 {
        let d = psi[i] - x;
        let u = d / h;
        let w = F::cast(0.75) * (F::one() - u * u);
        s.w += w;
        s.wd += w * d;
        s.wdd += w * d * d;
        s.wddd += w * d * d * d;
        s.wt += w * t[i];
        s.wdt += w * d * t[i];
    }
    s
}

/// Estimate the urn function from an observed trajectory.
///
/// Fits `log tau` against the share by local linear regression with an
/// Epanechnikov kernel of half-width `bandwidth` (default: 5% of the visited
/// share range), then reads off `pi(psi) = psi + 1/slope`. The trajectory
/// must be monotone at the bandwidth scale: its largest counter-trend
/// excursion must not exceed the bandwidth.
pub fn estimate_urn_function<F: Real>(
    traj: &Trajectory<F>,
    bandwidth: Option<F>,
) -> Result<InverseEstimate<F>> {
    let ps = traj.psis();
    let ts = traj.taus();
    if ps.len() < 2 {
        return Err(Error::NotInvertible(
            "trajectory has fewer than two samples".into(),
        ));
    }
    let mut lo = ps[0];
    let mut hi = ps[0];
    for &p in ps {
        lo = lo.min(p);
        hi = hi.max(p);
    }
    let span = hi - lo;
    if span <= F::zero() {
        return Err(Error::NotInvertible(
            "share is constant along the trajectory".into(),
        ));
    }
    let h = match bandwidth {
        Some(b) => {
            if !(b > F::zero() && b.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "bandwidth must be positive and finite, got {b}"
                )));
            }
            b
        }
        None => span * F::cast(0.05),
    };

    let rising = *ps.last().unwrap() >= ps[0];
    let drawdown = counter_trend_drawdown(ps, rising);
    if drawdown > h {
        return Err(Error::NotInvertible(format!(
            "trajectory is not monotone at the bandwidth scale: counter-trend excursion \
             {drawdown} exceeds bandwidth {h}"
        )));
    }

    let grid_lo = lo + h * F::half();
    let grid_hi = hi - h * F::half();
    if !(grid_lo < grid_hi) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth {h} too large for the visited share range [{lo}, {hi}]"
        )));
    }

    // Samples sorted by share; ties broken by saturation for determinism.
    let mut order: Vec<usize> = (0..ps.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        (ps[a], ts[a]).partial_cmp(&(ps[b], ts[b])).unwrap()
    });
    let psi_sorted: Vec<F> = order.iter().map(|&i| ps[i]).collect();
    let t_sorted: Vec<F> = order.iter().map(|&i| ts[i].ln()).collect();

    let trimmed = grid_hi - grid_lo;
    let target = (trimmed / (h / F::cast(8.0))).as_f64().ceil() as usize + 1;
    let npts = target.clamp(9, MAX_GRID);

    let mut psi_grid = Vec::new();
    let mut pi_hat = Vec::new();
    let mut density = Vec::new();
    let mut tau_of_psi = Vec::new();
    let mut sparse = Vec::new();
    let mut sparse_count = 0usize;
    let mut clamped_count = 0usize;

    for g in 0..npts {
        let x = grid_lo + trimmed * F::cast_usize(g) / F::cast_usize(npts - 1);
        let i0 = psi_sorted.partition_point(|&p| p <= x - h);
        let i1 = psi_sorted.partition_point(|&p| p < x + h);
        let count = i1 - i0;
        if count < 2 {
            continue;
        }
        let s = window_sums(&psi_sorted, &t_sorted, x, h, i0, i1);
        let denom = s.w * s.wdd - s.wd * s.wd;
        if !(denom > F::zero()) || !denom.is_finite() {
            continue;
        }
        let slope = (s.w * s.wdt - s.wd * s.wt) / denom;
        // The fitted slope equals the true derivative at the window's
        // third-order-correct centre (weighted mean shifted by half the
        // standardized skewness), not at the nominal x; reporting there
        // removes the boundary and density-asymmetry bias of local
        // regression.
        let mean_d = s.wd / s.w;
        let m2 = s.wdd - mean_d * s.wd;
        let m3 = s.wddd - F::cast(3.0) * mean_d * s.wdd + F::two() * mean_d * mean_d * s.wd;
        if !(m2 > F::zero()) {
            continue;
        }
        let centre = x + mean_d + m3 / (F::two() * m2);
        let t_at_centre = s.wt / s.w + slope * (centre - x - mean_d);
        let raw = centre + slope.recip();
        if raw.is_nan() || !centre.is_finite() {
            continue;
        }
        if let Some(&prev) = psi_grid.last() {
            if centre <= prev {
                continue;
            }
        }
        let clamped = raw.max(F::zero()).min(F::one());
        if clamped != raw {
            clamped_count += 1;
        }
        let is_sparse = count < SPARSE_WINDOW;
        if is_sparse {
            sparse_count += 1;
        }
        psi_grid.push(centre);
        pi_hat.push(clamped);
        density.push(F::cast_usize(count));
        tau_of_psi.push(t_at_centre.exp());
        sparse.push(is_sparse);
    }

    if psi_grid.len() < 2 {
        return Err(Error::NotInvertible(
            "too few populated windows to estimate the urn function".into(),
        ));
    }

    let mut warnings = Vec::new();
    if sparse_count > 0 {
        warnings.push(format!(
            "sparse data: {sparse_count} of {} grid points have fewer than {SPARSE_WINDOW} \
             samples in the bandwidth window",
            psi_grid.len()
        ));
    }
    if clamped_count > 0 {
        warnings.push(format!(
            "estimate clamped to [0, 1] at {clamped_count} of {} grid points",
            psi_grid.len()
        ));
    }

    Ok(InverseEstimate {
        psi_grid,
        pi_hat,
        density,
        tau_of_psi,
        sparse,
        bandwidth: h,
        warnings,
    })
}
