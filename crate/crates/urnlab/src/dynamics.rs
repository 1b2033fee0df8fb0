//! Scaling-limit dynamics: fixed points of the urn function, the transformed
//! urn function (an antiderivative of `1/(pi(a) - a)`), and zero-cost
//! trajectories solving `d psi / d tau = (pi(psi) - psi) / tau`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::float::Real;
use crate::ode;
use crate::paths::Trajectory;
use crate::quad::adaptive_simpson;
use crate::urn::UrnFunction;

/// Cells in the root-isolation scan of `pi(x) - x`.
const SCAN_CELLS: usize = 10_000;

/// Absolute tolerance of the adaptive trajectory integrator.
const ODE_TOL: f64 = 1e-9;

/// Per-segment tolerance of the transform quadrature.
const QUAD_TOL: f64 = 1e-13;

/// How a fixed point of `pi` crosses the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointKind {
    /// `pi` crosses from above to below: the drift pushes shares toward the
    /// point from both sides.
    DowncrossingStable,
    /// `pi` crosses from below to above: the drift pushes shares away.
    UpcrossingUnstable,
    /// `pi` touches the diagonal without crossing.
    TangentDegenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint<F: Real = f64> {
    pub x: F,
    pub kind: FixedPointKind,
}

/// All fixed points of an urn function, sorted by location.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointSet<F: Real = f64> {
    points: Vec<FixedPoint<F>>,
}

impl<F: Real> FixedPointSet<F> {
    pub fn points(&self) -> &[FixedPoint<F>] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &FixedPoint<F>> {
        self.points.iter()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Locations only, in increasing order.
    pub fn locations(&self) -> Vec<F> {
        self.points.iter().map(|p| p.x).collect()
    }
}

fn sign_of<F: Real>(v: F, zero_eps: F) -> i8 {
    if v.abs() <= zero_eps {
        0
    } else if v > F::zero() {
        1
    } else {
        -1
    }
}

/// Locate and classify every solution of `pi(x) = x` on `[0, 1]`.
///
/// Roots are isolated on a uniform scan grid and polished by bisection;
/// one-sided drift decides the label at the boundary points 0 and 1.
/// Families whose drift vanishes identically on an interval (proportional
/// reinforcement being the canonical case) are rejected with the offending
/// interval, since classification is meaningless there.
///
/// `tol` is the residual threshold for accepting a tangency (a touch of the
/// diagonal without sign change) as a fixed point.
pub fn fixed_points<F: Real>(urn: &UrnFunction, tol: F) -> Result<FixedPointSet<F>> {
    if !(tol > F::zero()) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let g = |x: F| urn.eval_clamped(x) - x;
    let n = SCAN_CELLS;
    let step = F::one() / F::cast_usize(n);
    let zero_eps = F::epsilon() * F::cast(8.0);

    let xs: Vec<F> = (0..=n).map(|i| F::cast_usize(i) * step).collect();
    let gs: Vec<F> = xs.iter().map(|&x| g(x)).collect();

    // Exact-zero runs of three or more scan points mean the drift vanishes
    // on an interval, not at isolated points.
    let mut run_start = None;
    for i in 0..=n {
        let zero = gs[i].abs() <= zero_eps;
        match (zero, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                if i - s >= 3 {
                    return Err(Error::DegenerateFamily {
                        lo: xs[s].as_f64(),
                        hi: xs[i - 1].as_f64(),
                    });
                }
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        if n + 1 - s >= 3 {
            return Err(Error::DegenerateFamily {
                lo: xs[s].as_f64(),
                hi: 1.0,
            });
        }
    }

    let mut found: Vec<(F, FixedPointKind)> = Vec::new();

    let classify_interior = |left: i8, right: i8| -> FixedPointKind {
        match (left, right) {
            (1, -1) => FixedPointKind::DowncrossingStable,
            (-1, 1) => FixedPointKind::UpcrossingUnstable,
            _ => FixedPointKind::TangentDegenerate,
        }
    };

    // Scan-grid zeros (exact hits) first, then sign changes between them.
    for i in 0..=n {
        if gs[i].abs() > zero_eps {
            continue;
        }
        let left = if i == 0 { None } else { Some(sign_of(gs[i - 1], zero_eps)) };
        let right = if i == n { None } else { Some(sign_of(gs[i + 1], zero_eps)) };
        let kind = match (left, right) {
            // Boundary points classified by the one interior side.
            (None, Some(-1)) => FixedPointKind::DowncrossingStable,
            (None, Some(1)) => FixedPointKind::UpcrossingUnstable,
            (Some(1), None) => FixedPointKind::DowncrossingStable,
            (Some(-1), None) => FixedPointKind::UpcrossingUnstable,
            (Some(l), Some(r)) => classify_interior(l, r),
            // Flanked by another exact zero: defer to the neighbor handling.
            _ => FixedPointKind::TangentDegenerate,
        };
        found.push((xs[i], kind));
    }

    for i in 0..n {
        let sl = sign_of(gs[i], zero_eps);
        let sr = sign_of(gs[i + 1], zero_eps);
        if sl == 0 || sr == 0 || sl == sr {
            continue;
        }
        // Transversal crossing inside the cell: bisect.
        let mut lo = xs[i];
        let mut hi = xs[i + 1];
        let mut glo = gs[i];
        for _ in 0..200 {
            if hi - lo <= F::epsilon() * F::cast(4.0) * hi.max(F::one()) {
                break;
            }
            let mid = (lo + hi) * F::half();
            let gm = g(mid);
            if (gm > F::zero()) == (glo > F::zero()) {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
            }
        }
        let root = (lo + hi) * F::half();
        found.push((root, classify_interior(sl, sr)));
    }

    // Tangencies: interior local minima of |g| that dip below `tol` without a
    // sign change nearby.
    for i in 1..n {
        let a = gs[i - 1].abs();
        let b = gs[i].abs();
        let c = gs[i + 1].abs();
        if b > tol || b > a || b > c || b <= zero_eps {
            continue;
        }
        if sign_of(gs[i - 1], zero_eps) != sign_of(gs[i + 1], zero_eps) {
            continue; // transversal, already handled
        }
        // Parabolic refinement of the minimum of |g|.
        let denom = a - F::two() * b + c;
        let shift = if denom.abs() > F::epsilon() {
            ((a - c) / denom) * F::half() * step
        } else {
            F::zero()
        };
        let x_min = (xs[i] + shift).max(F::zero()).min(F::one());
        if g(x_min).abs() <= tol {
            found.push((x_min, FixedPointKind::TangentDegenerate));
        }
    }

    found.sort_by(|u, v| u.0.partial_cmp(&v.0).unwrap());
    // Merge hits closer than two scan cells; transversal labels win over
    // tangent labels for the same root.
    let mut points: Vec<FixedPoint<F>> = Vec::new();
    for (x, kind) in found {
        match points.last_mut() {
            Some(last) if (x - last.x).abs() <= step * F::two() => {
                if last.kind == FixedPointKind::TangentDegenerate
                    && kind != FixedPointKind::TangentDegenerate
                {
                    last.kind = kind;
                }
            }
            _ => points.push(FixedPoint { x, kind }),
        }
    }
    Ok(FixedPointSet { points })
}

/// Scan for fixed points without classification; tolerant of degenerate
/// families (returns the approximate zero set). Internal helper for routines
/// that only need locations.
pub(crate) fn zero_drift_locations(urn: &UrnFunction) -> Vec<f64> {
    match fixed_points::<f64>(urn, 1e-11) {
        Ok(set) => set.locations(),
        Err(_) => Vec::new(),
    }
}

/// The transformed urn function `Pi` on an open interval free of fixed
/// points: a strictly monotone antiderivative of `1/(pi(a) - a)`, anchored
/// so that `Pi((lo + hi)/2) = 0`.
///
/// Along a zero-cost trajectory, `Pi(psi) - Pi(psi0) = log(tau / tau0)`; the
/// inverse of `Pi` therefore transports shares along saturation.
#[derive(Debug, Clone)]
pub struct TransformedUrn<F: Real = f64> {
    urn: UrnFunction,
    lo: F,
    hi: F,
    grid: Vec<F>,
    values: Vec<F>,
    increasing: bool,
}

/// Build [`TransformedUrn`] with grid spacing `step`. The grid is strictly
/// interior to `(lo, hi)`; the interval must contain no fixed point of the
/// urn function (its endpoints may be fixed points).
pub fn transformed_urn_function<F: Real>(
    urn: &UrnFunction,
    lo: F,
    hi: F,
    step: F,
) -> Result<TransformedUrn<F>> {
    if !(F::zero() <= lo && lo < hi && hi <= F::one()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= lo < hi <= 1, got ({lo}, {hi})"
        )));
    }
    if !(step > F::zero()) {
        return Err(Error::InvalidArgument(format!(
            "grid step must be positive, got {step}"
        )));
    }
    let margin = F::cast(2.0 / SCAN_CELLS as f64);
    for root in zero_drift_locations(urn) {
        let r = F::cast(root);
        if r > lo + margin && r < hi - margin {
            return Err(Error::SingularTransform {
                lo: lo.as_f64(),
                hi: hi.as_f64(),
                at: root,
            });
        }
    }

    let mut grid = Vec::new();
    let mut x = lo + step;
    while x < hi {
        grid.push(x);
        x += step;
    }
    if grid.len() < 2 {
        return Err(Error::InvalidArgument(
            "step leaves fewer than two interior grid points".into(),
        ));
    }

    let urn_local = urn.clone();
    let integrand = move |a: F| F::one() / (urn_local.eval_clamped(a) - a);
    let anchor = (lo + hi) * F::half();
    let tol = F::cast(QUAD_TOL);

    // Cumulative integrals from the anchor outwards.
    let split = grid.partition_point(|&v| v < anchor);
    let mut values = vec![F::zero(); grid.len()];
    let mut acc = F::zero();
    let mut prev = anchor;
    for i in (0..split).rev() {
        acc += adaptive_simpson(&integrand, prev, grid[i], tol);
        values[i] = acc;
        prev = grid[i];
    }
    acc = F::zero();
    prev = anchor;
    for i in split..grid.len() {
        acc += adaptive_simpson(&integrand, prev, grid[i], tol);
        values[i] = acc;
        prev = grid[i];
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "transform quadrature diverged; drift may vanish inside the interval".into(),
        ));
    }

    let increasing = values.last().unwrap() > values.first().unwrap();
    let sorted = if increasing {
        values.windows(2).all(|w| w[0] < w[1])
    } else {
        values.windows(2).all(|w| w[0] > w[1])
    };
    if !sorted {
        return Err(Error::Numerical(
            "transform is not strictly monotone on the requested interval".into(),
        ));
    }

    Ok(TransformedUrn {
        urn: urn.clone(),
        lo,
        hi,
        grid,
        values,
        increasing,
    })
}

impl<F: Real> TransformedUrn<F> {
    pub fn domain(&self) -> (F, F) {
        (self.lo, self.hi)
    }

    pub fn grid(&self) -> &[F] {
        &self.grid
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    fn integrand(&self, a: F) -> F {
        F::one() / (self.urn.eval_clamped(a) - a)
    }

    /// `Pi(alpha)` for `alpha` strictly inside the domain: nearest cached
    /// grid value plus a short quadrature correction.
    pub fn eval(&self, alpha: F) -> Result<F> {
        if !(alpha > self.lo && alpha < self.hi) {
            return Err(Error::InvalidArgument(format!(
                "alpha {alpha} outside the open interval ({}, {})",
                self.lo, self.hi
            )));
        }
        let i = match self
            .grid
            .binary_search_by(|v| v.partial_cmp(&alpha).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i == self.grid.len() => i - 1,
            Err(i) => {
                if alpha - self.grid[i - 1] <= self.grid[i] - alpha {
                    i - 1
                } else {
                    i
                }
            }
        };
        let tol = F::cast(QUAD_TOL);
        let f = |a: F| self.integrand(a);
        Ok(self.values[i] + adaptive_simpson(&f, self.grid[i], alpha, tol))
    }

    /// Solve `Pi(alpha) = y` by bisection; monotonicity makes the solution
    /// unique when it exists inside the domain.
    pub fn invert(&self, y: F) -> Result<F> {
        let up = self.increasing;
        let key = |v: F| if up { v } else { -v };
        let target = key(y);

        // Bracket on the cached grid, expanding toward an endpoint when the
        // target lies beyond the cached range (Pi diverges only at fixed
        // points, so expansion either brackets or runs out of room).
        let first = key(self.values[0]);
        let last = key(*self.values.last().unwrap());
        let (mut lo_x, mut hi_x);
        if target < first {
            let mut outer = self.grid[0];
            let mut inner = self.grid[0];
            let mut gap = outer - self.lo;
            let mut ok = false;
            for _ in 0..60 {
                gap = gap * F::half();
                let probe = self.lo + gap;
                if probe >= inner {
                    break;
                }
                if key(self.eval(probe)?) <= target {
                    outer = probe;
                    ok = true;
                    break;
                }
                inner = probe;
            }
            if !ok {
                return Err(Error::Numerical(format!(
                    "transform inversion target {y} unreachable near {}",
                    self.lo
                )));
            }
            lo_x = outer;
            hi_x = self.grid[0];
        } else if target > last {
            let mut inner = *self.grid.last().unwrap();
            let mut outer = inner;
            let mut gap = self.hi - inner;
            let mut ok = false;
            for _ in 0..60 {
                gap = gap * F::half();
                let probe = self.hi - gap;
                if probe <= inner {
                    break;
                }
                if key(self.eval(probe)?) >= target {
                    outer = probe;
                    ok = true;
                    break;
                }
                inner = probe;
            }
            if !ok {
                return Err(Error::Numerical(format!(
                    "transform inversion target {y} unreachable near {}",
                    self.hi
                )));
            }
            lo_x = *self.grid.last().unwrap();
            hi_x = outer;
        } else {
            let i = self.values.partition_point(|&v| key(v) < target);
            lo_x = if i == 0 { self.grid[0] } else { self.grid[i - 1] };
            hi_x = self.grid[i.min(self.grid.len() - 1)];
            if lo_x == hi_x {
                return Ok(lo_x);
            }
        }

        for _ in 0..90 {
            if hi_x - lo_x <= F::epsilon() * F::cast(4.0) {
                break;
            }
            let mid = (lo_x + hi_x) * F::half();
            if key(self.eval(mid)?) < target {
                lo_x = mid;
            } else {
                hi_x = mid;
            }
        }
        Ok((lo_x + hi_x) * F::half())
    }
}

/// A zero-cost trajectory, possibly cut short by step-size underflow.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome<F: Real = f64> {
    pub trajectory: Trajectory<F>,
    /// Saturation reached when integration stalled; `None` on full success.
    pub stalled_at: Option<F>,
}

fn check_start<F: Real>(tau0: F, psi0: F) -> Result<()> {
    if !(tau0 > F::zero() && tau0 <= F::one()) {
        return Err(Error::InvalidArgument(format!(
            "initial saturation must lie in (0, 1], got {tau0}"
        )));
    }
    if !(psi0 >= F::zero() && psi0 <= F::one()) {
        return Err(Error::Domain {
            what: "initial share",
            value: psi0.as_f64(),
        });
    }
    Ok(())
}

fn check_grid<F: Real>(tau0: F, taus: &[F]) -> Result<()> {
    if taus.is_empty() {
        return Err(Error::InvalidArgument("output grid is empty".into()));
    }
    if taus[0] < tau0 {
        return Err(Error::InvalidArgument(format!(
            "output grid starts at {} before the initial saturation {tau0}",
            taus[0]
        )));
    }
    if *taus.last().unwrap() > F::one() {
        return Err(Error::InvalidArgument(
            "output grid extends beyond saturation 1".into(),
        ));
    }
    if taus.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "output grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Solve the scaling-limit Cauchy problem
/// `d psi / d tau = (pi(psi) - psi) / tau`, `psi(tau0) = psi0`,
/// reporting the share at each requested saturation.
///
/// Starts within rounding of a fixed point stay put exactly. Step-size
/// underflow (possible near strongly repulsive points) yields the partial
/// trajectory plus the saturation reached, rather than an error.
pub fn zero_cost_trajectory<F: Real>(
    urn: &UrnFunction,
    tau0: F,
    psi0: F,
    taus: &[F],
) -> Result<TrajectoryOutcome<F>> {
    check_start(tau0, psi0)?;
    check_grid(tau0, taus)?;

    if (urn.eval_clamped(psi0) - psi0).abs() <= F::epsilon() * F::cast(16.0) {
        let trajectory = Trajectory::new(taus.to_vec(), vec![psi0; taus.len()])?;
        return Ok(TrajectoryOutcome {
            trajectory,
            stalled_at: None,
        });
    }

    let f = |tau: F, psi: F| (urn.eval_clamped(psi) - psi.max(F::zero()).min(F::one())) / tau;
    let sol = ode::integrate_to_grid(&f, tau0, psi0, taus, F::cast(ODE_TOL));
    let psis: Vec<F> = sol
        .values
        .iter()
        .map(|&p| p.max(F::zero()).min(F::one()))
        .collect();
    let covered = &taus[..psis.len()];
    if covered.is_empty() {
        return Err(Error::Numerical(
            "integration stalled before the first output point".into(),
        ));
    }
    let trajectory = Trajectory::new(covered.to_vec(), psis)?;
    Ok(TrajectoryOutcome {
        trajectory,
        stalled_at: sol.stall.map(|s| s.at),
    })
}

/// The share at full saturation, `psi(1)`.
pub fn terminal_point<F: Real>(urn: &UrnFunction, tau0: F, psi0: F) -> Result<F> {
    if tau0 == F::one() {
        check_start(tau0, psi0)?;
        return Ok(psi0);
    }
    let out = zero_cost_trajectory(urn, tau0, psi0, &[F::one()])?;
    if let Some(at) = out.stalled_at {
        return Err(Error::Numerical(format!(
            "stiff integration: step size underflowed at saturation {at}"
        )));
    }
    Ok(out.trajectory.last().1)
}

/// Solve the same Cauchy problem through the transformed urn function:
/// `psi(tau) = Pi^-1(Pi(psi0) + log(tau/tau0))`. Valid when no fixed point
/// separates `psi0` from the solution range; used to cross-check the
/// integrator.
pub fn zero_cost_trajectory_via_transform<F: Real>(
    urn: &UrnFunction,
    tau0: F,
    psi0: F,
    taus: &[F],
) -> Result<Trajectory<F>> {
    check_start(tau0, psi0)?;
    check_grid(tau0, taus)?;

    if (urn.eval_clamped(psi0) - psi0).abs() <= F::epsilon() * F::cast(16.0) {
        return Trajectory::new(taus.to_vec(), vec![psi0; taus.len()]);
    }

    // Basin of psi0: the gap between adjacent fixed points (or 0/1).
    let mut lo = F::zero();
    let mut hi = F::one();
    for root in zero_drift_locations(urn) {
        let r = F::cast(root);
        if r <= psi0 && r > lo {
            lo = r;
        }
        if r >= psi0 && r < hi {
            hi = r;
        }
    }
    if !(lo < psi0 && psi0 < hi) {
        // psi0 within scan resolution of a fixed point but not within the
        // exact-arithmetic guard above: treat as pinned.
        return Trajectory::new(taus.to_vec(), vec![psi0; taus.len()]);
    }
    let step = (hi - lo) / F::cast(1024.0);
    let transform = transformed_urn_function(urn, lo, hi, step)?;
    let at_start = transform.eval(psi0)?;
    let mut psis = Vec::with_capacity(taus.len());
    for &tau in taus {
        let target = at_start + (tau / tau0).ln();
        psis.push(transform.invert(target)?);
    }
    Trajectory::new(taus.to_vec(), psis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn kinds(set: &FixedPointSet) -> Vec<(f64, FixedPointKind)> {
        set.iter().map(|p| (p.x, p.kind)).collect()
    }

    #[test]
    fn constant_family_has_single_stable_point() {
        let set = fixed_points(&UrnFunction::constant(0.8).unwrap(), 1e-9).unwrap();
        let pts = kinds(&set);
        assert_eq!(pts.len(), 1);
        assert_abs_diff_eq!(pts[0].0, 0.8, epsilon = 1e-9);
        assert_eq!(pts[0].1, FixedPointKind::DowncrossingStable);
    }

    #[test]
    fn linear_family_crossing() {
        let set = fixed_points(&UrnFunction::linear(0.2, 0.6).unwrap(), 1e-9).unwrap();
        let pts = kinds(&set);
        assert_eq!(pts.len(), 1);
        assert_abs_diff_eq!(pts[0].0, 0.5, epsilon = 1e-9);
        assert_eq!(pts[0].1, FixedPointKind::DowncrossingStable);
    }

    #[test]
    fn majority_has_two_stable_lock_ins_and_an_unstable_tie() {
        for m in [3u32, 5, 7] {
            let set = fixed_points(&UrnFunction::majority(m).unwrap(), 1e-9).unwrap();
            let pts = kinds(&set);
            assert_eq!(pts.len(), 3, "m = {m}");
            assert_abs_diff_eq!(pts[0].0, 0.0, epsilon = 1e-9);
            assert_eq!(pts[0].1, FixedPointKind::DowncrossingStable);
            assert_abs_diff_eq!(pts[1].0, 0.5, epsilon = 1e-9);
            assert_eq!(pts[1].1, FixedPointKind::UpcrossingUnstable);
            assert_abs_diff_eq!(pts[2].0, 1.0, epsilon = 1e-9);
            assert_eq!(pts[2].1, FixedPointKind::DowncrossingStable);
        }
    }

    #[test]
    fn proportional_reinforcement_is_degenerate() {
        let err = fixed_points::<f64>(&UrnFunction::linear(0.0, 1.0).unwrap(), 1e-9).unwrap_err();
        match err {
            Error::DegenerateFamily { lo, hi } => {
                assert!(lo <= 1e-4 && hi >= 1.0 - 1e-4, "[{lo}, {hi}]");
            }
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn diagonal_table_segment_is_degenerate() {
        let urn = UrnFunction::table(vec![0.0, 0.3, 0.6, 1.0], vec![0.0, 0.3, 0.2, 0.9]).unwrap();
        let err = fixed_points::<f64>(&urn, 1e-9).unwrap_err();
        match err {
            Error::DegenerateFamily { lo, hi } => {
                assert!(lo <= 1e-4, "lo = {lo}");
                assert_abs_diff_eq!(hi, 0.3, epsilon = 1e-3);
            }
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn tangent_touch_is_labelled_degenerate() {
        // Piecewise-linear pi dips to the diagonal at 0.5 from above and
        // returns above it; also a stable boundary point at 1.
        let urn = UrnFunction::table(
            vec![0.0, 0.5, 0.75, 1.0],
            vec![0.7, 0.5, 0.8, 1.0],
        )
        .unwrap();
        let set = fixed_points(&urn, 1e-9).unwrap();
        let pts = kinds(&set);
        assert_eq!(pts.len(), 2, "{pts:?}");
        assert_abs_diff_eq!(pts[0].0, 0.5, epsilon = 1e-6);
        assert_eq!(pts[0].1, FixedPointKind::TangentDegenerate);
        assert_abs_diff_eq!(pts[1].0, 1.0, epsilon = 1e-9);
        assert_eq!(pts[1].1, FixedPointKind::DowncrossingStable);
    }

    #[test]
    fn transform_matches_logarithmic_closed_form() {
        // For pi = 0.8 on (0, 0.8): Pi(a) = -log(0.8 - a) + C.
        let urn = UrnFunction::constant(0.8).unwrap();
        let tr = transformed_urn_function::<f64>(&urn, 0.0, 0.8, 1e-3).unwrap();
        let mid = 0.4f64;
        for (&a, &v) in tr.grid().iter().zip(tr.values()) {
            let expect = -(0.8 - a).ln() + (0.8 - mid).ln();
            assert_abs_diff_eq!(v, expect, epsilon = 1e-8);
        }
    }

    #[test]
    fn transform_matches_power_law_closed_form() {
        // For pi = 0.2 + 0.6 a on (0.5, 1): Pi(a) = -2.5 log(0.4 a - 0.2) + C.
        let urn = UrnFunction::linear(0.2, 0.6).unwrap();
        let tr = transformed_urn_function::<f64>(&urn, 0.5, 1.0, 1e-3).unwrap();
        let mid = 0.75f64;
        for (&a, &v) in tr.grid().iter().zip(tr.values()) {
            let expect = -2.5 * (0.4 * a - 0.2).ln() + 2.5 * (0.4 * mid - 0.2).ln();
            assert_abs_diff_eq!(v, expect, epsilon = 1e-8);
        }
    }

    #[test]
    fn transform_rejects_interval_containing_a_fixed_point() {
        let urn = UrnFunction::constant(0.8).unwrap();
        let err = transformed_urn_function::<f64>(&urn, 0.0, 1.0, 1e-3).unwrap_err();
        match err {
            Error::SingularTransform { at, .. } => assert_abs_diff_eq!(at, 0.8, epsilon = 1e-6),
            other => panic!("expected singular transform, got {other:?}"),
        }
    }

    #[test]
    fn transform_eval_and_invert_round_trip() {
        let urn = UrnFunction::constant(0.8).unwrap();
        let tr = transformed_urn_function(&urn, 0.0, 0.8, 1e-3).unwrap();
        for a in [0.05f64, 0.31, 0.5994, 0.77] {
            let y = tr.eval(a).unwrap();
            assert_abs_diff_eq!(tr.invert(y).unwrap(), a, epsilon = 1e-10);
        }
        assert!(tr.eval(0.9).is_err());
    }

    #[test]
    fn zero_cost_matches_closed_form_for_constant_family() {
        // psi(tau) = 0.8 - 0.6 (0.5 / tau) from (tau0, psi0) = (0.5, 0.2).
        let urn = UrnFunction::constant(0.8).unwrap();
        let taus: Vec<f64> = (0..=100).map(|i| 0.5 + 0.005 * i as f64).collect();
        let out = zero_cost_trajectory(&urn, 0.5, 0.2, &taus).unwrap();
        assert!(out.stalled_at.is_none());
        for (tau, psi) in out.trajectory.points() {
            assert_abs_diff_eq!(psi, 0.8 - 0.3 / tau, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(out.trajectory.last().1, 0.5, epsilon = 1e-8);
    }

    #[test]
    fn terminal_point_closed_forms() {
        let urn = UrnFunction::constant(0.8).unwrap();
        assert_abs_diff_eq!(terminal_point(&urn, 0.25, 0.2).unwrap(), 0.65, epsilon = 1e-8);
        // tau0 = 1 returns the start unchanged.
        assert_eq!(terminal_point(&urn, 1.0, 0.123).unwrap(), 0.123);
    }

    #[test]
    fn fixed_starts_stay_put() {
        let urn = UrnFunction::majority(3).unwrap();
        let taus = [0.4, 0.7, 1.0];
        let out = zero_cost_trajectory(&urn, 0.3, 0.5, &taus).unwrap();
        assert!(out.trajectory.psis().iter().all(|&p| p == 0.5));
        let out = zero_cost_trajectory(&urn, 0.3, 0.0, &taus).unwrap();
        assert!(out.trajectory.psis().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn trajectories_respect_adjacent_fixed_point_traps() {
        let urn = UrnFunction::majority(3).unwrap();
        let taus: Vec<f64> = (1..=50).map(|i| 0.1 + 0.018 * i as f64).collect();
        let up = zero_cost_trajectory(&urn, 0.1, 0.6, &taus).unwrap();
        for (_, psi) in up.trajectory.points() {
            assert!(psi > 0.5 && psi < 1.0, "share {psi} escaped (0.5, 1)");
        }
        let down = zero_cost_trajectory(&urn, 0.1, 0.4, &taus).unwrap();
        for (_, psi) in down.trajectory.points() {
            assert!(psi < 0.5 && psi > 0.0, "share {psi} escaped (0, 0.5)");
        }
    }

    #[test]
    fn semigroup_property() {
        let urn = UrnFunction::majority(3).unwrap();
        let mid = zero_cost_trajectory(&urn, 0.1, 0.6, &[0.4]).unwrap().trajectory.last().1;
        let direct = zero_cost_trajectory(&urn, 0.1, 0.6, &[1.0]).unwrap().trajectory.last().1;
        let relay = zero_cost_trajectory(&urn, 0.4, mid, &[1.0]).unwrap().trajectory.last().1;
        assert_abs_diff_eq!(direct, relay, epsilon = 1e-7);
    }

    #[test]
    fn integrator_and_transform_route_agree() {
        let urn = UrnFunction::majority(3).unwrap();
        let taus: Vec<f64> = (0..=30).map(|i| 0.1 + 0.03 * i as f64).collect();
        let ode = zero_cost_trajectory(&urn, 0.1, 0.6, &taus).unwrap().trajectory;
        let via = zero_cost_trajectory_via_transform(&urn, 0.1, 0.6, &taus).unwrap();
        for ((_, a), (_, b)) in ode.points().zip(via.points()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn integrator_agrees_with_tiny_step_euler() {
        let urn = UrnFunction::majority(3).unwrap();
        let (tau0, psi0) = (0.1f64, 0.6f64);
        let mut psi = psi0;
        let steps = 2_000_000usize;
        let h = (1.0 - tau0) / steps as f64;
        for i in 0..steps {
            let tau = tau0 + h * i as f64;
            psi += h * (urn.eval_clamped(psi) - psi) / tau;
        }
        let rk = terminal_point(&urn, tau0, psi0).unwrap();
        assert_abs_diff_eq!(rk, psi, epsilon = 1e-6);
    }

    #[test]
    fn invalid_starts_and_grids_are_rejected() {
        let urn = UrnFunction::constant(0.5).unwrap();
        assert!(zero_cost_trajectory(&urn, 0.0, 0.5, &[0.5]).is_err());
        assert!(zero_cost_trajectory(&urn, 0.5, 1.5, &[0.7]).is_err());
        assert!(zero_cost_trajectory(&urn, 0.5, 0.5, &[0.4]).is_err());
        assert!(zero_cost_trajectory(&urn, 0.5, 0.5, &[0.7, 0.7]).is_err());
        assert!(zero_cost_trajectory(&urn, 0.5, 0.5, &[0.7, 1.2]).is_err());
        assert!(zero_cost_trajectory(&urn, 0.5, 0.5, &[] as &[f64]).is_err());
    }
}
