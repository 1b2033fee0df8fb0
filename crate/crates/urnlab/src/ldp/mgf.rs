//! The moment generating function of the final share on the exponential
//! scale, its Legendre transform, and the reconstruction of the urn function
//! from an entropy curve.
//!
//! The generating curve `zeta(beta)` satisfies the implicit first-order
//! relation
//!
//! ```text
//! pi(zeta'(beta)) = (e^zeta - 1) / (e^beta - 1),    zeta(0) = 0,
//! ```
//!
//! which [`solve_mgf`] treats as an ODE marched in `beta`: at each step the
//! right-hand level is computed from the current `(beta, zeta)` and `zeta'`
//! recovered by monotone root finding in `pi`. The initial slope is the
//! largest share `s*` with `pi(s*) = s*` (the typical share of the upper
//! tail), and the march starts from a local series around `beta = 0`, where
//! the right-hand side is a 0/0 form.
//!
//! Constant urn functions make the relation algebraic rather than
//! differential — `zeta = log(1 + p (e^beta - 1))` — and are detected and
//! solved in closed form.
//!
//! Two structural limits of forward marching are detected and reported
//! rather than silently mishandled. A decreasing urn function leaves the
//! level un-invertible. And when the typical share is interior with a
//! strictly positive drift slope `lam = pi'(s*)`, the relation does not
//! determine the curve at all: it admits a one-parameter family of
//! solutions through the same start, differing by `beta^(1/lam)` terms
//! that no series jet can see and that forward integration amplifies like
//! `beta0^(-1/lam)` (for `lam >= 1/2` the physical curve even starts with
//! infinite curvature). Such inputs are refused. Branches that ride the
//! bottom of the range of `pi` (typical share 0 with `pi(0) = 0`) follow
//! the trivial `zeta = 0` solution as far as it is marched.

use crate::curves::{CurveKind, ScalarCurve};
use crate::error::{Error, Result};
use crate::float::Real;
use crate::urn::UrnFunction;

/// Resolution of the monotonicity / constancy prescan of `pi`.
const SCAN_CELLS: usize = 2048;
/// Resolution of the fixed-point scan.
const ROOT_CELLS: usize = 10_000;
/// The local series covers `beta` up to here; the march takes over after.
const TAYLOR_END: f64 = 1e-3;
/// Upper bound on the internal Runge-Kutta step.
const SUBSTEP: f64 = 5e-3;
/// Levels this close to the range boundary of `pi` ride the boundary
/// exactly; keeps branches like `zeta = beta` from drifting off.
const BOUNDARY_SNAP: f64 = 1e-12;
/// Allowed overshoot of the level beyond the range of `pi` before the
/// equation is declared un-invertible.
const LEVEL_SLACK: f64 = 1e-9;

/// Output of [`solve_mgf`]: the curve `zeta` on the requested grid together
/// with the recovered slopes `zeta'` and the functional-equation residuals
/// `|pi(slope) - level|` at each grid point.
#[derive(Debug, Clone)]
pub struct MgfSolution<F: Real = f64> {
    curve: ScalarCurve<F>,
    slopes: Vec<F>,
    residuals: Vec<F>,
}

impl<F: Real> MgfSolution<F> {
    pub fn curve(&self) -> &ScalarCurve<F> {
        &self.curve
    }

    pub fn into_curve(self) -> ScalarCurve<F> {
        self.curve
    }

    /// `zeta'` at each grid point; values lie in `[0, 1]`.
    pub fn slopes(&self) -> &[F] {
        &self.slopes
    }

    /// `|pi(slope) - level|` at each grid point (at `beta = 0`, the
    /// fixed-point defect `|pi(s*) - s*|` of the initial slope).
    pub fn residuals(&self) -> &[F] {
        &self.residuals
    }

    pub fn max_residual(&self) -> F {
        self.residuals
            .iter()
            .copied()
            .fold(F::zero(), F::max)
    }
}

fn clamp01<F: Real>(x: F) -> F {
    x.max(F::zero()).min(F::one())
}

/// Largest solution of `pi(x) = x` in `[0, 1]`, by scanning from the right
/// for an exact hit or a sign change refined by bisection. `pi(0) >= 0` and
/// `pi(1) <= 1` guarantee one exists.
fn largest_fixed_point(urn: &UrnFunction) -> f64 {
    let g = |x: f64| urn.eval_clamped(x) - x;
    let mut right = 1.0;
    let mut g_right = g(right);
    if g_right.abs() <= 1e-12 {
        return 1.0;
    }
    for i in (0..ROOT_CELLS).rev() {
        let x = i as f64 / ROOT_CELLS as f64;
        let gx = g(x);
        if gx.abs() <= 1e-12 {
            return x;
        }
        if gx > 0.0 && g_right < 0.0 {
            let (mut lo, mut hi) = (x, right);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return 0.5 * (lo + hi);
        }
        right = x;
        g_right = gx;
    }
    0.0
}

struct Marcher<'a, F: Real> {
    urn: &'a UrnFunction,
    pi_lo: F,
    pi_hi: F,
    s_star: F,
    /// `zeta''(0+)` of the classical branch:
    /// `s*(1 - s*) / (1 - 2 pi'(s*))`, zero at boundary typical shares.
    curv: F,
}

impl<'a, F: Real> Marcher<'a, F> {
    fn series(&self, beta: F) -> F {
        self.s_star * beta + self.curv * beta * beta * F::half()
    }

    fn series_slope(&self, beta: F) -> F {
        clamp01(self.s_star + self.curv * beta)
    }

    /// `(e^zeta - 1)/(e^beta - 1)`, in the overflow-free exponential-gap
    /// form for large `beta`.
    fn level(&self, zeta: F, beta: F) -> F {
        if beta.as_f64() <= 30.0 {
            zeta.exp_m1() / beta.exp_m1()
        } else {
            (zeta - beta).exp() * (-zeta).exp_m1() / (-beta).exp_m1()
        }
    }

    fn slope_at(&self, beta: F, zeta: F) -> Result<F> {
        if beta.as_f64() < TAYLOR_END {
            return Ok(self.series_slope(beta));
        }
        let r = self.level(zeta, beta);
        let slack = F::cast(LEVEL_SLACK);
        if r < self.pi_lo - slack || r > self.pi_hi + slack {
            return Err(Error::MgfInversion {
                beta: beta.as_f64(),
                detail: format!(
                    "the equation asks for level {r} outside the range [{}, {}] of the urn \
                     function",
                    self.pi_lo, self.pi_hi
                ),
            });
        }
        let r = r.max(self.pi_lo).min(self.pi_hi);
        let snap = F::cast(BOUNDARY_SNAP);
        if r >= self.pi_hi - snap {
            return Ok(F::one());
        }
        if r <= self.pi_lo + snap {
            return Ok(F::zero());
        }
        let (mut lo, mut hi) = (F::zero(), F::one());
        for _ in 0..100 {
            let mid = (lo + hi) * F::half();
            if self.urn.eval_clamped(mid) < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo + hi) * F::half())
    }

    /// Largest substep the relation tolerates at `(beta, zeta)`: the
    /// recovered slope responds to `zeta` with sensitivity
    /// `e^zeta / (pi'(slope) (e^beta - 1))`, which diverges as `beta -> 0`,
    /// so steps near the start must shrink proportionally to `beta` or the
    /// march amplifies roundoff catastrophically.
    fn step_bound(&self, b: F, z: F, slope: F) -> F {
        let dpi: f64 = self.urn.derivative(slope.as_f64());
        if !(dpi > 1e-12) {
            // Locally flat pi: the level pins zeta rigidly and the slope
            // has no sensitivity worth resolving.
            return F::cast(SUBSTEP);
        }
        let bb = b.as_f64();
        let sensitivity = (z.as_f64() - bb).exp() / (dpi * -(-bb).exp_m1());
        let floor = (bb * 1e-4).max(1e-8);
        F::cast((0.25 / sensitivity).max(floor).min(SUBSTEP))
    }

    /// Advance `(beta, zeta)` to `target` with fourth-order Runge-Kutta on
    /// stiffness-limited substeps.
    fn march_to(&self, state: &mut (F, F), target: F) -> Result<()> {
        let (mut b, mut z) = *state;
        while (target - b).as_f64() > 0.0 {
            let remaining = target - b;
            let k1 = self.slope_at(b, z)?;
            let h = self.step_bound(b, z, k1).min(remaining);
            let k2 = self.slope_at(b + h * F::half(), z + h * k1 * F::half())?;
            let k3 = self.slope_at(b + h * F::half(), z + h * k2 * F::half())?;
            let k4 = self.slope_at(b + h, z + h * k3)?;
            z += h * (k1 + F::two() * (k2 + k3) + k4) / F::cast(6.0);
            b = if h == remaining { target } else { b + h };
        }
        *state = (target, z);
        Ok(())
    }
}

/// Solve the generating-function relation on `beta_grid` (which must start
/// at 0 and increase). See the module docs for the method and for the two
/// families of inputs that are reported as unsolvable.
pub fn solve_mgf<F: Real>(urn: &UrnFunction, beta_grid: &[F]) -> Result<MgfSolution<F>> {
    if beta_grid.is_empty() {
        return Err(Error::InvalidArgument("beta grid is empty".into()));
    }
    if beta_grid[0] != F::zero() {
        return Err(Error::InvalidArgument(format!(
            "beta grid must start at 0, got {}",
            beta_grid[0]
        )));
    }
    for w in beta_grid.windows(2) {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(Error::InvalidArgument(
                "beta grid must be finite and strictly increasing".into(),
            ));
        }
    }

    // Prescan: the level inversion needs a nondecreasing pi; a flat pi makes
    // the relation algebraic.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=SCAN_CELLS {
        let x = i as f64 / SCAN_CELLS as f64;
        let v: f64 = urn.eval_clamped(x);
        if v < prev - 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "urn function must be nondecreasing for the moment-generating solver; it \
                 decreases near x = {x:.4}"
            )));
        }
        prev = prev.max(v);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi - lo <= 1e-15 {
        return solve_constant(F::cast(urn.eval_clamped(0.5)), beta_grid);
    }

    let s_star = largest_fixed_point(urn);
    let interior = s_star > 1e-9 && s_star < 1.0 - 1e-9;
    let lam: f64 = urn.derivative(s_star);
    if interior && lam > 1e-9 {
        return Err(Error::Numerical(format!(
            "the drift slope {lam:.4} at the interior typical share {s_star:.4} is positive, so \
             the generating relation admits a one-parameter family of curves through the typical \
             start and forward marching cannot select the physical one (from slope 1/2 up the \
             physical curve even starts with infinite curvature)"
        )));
    }
    let curv = if interior {
        s_star * (1.0 - s_star)
    } else {
        0.0
    };
    let marcher = Marcher {
        urn,
        pi_lo: F::cast(urn.eval_clamped(0.0)),
        pi_hi: F::cast(urn.eval_clamped(1.0)),
        s_star: F::cast(s_star),
        curv: F::cast(curv),
    };

    let mut zetas = Vec::with_capacity(beta_grid.len());
    let mut slopes = Vec::with_capacity(beta_grid.len());
    let mut residuals = Vec::with_capacity(beta_grid.len());
    let mut state = (F::zero(), F::zero());
    for &beta in beta_grid {
        let zeta = if beta == F::zero() {
            F::zero()
        } else if beta.as_f64() <= TAYLOR_END {
            let z = marcher.series(beta);
            state = (beta, z);
            z
        } else {
            if state.0.as_f64() < TAYLOR_END {
                let b = F::cast(TAYLOR_END);
                state = (b, marcher.series(b));
            }
            marcher.march_to(&mut state, beta)?;
            state.1
        };
        let slope = if beta == F::zero() {
            marcher.s_star
        } else {
            marcher.slope_at(beta, zeta)?
        };
        let residual = if beta == F::zero() {
            (F::cast(urn.eval_clamped(marcher.s_star.as_f64())) - marcher.s_star).abs()
        } else {
            (F::cast(urn.eval_clamped(slope.as_f64())) - marcher.level(zeta, beta)).abs()
        };
        zetas.push(zeta);
        slopes.push(slope);
        residuals.push(residual);
    }
    Ok(MgfSolution {
        curve: ScalarCurve::new(CurveKind::MomentGenerating, beta_grid.to_vec(), zetas)?,
        slopes,
        residuals,
    })
}

/// Closed form for a share-independent coin: the relation collapses to
/// `e^zeta - 1 = p (e^beta - 1)`.
fn solve_constant<F: Real>(p: F, beta_grid: &[F]) -> Result<MgfSolution<F>> {
    let mut zetas = Vec::with_capacity(beta_grid.len());
    let mut slopes = Vec::with_capacity(beta_grid.len());
    let mut residuals = Vec::with_capacity(beta_grid.len());
    for &beta in beta_grid {
        let zeta = (p * beta.exp_m1()).ln_1p();
        // zeta' = p e^beta / (1 + p (e^beta - 1)), in underflow-safe form.
        let slope = p / (p + (F::one() - p) * (-beta).exp());
        let residual = if beta == F::zero() {
            F::zero()
        } else {
            (p - zeta.exp_m1() / beta.exp_m1()).abs()
        };
        zetas.push(zeta);
        slopes.push(slope);
        residuals.push(residual);
    }
    Ok(MgfSolution {
        curve: ScalarCurve::new(CurveKind::MomentGenerating, beta_grid.to_vec(), zetas)?,
        slopes,
        residuals,
    })
}

/// `phi(x) = -sup_beta { x beta - zeta(beta) }`: the sign-flipped convex
/// conjugate of the input curve, evaluated on `out_grid` by a grid scan with
/// local parabolic refinement.
///
/// The input must be convex up to a `1e-9` slope-monotonicity tolerance;
/// worse violations are rejected (the conjugate of a non-convex curve would
/// silently compute the conjugate of its convex hull instead).
pub fn legendre<F: Real>(curve: &ScalarCurve<F>, out_grid: &[F]) -> Result<ScalarCurve<F>> {
    let grid = curve.grid();
    let values = curve.values();
    if grid.len() < 2 {
        return Err(Error::InvalidArgument(
            "conjugation needs a curve with at least two points".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "conjugation needs finite curve values".into(),
        ));
    }
    let mut prev_slope = F::neg_infinity();
    for (i, w) in values.windows(2).enumerate() {
        let slope = (w[1] - w[0]) / (grid[i + 1] - grid[i]);
        if slope < prev_slope - F::cast(1e-9) {
            return Err(Error::NotConvex {
                index: i + 1,
                value: (slope - prev_slope).as_f64(),
            });
        }
        prev_slope = slope;
    }

    let mut out = Vec::with_capacity(out_grid.len());
    for &x in out_grid {
        let mut best = F::neg_infinity();
        let mut best_i = 0usize;
        for (i, (&b, &z)) in grid.iter().zip(values).enumerate() {
            let v = x * b - z;
            if v > best {
                best = v;
                best_i = i;
            }
        }
        if best_i > 0 && best_i + 1 < grid.len() {
            best = best.max(refine_peak(
                (grid[best_i - 1], x * grid[best_i - 1] - values[best_i - 1]),
                (grid[best_i], best),
                (grid[best_i + 1], x * grid[best_i + 1] - values[best_i + 1]),
            ));
        }
        out.push(-best);
    }
    ScalarCurve::new(CurveKind::EntropyDensity, out_grid.to_vec(), out)
}

/// Peak of the parabola through three points, evaluated at its vertex
/// (clamped into the bracket); falls back to the middle value when the
/// points are too close to collinear to place a vertex.
fn refine_peak<F: Real>((x1, y1): (F, F), (x2, y2): (F, F), (x3, y3): (F, F)) -> F {
    let d21 = x2 - x1;
    let d23 = x2 - x3;
    let num = d21 * d21 * (y2 - y3) - d23 * d23 * (y2 - y1);
    let den = d21 * (y2 - y3) - d23 * (y2 - y1);
    if den.abs() <= F::cast(1e-300) {
        return y2;
    }
    let vx = (x2 - num / (den * F::two())).max(x1.min(x3)).min(x1.max(x3));
    // Lagrange form of the same parabola at the vertex.
    let l1 = (vx - x2) * (vx - x3) / ((x1 - x2) * (x1 - x3));
    let l2 = (vx - x1) * (vx - x3) / ((x2 - x1) * (x2 - x3));
    let l3 = (vx - x1) * (vx - x2) / ((x3 - x1) * (x3 - x2));
    y1 * l1 + y2 * l2 + y3 * l3
}

/// Residual of the entropy curve against the urn function: reconstruct
/// `pi_hat(x) = (exp(phi - x phi') - 1) / (exp(-phi') - 1)` by central
/// differencing `phi` on its grid interior and return `pi_hat - pi` there.
///
/// `phi` must carry the standard normalization (maximum zero at a typical
/// share): the reconstruction uses its absolute values, not just its shape.
/// At the maximizer the expression is a 0/0 form whose limit is `x`; that
/// fallback engages whenever the denominator is within `1e-10` of zero.
pub fn entropy_reconstruction_residual<F: Real>(
    urn: &UrnFunction,
    phi: &ScalarCurve<F>,
) -> Result<ScalarCurve<F>> {
    let x = phi.grid();
    let v = phi.values();
    if x.len() < 3 {
        return Err(Error::InvalidArgument(
            "reconstruction needs at least three curve points".into(),
        ));
    }
    if v.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidArgument(
            "reconstruction needs finite curve values".into(),
        ));
    }
    if x[0] < F::zero() || *x.last().unwrap() > F::one() {
        return Err(Error::InvalidArgument(
            "entropy curve grid must lie within [0, 1]".into(),
        ));
    }
    let mut grid = Vec::with_capacity(x.len() - 2);
    let mut out = Vec::with_capacity(x.len() - 2);
    for i in 1..x.len() - 1 {
        let hl = x[i] - x[i - 1];
        let hr = x[i + 1] - x[i];
        let dphi = (hl * hl * v[i + 1] - hr * hr * v[i - 1] + (hr * hr - hl * hl) * v[i])
            / (hl * hr * (hl + hr));
        let den = (-dphi).exp_m1();
        let pi_hat = if den.abs() <= F::cast(1e-10) {
            x[i]
        } else {
            (v[i] - x[i] * dphi).exp_m1() / den
        };
        grid.push(x[i]);
        out.push(pi_hat - urn.eval_clamped(x[i]));
    }
    ScalarCurve::new(CurveKind::Residual, grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    use crate::error::ErrorKind;
    use crate::ldp::entropy_curve;

    const LN2: f64 = std::f64::consts::LN_2;

    fn beta_grid(max: f64, step: f64) -> Vec<f64> {
        let n = (max / step).round() as usize;
        (0..=n).map(|i| i as f64 * step).collect()
    }

    /// `log((1 + e^beta)/2)` computed without overflow on either side.
    fn fair_zeta(beta: f64) -> f64 {
        if beta <= 0.0 {
            beta.exp().ln_1p() - LN2
        } else {
            beta + (-beta).exp().ln_1p() - LN2
        }
    }

    fn binary_entropy(x: f64) -> f64 {
        -(x * x.ln() + (1.0 - x) * (1.0 - x).ln())
    }

    #[test]
    fn fair_coin_matches_closed_form() {
        let urn = UrnFunction::constant(0.5).unwrap();
        let grid = beta_grid(5.0, 0.01);
        let sol = solve_mgf(&urn, &grid).unwrap();
        assert_eq!(sol.curve().values()[0], 0.0);
        assert_abs_diff_eq!(sol.slopes()[0], 0.5, epsilon = 1e-12);
        for (&b, &z) in grid.iter().zip(sol.curve().values()) {
            assert_abs_diff_eq!(z, fair_zeta(b), epsilon = 1e-6);
        }
        assert!(sol.max_residual() < 1e-8, "residual {}", sol.max_residual());
    }

    #[test]
    fn constant_family_through_a_table() {
        // A flat table exercises the constancy detection rather than the
        // constant family tag.
        let urn = UrnFunction::table(vec![0.0, 1.0], vec![0.3, 0.3]).unwrap();
        let grid = beta_grid(4.0, 0.05);
        let sol = solve_mgf(&urn, &grid).unwrap();
        for (&b, &z) in grid.iter().zip(sol.curve().values()) {
            assert_abs_diff_eq!(z, (1.0 + 0.3 * b.exp_m1()).ln(), epsilon = 1e-12);
        }
        assert!(sol.max_residual() < 1e-12);
    }

    #[test]
    fn identity_drift_gives_the_linear_curve() {
        let urn = UrnFunction::linear(0.0, 1.0).unwrap();
        let grid = beta_grid(8.0, 0.05);
        let sol = solve_mgf(&urn, &grid).unwrap();
        for (&b, &z) in grid.iter().zip(sol.curve().values()) {
            assert_abs_diff_eq!(z, b, epsilon = 1e-9);
        }
        assert!(sol.max_residual() < 1e-8);
        for &s in sol.slopes() {
            assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn majority_rides_the_lock_in_branch() {
        let urn = UrnFunction::majority(3).unwrap();
        let grid = beta_grid(8.0, 0.05);
        let sol = solve_mgf(&urn, &grid).unwrap();
        for (&b, &z) in grid.iter().zip(sol.curve().values()) {
            assert_abs_diff_eq!(z, b, epsilon = 1e-9);
        }
        assert!(sol.max_residual() < 1e-8);
    }

    #[test]
    fn interior_attracting_typical_shares_are_refused() {
        // Both families have their typical share at the interior point 0.5
        // with a positive drift slope (0.3 and 0.6): the relation does not
        // pin the curve there and the solver must say so instead of
        // delivering an arbitrary branch.
        for urn in [
            UrnFunction::linear(0.35, 0.3).unwrap(),
            UrnFunction::linear(0.2, 0.6).unwrap(),
        ] {
            let err = solve_mgf(&urn, &beta_grid(2.0, 0.1)).unwrap_err();
            assert_eq!(err.kind(), ErrorKind::Numerical, "{err}");
            assert!(err.to_string().contains("one-parameter family"), "{err}");
        }
    }

    #[test]
    fn grid_and_monotonicity_validation() {
        let urn = UrnFunction::constant(0.5).unwrap();
        assert!(solve_mgf::<f64>(&urn, &[]).is_err());
        assert!(solve_mgf(&urn, &[0.5, 1.0]).is_err());
        assert!(solve_mgf(&urn, &[0.0, 1.0, 0.5]).is_err());
        let decreasing = UrnFunction::linear(0.8, -0.6).unwrap();
        let err = solve_mgf(&decreasing, &[0.0, 1.0]).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::Validation, "{err}");
    }

    #[test]
    fn fair_coin_conjugate_is_the_binomial_rate() {
        let grid: Vec<f64> = (-800..=800).map(|i| i as f64 / 100.0).collect();
        let zeta: Vec<f64> = grid.iter().map(|&b| fair_zeta(b)).collect();
        let curve = ScalarCurve::new(CurveKind::MomentGenerating, grid, zeta).unwrap();
        let xs: Vec<f64> = (1..=49).map(|k| k as f64 * 0.02).collect();
        let phi = legendre(&curve, &xs).unwrap();
        for (&x, &v) in phi.grid().iter().zip(phi.values()) {
            assert!(v <= 1e-12, "phi({x}) = {v} > 0");
            assert_abs_diff_eq!(v, binary_entropy(x) - LN2, epsilon = 1e-4);
        }
        // The typical share x = zeta'(0) = 1/2 has rate zero.
        assert_abs_diff_eq!(phi.value_at(0.5).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn double_conjugation_returns_the_curve() {
        let grid: Vec<f64> = (-800..=800).map(|i| i as f64 / 100.0).collect();
        let zeta: Vec<f64> = grid.iter().map(|&b| fair_zeta(b)).collect();
        let curve = ScalarCurve::new(CurveKind::MomentGenerating, grid.clone(), zeta).unwrap();
        // The rate function steepens fast near the edges, so the inner grid
        // must be fine for the second conjugation to resolve the sup there.
        let xs: Vec<f64> = (1..=199).map(|k| k as f64 * 0.005).collect();
        let phi = legendre(&curve, &xs).unwrap();
        // Conjugate the rate function back: negate phi to get the convex
        // side, conjugate, and negate again.
        let rate: Vec<f64> = phi.values().iter().map(|&v| -v).collect();
        let rate_curve =
            ScalarCurve::new(CurveKind::MomentGenerating, xs.clone(), rate).unwrap();
        let betas: Vec<f64> = (-60..=60).map(|i| i as f64 / 20.0).collect();
        let back = legendre(&rate_curve, &betas).unwrap();
        for (&b, &v) in back.grid().iter().zip(back.values()) {
            assert_abs_diff_eq!(-v, fair_zeta(b), epsilon = 1e-4);
        }
    }

    #[test]
    fn concave_input_is_rejected_with_location() {
        let curve = ScalarCurve::new(
            CurveKind::MomentGenerating,
            vec![0.0, 1.0, 2.0],
            vec![0.0, 1.0, 0.5],
        )
        .unwrap();
        match legendre(&curve, &[0.5]) {
            Err(Error::NotConvex { index, value }) => {
                assert_eq!(index, 2);
                assert!(value < -1.0);
            }
            other => panic!("expected a convexity error, got {other:?}"),
        }
    }

    #[test]
    fn generating_curve_agrees_with_the_variational_conjugate() {
        // Two independent routes to zeta: the generating relation and
        // sup_x { beta x + phi(x) } with phi from path optimization. Up to
        // beta = 2 the maximizer stays inside the x grids below.
        let betas = beta_grid(2.0, 0.25);
        let cases = [
            // Biased coin: closed-form relation vs the optimizer.
            (
                UrnFunction::constant(0.8).unwrap(),
                (1..=49).map(|k| k as f64 * 0.02).collect::<Vec<_>>(),
            ),
            // Identity drift: the boundary-riding march vs a flat entropy
            // curve whose conjugate is beta * 1 (the grid must reach x = 1
            // for the sup to find it).
            (
                UrnFunction::linear(0.0, 1.0).unwrap(),
                (1..=50).map(|k| k as f64 * 0.02).collect::<Vec<_>>(),
            ),
        ];
        for (urn, xs) in cases {
            let phi = entropy_curve(&urn, &xs, 512).unwrap();
            let sol = solve_mgf(&urn, &betas).unwrap();
            for (&b, &z) in betas.iter().zip(sol.curve().values()) {
                let conj = phi
                    .grid()
                    .iter()
                    .zip(phi.values())
                    .map(|(&x, &v)| b * x + v)
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_abs_diff_eq!(z, conj, epsilon = 5e-3);
            }
        }
    }

    #[test]
    fn fair_coin_reconstruction_is_exact() {
        let urn = UrnFunction::constant(0.5).unwrap();
        let n = 4500usize;
        let grid: Vec<f64> = (0..=n).map(|i| 0.05 + i as f64 * 2e-4).collect();
        let values: Vec<f64> = grid.iter().map(|&x| binary_entropy(x) - LN2).collect();
        let phi = ScalarCurve::new(CurveKind::EntropyDensity, grid, values).unwrap();
        let res = entropy_reconstruction_residual(&urn, &phi).unwrap();
        let worst = res.values().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        assert!(worst < 1e-6, "worst residual {worst}");
        // The maximizer x = 1/2 sits on the grid: the 0/0 fallback engages
        // and still lands on the urn function.
        assert_abs_diff_eq!(res.value_at(0.5).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn biased_coin_reconstruction_is_exact() {
        let p = 0.8f64;
        let urn = UrnFunction::constant(p).unwrap();
        let n = 4500usize;
        let grid: Vec<f64> = (0..=n).map(|i| 0.05 + i as f64 * 2e-4).collect();
        let values: Vec<f64> = grid
            .iter()
            .map(|&x| -(x * (x / p).ln() + (1.0 - x) * ((1.0 - x) / (1.0 - p)).ln()))
            .collect();
        let phi = ScalarCurve::new(CurveKind::EntropyDensity, grid, values).unwrap();
        let res = entropy_reconstruction_residual(&urn, &phi).unwrap();
        let worst = res.values().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        assert!(worst < 1e-6, "worst residual {worst}");
    }

    #[test]
    fn reconstruction_residual_closes_the_loop_with_path_optimization() {
        let urn = UrnFunction::constant(0.8).unwrap();
        let grid: Vec<f64> = (2..=18).map(|k| k as f64 * 0.05).collect();
        let phi = entropy_curve(&urn, &grid, 1024).unwrap();
        let res = entropy_reconstruction_residual(&urn, &phi).unwrap();
        let worst = res.values().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        assert!(worst < 5e-3, "worst residual {worst}");
    }

    #[test]
    fn reconstruction_validation() {
        let urn = UrnFunction::constant(0.5).unwrap();
        let short = ScalarCurve::new(CurveKind::EntropyDensity, vec![0.1, 0.2], vec![0.0, 0.0])
            .unwrap();
        assert!(entropy_reconstruction_residual(&urn, &short).is_err());
        let off_domain = ScalarCurve::new(
            CurveKind::EntropyDensity,
            vec![-0.5, 0.0, 0.5],
            vec![0.0, 0.0, 0.0],
        )
        .unwrap();
        assert!(entropy_reconstruction_residual(&urn, &off_domain).is_err());
        let infinite = ScalarCurve::new(
            CurveKind::EntropyDensity,
            vec![0.1, 0.2, 0.3],
            vec![0.0, f64::NEG_INFINITY, 0.0],
        )
        .unwrap();
        assert!(entropy_reconstruction_residual(&urn, &infinite).is_err());
    }
}
