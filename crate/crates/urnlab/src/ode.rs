//! Adaptive Dormand-Prince 5(4) integration for scalar initial value
//! problems, with output at caller-chosen abscissae.

use crate::float::Real;

/// Where and why integration stopped early.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stall<F> {
    /// Independent variable reached before the step size underflowed.
    pub at: F,
}

pub(crate) struct GridSolution<F> {
    /// Solution values at the requested grid points that were reached.
    pub values: Vec<F>,
    /// Present when the step size underflowed before the last grid point.
    pub stall: Option<Stall<F>>,
}

const SAFETY: f64 = 0.9;
const MIN_SHRINK: f64 = 0.2;
const MAX_GROW: f64 = 5.0;

/// Integrate `y' = f(t, y)` from `(t0, y0)`, reporting `y` at each point of
/// `grid` (strictly increasing, all `> t0`... the first entry may equal `t0`).
/// Local error is controlled against `tol` (absolute, per step).
pub(crate) fn integrate_to_grid<F: Real, G: Fn(F, F) -> F>(
    f: &G,
    t0: F,
    y0: F,
    grid: &[F],
    tol: F,
) -> GridSolution<F> {
    let mut t = t0;
    let mut y = y0;
    let mut values = Vec::with_capacity(grid.len());
    let span = grid.last().map(|&g| g - t0).unwrap_or(F::zero());
    if span <= F::zero() {
        // Degenerate request: everything at or before t0.
        for &g in grid {
            debug_assert!(g == t0);
            values.push(y0);
        }
        return GridSolution {
            values,
            stall: None,
        };
    }
    let h_min = span * F::cast(1e-14);
    let mut h = span * F::cast(1e-3);
    let mut k1 = f(t, y);

    for &target in grid {
        if target == t {
            values.push(y);
            continue;
        }
        while t < target {
            let h_try = h.min(target - t);
            let (y_new, err, k_last) = dopri_step(f, t, y, k1, h_try);
            let scale = tol;
            if err <= scale || h_try <= h_min {
                t = t + h_try;
                y = y_new;
                k1 = k_last; // first-same-as-last
                let grow = if err > F::zero() {
                    SAFETY * (scale / err).as_f64().powf(0.2)
                } else {
                    MAX_GROW
                };
                h = h_try * F::cast(grow.clamp(MIN_SHRINK, MAX_GROW));
                h = h.max(h_min);
            } else {
                let shrink = SAFETY * (scale / err).as_f64().powf(0.2);
                let h_new = h_try * F::cast(shrink.clamp(MIN_SHRINK, 1.0));
                if h_new <= h_min {
                    // Step size underflow: report what we have.
                    return GridSolution {
                        values,
                        stall: Some(Stall { at: t }),
                    };
                }
                h = h_new;
            }
        }
        values.push(y);
    }
    GridSolution {
        values,
        stall: None,
    }
}

/// One Dormand-Prince step: returns 5th-order solution, error estimate, and
/// the last stage derivative (valid as the next step's first stage).
fn dopri_step<F: Real, G: Fn(F, F) -> F>(f: &G, t: F, y: F, k1: F, h: F) -> (F, F, F) {
    let c = |v: f64| F::cast(v);

    let k2 = f(t + h * c(1.0 / 5.0), y + h * (c(1.0 / 5.0) * k1));
    let k3 = f(
        t + h * c(3.0 / 10.0),
        y + h * (c(3.0 / 40.0) * k1 + c(9.0 / 40.0) * k2),
    );
    let k4 = f(
        t + h * c(4.0 / 5.0),
        y + h * (c(44.0 / 45.0) * k1 - c(56.0 / 15.0) * k2 + c(32.0 / 9.0) * k3),
    );
    let k5 = f(
        t + h * c(8.0 / 9.0),
        y + h
            * (c(19372.0 / 6561.0) * k1 - c(25360.0 / 2187.0) * k2 + c(64448.0 / 6561.0) * k3
                - c(212.0 / 729.0) * k4),
    );
    let k6 = f(
        t + h,
        y + h
            * (c(9017.0 / 3168.0) * k1 - c(355.0 / 33.0) * k2 + c(46732.0 / 5247.0) * k3
                + c(49.0 / 176.0) * k4
                - c(5103.0 / 18656.0) * k5),
    );
    let y5 = y + h
        * (c(35.0 / 384.0) * k1 + c(500.0 / 1113.0) * k3 + c(125.0 / 192.0) * k4
            - c(2187.0 / 6784.0) * k5
            + c(11.0 / 84.0) * k6);
    let k7 = f(t + h, y5);
    let y4 = y + h
        * (c(5179.0 / 57600.0) * k1 + c(7571.0 / 16695.0) * k3 + c(393.0 / 640.0) * k4
            - c(92097.0 / 339200.0) * k5
            + c(187.0 / 2100.0) * k6
            + c(1.0 / 40.0) * k7);
    ((y5), (y5 - y4).abs(), k7)
}
