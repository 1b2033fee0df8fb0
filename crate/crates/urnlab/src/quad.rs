//! Adaptive Simpson quadrature for smooth one-dimensional integrands.

use crate::float::Real;

fn simpson<F: Real>(fa: F, fm: F, fb: F, h: F) -> F {
    h / F::cast(6.0) * (fa + F::cast(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Real, G: Fn(F) -> F>(
    f: &G,
    a: F,
    b: F,
    fa: F,
    fm: F,
    fb: F,
    whole: F,
    tol: F,
    depth: u32,
) -> F {
    let m = (a + b) * F::half();
    let lm = (a + m) * F::half();
    let rm = (m + b) * F::half();
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= F::cast(15.0) * tol {
        // Richardson extrapolation of the two half-interval estimates.
        return left + right + delta / F::cast(15.0);
    }
    recurse(f, a, m, fa, flm, fm, left, tol * F::half(), depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, tol * F::half(), depth - 1)
}

/// Integrate `f` over `[a, b]` (either orientation) to absolute tolerance
/// `tol`. Recursion is capped; the cap is generous for the smooth, singular-
/// free integrands this crate produces.
pub(crate) fn adaptive_simpson<F: Real, G: Fn(F) -> F>(f: &G, a: F, b: F, tol: F) -> F {
    if a == b {
        return F::zero();
    }
    let fa = f(a);
    let fb = f(b);
    let m = (a + b) * F::half();
    let fm = f(m);
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}
