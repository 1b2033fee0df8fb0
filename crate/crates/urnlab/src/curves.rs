//! A labelled scalar curve: a strictly increasing grid with one value per
//! grid point. The common currency of entropy densities, moment-generating
//! functions, transformed-urn estimates, and diagnostic residuals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::float::Real;

/// What the grid and values of a [`ScalarCurve`] mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    /// `x` vs `phi(x)`: per-step log-probability scale of ending at share `x`.
    EntropyDensity,
    /// `beta` vs `zeta(beta)`: scaled cumulant generating function.
    MomentGenerating,
    /// `alpha` vs `Pi(alpha)`: antiderivative of `1/(pi - id)`.
    TransformedUrn,
    /// `psi` vs `log tau(psi)`: inverse trajectory on logarithmic time.
    LogSaturation,
    /// Pointwise diagnostic (e.g. a reconstruction residual).
    Residual,
}

/// Scalar curve on a strictly increasing grid.
///
/// The kind is a semantic label used for export and documentation; structural
/// validity (finite, sorted grid; equal lengths; no NaN values) is enforced
/// here, while analytic properties (convexity, sign) are the business of the
/// operations that produce each kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarCurve<F: Real = f64> {
    kind: CurveKind,
    grid: Vec<F>,
    values: Vec<F>,
}

impl<F: Real> ScalarCurve<F> {
    pub fn new(kind: CurveKind, grid: Vec<F>, values: Vec<F>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidSpec("curve grid is empty".into()));
        }
        if grid.len() != values.len() {
            return Err(Error::InvalidSpec(format!(
                "curve grid and values differ in length: {} vs {}",
                grid.len(),
                values.len()
            )));
        }
        if grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidSpec("curve grid must be finite".into()));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec(
                "curve grid must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidSpec("curve values must not be NaN".into()));
        }
        Ok(Self { kind, grid, values })
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn grid(&self) -> &[F] {
        &self.grid
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `(grid, value)` pairs in grid order.
    pub fn points(&self) -> impl Iterator<Item = (F, F)> + '_ {
        self.grid.iter().copied().zip(self.values.iter().copied())
    }

    /// Linear interpolation inside the grid hull.
    pub fn value_at(&self, x: F) -> Result<F> {
        let (first, last) = (self.grid[0], *self.grid.last().unwrap());
        if !(x >= first && x <= last) {
            return Err(Error::InvalidArgument(format!(
                "{x} outside the curve hull [{first}, {last}]"
            )));
        }
        let i = self.grid.partition_point(|&g| g < x);
        if i == 0 {
            return Ok(self.values[0]);
        }
        if self.grid[i.min(self.len() - 1)] == x {
            return Ok(self.values[i.min(self.len() - 1)]);
        }
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        let (y0, y1) = (self.values[i - 1], self.values[i]);
        let t = (x - x0) / (x1 - x0);
        Ok(y0 + t * (y1 - y0))
    }
}
