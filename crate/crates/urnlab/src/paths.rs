//! Continuous-time objects: share trajectories `psi(tau)` and 1-Lipschitz
//! cumulative paths `phi(alpha)` on a uniform grid.

use crate::error::{Error, Result};
use crate::float::Real;

/// Samples of a share trajectory: strictly increasing saturations
/// `tau in (0, 1]` with shares `psi in [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<F: Real = f64> {
    taus: Vec<F>,
    psis: Vec<F>,
}

impl<F: Real> Trajectory<F> {
    pub fn new(taus: Vec<F>, psis: Vec<F>) -> Result<Self> {
        if taus.len() != psis.len() {
            return Err(Error::InvalidArgument(format!(
                "trajectory needs equally many taus and psis, got {} and {}",
                taus.len(),
                psis.len()
            )));
        }
        if taus.is_empty() {
            return Err(Error::InvalidArgument("trajectory must be nonempty".into()));
        }
        for &t in &taus {
            if !(t > F::zero() && t <= F::one()) {
                return Err(Error::InvalidArgument(format!(
                    "saturation outside (0, 1]: {t}"
                )));
            }
        }
        if taus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "saturations must be strictly increasing".into(),
            ));
        }
        for &p in &psis {
            if !(p >= F::zero() && p <= F::one()) {
                return Err(Error::Domain {
                    what: "share",
                    value: p.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Trajectory { taus, psis })
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn taus(&self) -> &[F] {
        &self.taus
    }

    pub fn psis(&self) -> &[F] {
        &self.psis
    }

    pub fn points(&self) -> impl Iterator<Item = (F, F)> + '_ {
        self.taus.iter().copied().zip(self.psis.iter().copied())
    }

    pub fn last(&self) -> (F, F) {
        (*self.taus.last().unwrap(), *self.psis.last().unwrap())
    }
}

/// Slack allowed when validating slopes against `[0, 1]`; covers the rounding
/// of `k/M` grids and cumulative sums, not modelling error.
const SLOPE_SLACK: f64 = 1e-9;

/// A piecewise-linear path `phi` on the uniform grid `k/M`, `k = 0..=M`,
/// with every cell slope in `[0, 1]` and `phi(0) >= 0`.
///
/// Embedded histories use slope `sigma_n` on cell `n`, so `phi(n/M)` is the
/// black mass created up to step `n` divided by capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzPath<F: Real = f64> {
    values: Vec<F>,
}

impl<F: Real> LipschitzPath<F> {
    pub fn new(values: Vec<F>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidArgument(
                "path needs at least one cell (two grid values)".into(),
            ));
        }
        if values[0] < F::zero() {
            return Err(Error::InvalidArgument(format!(
                "path offset must be nonnegative, got {}",
                values[0]
            )));
        }
        let m = F::cast_usize(values.len() - 1);
        let slack = F::cast(SLOPE_SLACK);
        for (k, w) in values.windows(2).enumerate() {
            let slope = m * (w[1] - w[0]);
            if slope < -slack || slope > F::one() + slack {
                return Err(Error::InvalidArgument(format!(
                    "cell {k} slope {slope} outside [0, 1]"
                )));
            }
        }
        Ok(LipschitzPath { values })
    }

    /// Build from an offset and per-cell slopes (each in `[0, 1]`).
    pub fn from_slopes(offset: F, slopes: &[F]) -> Result<Self> {
        let m = F::cast_usize(slopes.len());
        let mut values = Vec::with_capacity(slopes.len() + 1);
        let mut acc = offset;
        values.push(acc);
        for &s in slopes {
            acc += s / m;
            values.push(acc);
        }
        Self::new(values)
    }

    /// Number of cells `M`.
    pub fn grid_size(&self) -> usize {
        self.values.len() - 1
    }

    /// `phi(0)`.
    pub fn offset(&self) -> F {
        self.values[0]
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    /// Slope of cell `k`, i.e. `M (phi((k+1)/M) - phi(k/M))`.
    pub fn slope(&self, k: usize) -> F {
        let m = F::cast_usize(self.grid_size());
        m * (self.values[k + 1] - self.values[k])
    }

    pub fn slopes(&self) -> Vec<F> {
        (0..self.grid_size()).map(|k| self.slope(k)).collect()
    }

    /// `phi(alpha)` by linear interpolation, `alpha in [0, 1]`.
    pub fn eval(&self, alpha: F) -> F {
        let m = self.grid_size();
        let pos = (alpha.max(F::zero()).min(F::one()) * F::cast_usize(m)).as_f64();
        let k = (pos.floor() as usize).min(m - 1);
        let frac = F::cast(pos - k as f64);
        self.values[k] + frac * (self.values[k + 1] - self.values[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn trajectory_validation() {
        assert!(Trajectory::new(vec![0.5, 1.0], vec![0.2, 0.5]).is_ok());
        assert!(Trajectory::new(vec![0.0, 1.0], vec![0.2, 0.5]).is_err());
        assert!(Trajectory::new(vec![0.5, 0.5], vec![0.2, 0.5]).is_err());
        assert!(Trajectory::new(vec![0.5, 1.1], vec![0.2, 0.5]).is_err());
        assert!(Trajectory::new(vec![0.5, 1.0], vec![0.2, 1.5]).is_err());
        assert!(Trajectory::<f64>::new(vec![], vec![]).is_err());
    }

    #[test]
    fn path_slopes_and_eval() {
        let p = LipschitzPath::new(vec![0.0, 0.25, 0.25, 0.5, 0.75]).unwrap();
        assert_eq!(p.grid_size(), 4);
        assert_eq!(p.slope(0), 1.0);
        assert_eq!(p.slope(1), 0.0);
        assert_abs_diff_eq!(p.eval(0.125), 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(p.eval(0.375), 0.25, epsilon = 1e-15);
        assert_eq!(p.eval(1.0), 0.75);
    }

    #[test]
    fn path_rejects_bad_slopes() {
        // Slope 2 on the first cell.
        assert!(LipschitzPath::new(vec![0.0, 1.0, 1.0]).is_err());
        // Decreasing.
        assert!(LipschitzPath::new(vec![0.5, 0.4, 0.4]).is_err());
        // Negative offset.
        assert!(LipschitzPath::new(vec![-0.1, 0.0, 0.1]).is_err());
    }

    #[test]
    fn from_slopes_round_trips() {
        let slopes = vec![0.25, 1.0, 0.0, 0.5];
        let p = LipschitzPath::from_slopes(0.0, &slopes).unwrap();
        for (k, &s) in slopes.iter().enumerate() {
            assert_abs_diff_eq!(p.slope(k), s, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn random_slopes_always_validate(raw in proptest::collection::vec(0.0f64..=1.0, 1..64)) {
            let p = LipschitzPath::from_slopes(0.0, &raw).unwrap();
            let m = p.grid_size() as f64;
            for k in 0..p.grid_size() {
                let s = p.slope(k);
                prop_assert!((-1e-9..=1.0 + 1e-9).contains(&s));
            }
            prop_assert!(p.eval(1.0) <= 1.0 + 1e-9 * m);
        }
    }
}
