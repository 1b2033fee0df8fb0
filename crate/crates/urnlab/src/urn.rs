//! Urn functions: the law `pi(x)` giving the probability of adding a black
//! ball when the current black share is `x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Real;

/// Wire-format parameter record; validated into [`UrnFunction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
enum Params {
    Constant {
        p: f64,
    },
    Linear {
        a: f64,
        b: f64,
    },
    Majority {
        m: u32,
    },
    Table {
        xs: Vec<f64>,
        ys: Vec<f64>,
    },
}

/// A validated urn function `pi: [0,1] -> [0,1]`.
///
/// Families:
/// - `constant(p)`: share-independent coin with success probability `p`;
/// - `linear(a, b)`: `a + b x`, clamped into `[0,1]`;
/// - `majority(m)`: probability that a size-`m` sample with replacement at
///   share `x` contains a strict black majority (`m` odd, at least 3);
/// - `table(xs, ys)`: linear interpolation through knots, `xs` strictly
///   increasing from 0 to 1, `ys` within `[0,1]`.
///
/// JSON form is tagged by family, e.g. `{"family":"linear","a":0.2,"b":0.6}`.
/// Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Params", into = "Params")]
pub struct UrnFunction {
    params: Params,
}

impl TryFrom<Params> for UrnFunction {
    type Error = Error;

    fn try_from(params: Params) -> Result<Self> {
        match &params {
            Params::Constant { p } => {
                if !p.is_finite() || !(0.0..=1.0).contains(p) {
                    return Err(Error::InvalidSpec(format!("p must lie in [0, 1], got {p}")));
                }
            }
            Params::Linear { a, b } => {
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidSpec(format!(
                        "linear coefficients must be finite, got a={a}, b={b}"
                    )));
                }
            }
            Params::Majority { m } => {
                if *m % 2 == 0 {
                    return Err(Error::InvalidSpec(format!("m must be odd, got {m}")));
                }
                if *m < 3 {
                    return Err(Error::InvalidSpec(format!("m must be at least 3, got {m}")));
                }
                // Binomial coefficients stay well inside f64 range up to here.
                if *m > 999 {
                    return Err(Error::InvalidSpec(format!("m must be at most 999, got {m}")));
                }
            }
            Params::Table { xs, ys } => {
                if xs.len() != ys.len() {
                    return Err(Error::InvalidSpec(format!(
                        "table needs equally many xs and ys, got {} and {}",
                        xs.len(),
                        ys.len()
                    )));
                }
                if xs.len() < 2 {
                    return Err(Error::InvalidSpec("table needs at least two knots".into()));
                }
                if xs.iter().any(|v| !v.is_finite()) || ys.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSpec("table knots must be finite".into()));
                }
                if xs[0] != 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "table xs must start at 0, got {}",
                        xs[0]
                    )));
                }
                if *xs.last().unwrap() != 1.0 {
                    return Err(Error::InvalidSpec(format!(
                        "table xs must end at 1, got {}",
                        xs.last().unwrap()
                    )));
                }
                if xs.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidSpec(
                        "table xs must be strictly increasing".into(),
                    ));
                }
                if let Some(bad) = ys.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return Err(Error::InvalidSpec(format!("table ys outside [0, 1]: {bad}")));
                }
            }
        }
        Ok(UrnFunction { params })
    }
}

impl From<UrnFunction> for Params {
    fn from(u: UrnFunction) -> Params {
        u.params
    }
}

/// `C(n, k)` as `f64`; exact for every value this crate constructs
/// (matters for the majority family, where n <= 999).
fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0f64;
    for i in 0..k {
        c = c * f64::from(n - i) / f64::from(i + 1);
    }
    c
}

impl UrnFunction {
    pub fn constant(p: f64) -> Result<Self> {
        Params::Constant { p }.try_into()
    }

    pub fn linear(a: f64, b: f64) -> Result<Self> {
        Params::Linear { a, b }.try_into()
    }

    pub fn majority(m: u32) -> Result<Self> {
        Params::Majority { m }.try_into()
    }

    pub fn table(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        Params::Table { xs, ys }.try_into()
    }

    /// Evaluate `pi(x)`, rejecting arguments outside `[0, 1]`.
    pub fn eval<F: Real>(&self, x: F) -> Result<F> {
        if !(x >= F::zero() && x <= F::one()) {
            return Err(Error::Domain {
                what: "share",
                value: x.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(self.eval_clamped(x))
    }

    /// Evaluate with the argument clamped into `[0, 1]` first. Hot paths use
    /// this once the caller has established the domain up to rounding.
    pub fn eval_clamped<F: Real>(&self, x: F) -> F {
        let x = x.max(F::zero()).min(F::one());
        match &self.params {
            Params::Constant { p } => F::cast(*p),
            Params::Linear { a, b } => {
                let v = F::cast(*a) + F::cast(*b) * x;
                v.max(F::zero()).min(F::one())
            }
            Params::Majority { m } => majority_eval(*m, x),
            Params::Table { xs, ys } => table_eval(xs, ys, x),
        }
    }

    /// Derivative of `pi` at `x` (one-sided at kinks and clamp boundaries,
    /// taking the right-hand branch except at `x = 1`).
    pub fn derivative<F: Real>(&self, x: F) -> F {
        let x = x.max(F::zero()).min(F::one());
        match &self.params {
            Params::Constant { .. } => F::zero(),
            Params::Linear { a, b } => {
                let v = *a + *b * x.as_f64();
                if (0.0..=1.0).contains(&v) {
                    F::cast(*b)
                } else {
                    F::zero()
                }
            }
            Params::Majority { m } => {
                // d/dx P(Bin(m, x) >= k) = m C(m-1, k-1) x^(k-1) (1-x)^(m-k)
                let k = (m + 1) / 2;
                let c = f64::from(*m) * binomial(m - 1, k - 1);
                F::cast(c)
                    * x.powi((k - 1) as i32)
                    * (F::one() - x).powi((m - k) as i32)
            }
            Params::Table { xs, ys } => {
                let i = table_segment(xs, x.as_f64());
                F::cast((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            }
        }
    }

    /// A Lipschitz constant for `pi` on `[0, 1]` (tight per family).
    pub fn lipschitz_constant(&self) -> f64 {
        match &self.params {
            Params::Constant { .. } => 0.0,
            Params::Linear { b, .. } => b.abs(),
            Params::Majority { m } => {
                // The derivative peaks at x = 1/2.
                let k = (m + 1) / 2;
                f64::from(*m) * binomial(m - 1, k - 1) * 0.5f64.powi((m - 1) as i32)
            }
            Params::Table { xs, ys } => xs
                .windows(2)
                .zip(ys.windows(2))
                .map(|(xw, yw)| ((yw[1] - yw[0]) / (xw[1] - xw[0])).abs())
                .fold(0.0, f64::max),
        }
    }
}

fn majority_eval<F: Real>(m: u32, x: F) -> F {
    if x == F::zero() {
        return F::zero();
    }
    if x == F::one() {
        return F::one();
    }
    let k = (m + 1) / 2;
    let y = F::one() - x;
    let mut total = F::zero();
    for j in k..=m {
        let term = F::cast(binomial(m, j)) * x.powi(j as i32) * y.powi((m - j) as i32);
        total += term;
    }
    total.min(F::one())
}

fn table_segment(xs: &[f64], x: f64) -> usize {
    // Index of the segment [xs[i], xs[i+1]] containing x; right-closed at 1.
    match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(xs.len() - 2),
        Err(i) => i.saturating_sub(1).min(xs.len() - 2),
    }
}

fn table_eval<F: Real>(xs: &[f64], ys: &[f64], x: F) -> F {
    let i = table_segment(xs, x.as_f64());
    let x0 = F::cast(xs[i]);
    let x1 = F::cast(xs[i + 1]);
    let y0 = F::cast(ys[i]);
    let y1 = F::cast(ys[i + 1]);
    let t = (x - x0) / (x1 - x0);
    let v = y0 + t * (y1 - y0);
    v.max(F::zero()).min(F::one())
}
