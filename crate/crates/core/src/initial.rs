//! Initial wealth distributions and their projection onto the grid.
//!
//! A continuous initial law is turned into nodal masses with the same
//! mean-preserving two-point deposit the forward equation uses: each sliver
//! of probability between two nodes is split between them in proportion to
//! proximity. For a density this collapses to hat-function weighting, which
//! needs only cell probabilities and cell partial means; for the truncated
//! normal both have closed forms in the standard normal cdf and pdf.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::grid::{TimeGrid, WealthGrid};
use crate::model::ModelParams;

/// Initial wealth law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialWealth {
    /// Normal(mean, sd) conditioned on `[0, inf)`.
    Normal { mean: f64, sd: f64 },
    /// All mass at a single wealth.
    Dirac { x: f64 },
    /// Explicit atoms `x` with probabilities `w` summing to one.
    Atoms { x: Vec<f64>, w: Vec<f64> },
}

impl InitialWealth {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialWealth::Normal { mean, sd } => {
                if mean.is_finite() && sd.is_finite() && *sd > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!(
                        "truncated normal needs finite mean and sd > 0, got ({mean}, {sd})"
                    )))
                }
            }
            InitialWealth::Dirac { x } => {
                if x.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig("Dirac point must be finite".into()))
                }
            }
            InitialWealth::Atoms { x, w } => {
                if x.is_empty() || x.len() != w.len() {
                    return Err(Error::InvalidConfig(format!(
                        "{} atoms against {} probabilities",
                        x.len(),
                        w.len()
                    )));
                }
                if x.iter().any(|v| !v.is_finite()) || x.windows(2).any(|p| p[0] >= p[1]) {
                    return Err(Error::InvalidConfig(
                        "atom locations must be finite and strictly increasing".into(),
                    ));
                }
                if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::InvalidConfig(
                        "atom probabilities must be nonnegative".into(),
                    ));
                }
                let total: f64 = w.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidConfig(format!(
                        "atom probabilities sum to {total}, not 1"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Quantile function; `p` must lie in `(0, 1)`.
    ///
    /// # Panics
    ///
    /// Panics if `p` is outside `(0, 1)`.
    #[must_use]
    pub fn percentile(&self, p: f64) -> f64 {
        assert!(p > 0.0 && p < 1.0, "percentile needs p in (0, 1), got {p}");
        match self {
            InitialWealth::Normal { mean, sd } => {
                let std = Normal::standard();
                let alpha = std.cdf(-mean / sd);
                mean + sd * std.inverse_cdf(alpha + p * (1.0 - alpha))
            }
            InitialWealth::Dirac { x } => *x,
            InitialWealth::Atoms { x, w } => {
                let mut acc = 0.0;
                for (xi, wi) in x.iter().zip(w) {
                    acc += wi;
                    if acc >= p {
                        return *xi;
                    }
                }
                x[x.len() - 1]
            }
        }
    }

    /// Projects the law onto the grid by mean-preserving deposits and
    /// normalizes the nodal masses to sum to exactly one. Mass beyond the
    /// grid extent lands on the boundary nodes.
    pub fn project(&self, grid: &WealthGrid) -> Result<Vec<f64>> {
        self.validate()?;
        let mut mu = vec![0.0; grid.len()];
        match self {
            InitialWealth::Normal { mean, sd } => {
                let std = Normal::standard();
                let z = |x: f64| (x - mean) / sd;
                // Truncated cdf and cell partial means, both relative to the
                // mass on [0, inf).
                let tail = 1.0 - std.cdf(z(0.0));
                if tail <= 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "Normal({mean}, {sd}) leaves no mass on [0, inf)"
                    )));
                }
                let cdf = |x: f64| {
                    if x <= 0.0 {
                        0.0
                    } else {
                        (std.cdf(z(x)) - std.cdf(z(0.0))) / tail
                    }
                };
                // E[Y ; a < Y <= b] for the truncated law.
                let partial_mean = |a: f64, b: f64| {
                    let a = a.max(0.0);
                    if b <= a {
                        return 0.0;
                    }
                    let prob = std.cdf(z(b)) - std.cdf(z(a));
                    (mean * prob + sd * (std.pdf(z(a)) - std.pdf(z(b)))) / tail
                };
                mu[0] += cdf(grid.x_min());
                let last = grid.len() - 1;
                mu[last] += 1.0 - cdf(grid.x_max());
                for i in 0..last {
                    let (xa, xb) = (grid.x(i), grid.x(i + 1));
                    let h = xb - xa;
                    let prob = cdf(xb) - cdf(xa);
                    if prob <= 0.0 {
                        continue;
                    }
                    // Far tails compute the partial mean as a difference of
                    // near-equal quantities; clamping it into the cell keeps
                    // both deposit weights nonnegative.
                    let m = partial_mean(xa, xb).clamp(xa * prob, xb * prob);
                    mu[i] += (xb * prob - m) / h;
                    mu[i + 1] += (m - xa * prob) / h;
                }
            }
            InitialWealth::Dirac { x } => {
                grid.deposit(&mut mu, *x, 1.0);
            }
            InitialWealth::Atoms { x, w } => {
                for (xi, wi) in x.iter().zip(w) {
                    grid.deposit(&mut mu, *xi, *wi);
                }
            }
        }
        let total: f64 = mu.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "projected initial mass is {total}"
            )));
        }
        for m in &mut mu {
            *m /= total;
        }
        Ok(mu)
    }

    /// Draws one wealth from the law. Exactly one uniform is consumed per
    /// call, which keeps per-agent RNG streams aligned regardless of the
    /// law's shape.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.random();
        let u = u.clamp(f64::MIN_POSITIVE, 1.0 - 1e-16);
        match self {
            InitialWealth::Dirac { x } => *x,
            _ => self.percentile(u),
        }
    }
}

/// Default wealth-grid extent: start from extreme initial-wealth quantiles
/// and widen by the largest possible cumulative reward upward and the
/// largest possible cumulative spend downward, so no trajectory can leave
/// the grid.
#[must_use]
pub fn default_extent(init: &InitialWealth, params: &ModelParams, time: &TimeGrid) -> (f64, f64) {
    let horizon = time.horizon() as f64;
    let x_max = init.percentile(0.999) + time.steps() as f64 * params.r;
    let x_min = init.percentile(0.001) - params.c * params.a_max * horizon;
    (x_min, x_max)
}
