//! The mining game's one-step model: reward intensity, wealth kinematics,
//! and terminal utility.
//!
//! A miner running hash rate `a` against an aggregate hash rate `h` earns
//! block rewards at the regularized relative intensity
//!
//! ```text
//! lambda_eps(a, h) = a / (a + h * m + eps)   for a > 0,   0 for a = 0,
//! ```
//!
//! which is the miner's share of total work, damped by `eps >= 0` so the
//! share stays well defined when the rest of the network goes quiet. Over a
//! dyadic step of length `dt = 2^-n` the probability of winning a block is
//! `lambda * dt`, and the two possible successor wealths are
//!
//! ```text
//! x_up = x - c * a * dt + r        (block won)
//! x_dn = x - c * a * dt            (block missed)
//! ```
//!
//! so `x_up - x_dn = r` always. The aggregate `h` enters either as a scalar
//! mean hash rate or as a discrete control measure; the two jump-probability
//! schemes below differ only in whether the intensity is averaged against
//! the measure or evaluated at its mean.

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ActionGrid, TimeGrid, WealthGrid};

/// Static parameters of the mining game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Electricity cost per unit hash rate per unit time.
    pub c: f64,
    /// Block reward.
    pub r: f64,
    /// Population scale multiplying the mean-field hash rate inside the
    /// intensity denominator.
    pub m: f64,
    /// Intensity regularization `eps`.
    pub eps: f64,
    /// Hash-rate bound `L`; actions live in `[0, L]`.
    pub a_max: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            r: 1.0,
            m: 1000.0,
            eps: 0.0,
            a_max: 10.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.c > 0.0
            && self.c.is_finite()
            && self.r > 0.0
            && self.r.is_finite()
            && self.m > 0.0
            && self.m.is_finite()
            && self.eps >= 0.0
            && self.eps.is_finite()
            && self.a_max > 0.0
            && self.a_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "need c > 0, r > 0, m > 0, eps >= 0, a_max > 0; got c = {}, r = {}, \
                 m = {}, eps = {}, a_max = {}",
                self.c, self.r, self.m, self.eps, self.a_max
            )))
        }
    }
}

/// How the one-step jump probability reads the mean-field flow.
///
/// Scheme 1 integrates the intensity against the control measure; scheme 2
/// evaluates the intensity at the measure's mean. They coincide whenever the
/// measure is a Dirac mass. In configuration files the schemes are written
/// as the integers `1` and `2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Scheme 1: `p = dt * integral of lambda_eps(a, h) d eta(h)`.
    IntensityAverage,
    /// Scheme 2: `p = dt * lambda_eps(a, mean of eta)`.
    #[default]
    MeanHashRate,
}

impl Scheme {
    #[must_use]
    pub fn index(&self) -> u8 {
        match self {
            Scheme::IntensityAverage => 1,
            Scheme::MeanHashRate => 2,
        }
    }
}

impl Serialize for Scheme {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.index())
    }
}

impl<'de> Deserialize<'de> for Scheme {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct SchemeVisitor;
        impl Visitor<'_> for SchemeVisitor {
            type Value = Scheme;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("the scheme number 1 or 2")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Scheme, E> {
                match v {
                    1 => Ok(Scheme::IntensityAverage),
                    2 => Ok(Scheme::MeanHashRate),
                    other => Err(E::custom(format!("scheme must be 1 or 2, got {other}"))),
                }
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Scheme, E> {
                self.visit_i64(v as i64)
            }
        }
        deserializer.deserialize_i64(SchemeVisitor)
    }
}

/// Discrete probability measure over hash rates, used by scheme 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteControlMeasure {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteControlMeasure {
    /// Measure with the given support `points` (finite, nonnegative,
    /// strictly increasing) and `weights` (nonnegative, summing to one
    /// within `1e-12`).
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} support points against {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidMeasure(
                "support points must be finite and nonnegative".into(),
            ));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMeasure(
                "support points must be strictly increasing".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidMeasure(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self { points, weights })
    }

    /// Point mass at `h`.
    pub fn dirac(h: f64) -> Result<Self> {
        Self::new(vec![h], vec![1.0])
    }

    /// Measure carried by the points of an action grid.
    pub fn on_grid(grid: &ActionGrid, weights: Vec<f64>) -> Result<Self> {
        Self::new(grid.points().to_vec(), weights)
    }

    #[must_use]
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    #[must_use]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// First moment of the measure.
    #[must_use]
    pub fn mean(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| p * w)
            .sum()
    }

    /// Integral of `f` against the measure.
    #[must_use]
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(*p))
            .sum()
    }
}

/// One step of a mean-field flow: either a bare mean hash rate or a full
/// control measure.
#[derive(Debug, Clone, Copy)]
pub enum FlowEntry<'a> {
    Mean(f64),
    Measure(&'a DiscreteControlMeasure),
}

impl FlowEntry<'_> {
    /// Mean hash rate carried by the entry.
    #[must_use]
    pub fn mean(&self) -> f64 {
        match self {
            FlowEntry::Mean(h) => *h,
            FlowEntry::Measure(m) => m.mean(),
        }
    }
}

/// Regularized reward intensity `lambda_eps(a, h)`, the miner's share of
/// total hash power. Zero for `a <= 0`; always in `[0, 1]`.
#[must_use]
pub fn intensity(a: f64, h: f64, params: &ModelParams) -> f64 {
    debug_assert!(h >= 0.0, "aggregate hash rate must be nonnegative");
    if a <= 0.0 {
        return 0.0;
    }
    a / (a + h * params.m + params.eps)
}

/// One-step block probability for hash rate `a` against the flow entry.
///
/// Under scheme 1 a scalar entry is read as a Dirac measure and a measure
/// entry is integrated; under scheme 2 a measure entry contributes only its
/// mean. Either way the result is `<= dt <= 1`.
#[must_use]
pub fn jump_probability(
    a: f64,
    entry: FlowEntry<'_>,
    time: &TimeGrid,
    params: &ModelParams,
    scheme: Scheme,
) -> f64 {
    let dt = time.dt();
    match (scheme, entry) {
        (Scheme::IntensityAverage, FlowEntry::Measure(eta)) => {
            dt * eta.integrate(|h| intensity(a, h, params))
        }
        (_, entry) => dt * intensity(a, entry.mean(), params),
    }
}

/// Successor wealths `(x_up, x_dn)` after one step at hash rate `a`:
/// both pay the electricity cost `c * a * dt`, and `x_up` adds the block
/// reward `r`, so `x_up - x_dn = r`.
#[must_use]
pub fn step_destinations(x: f64, a: f64, time: &TimeGrid, params: &ModelParams) -> (f64, f64) {
    let spent = x - params.c * a * time.dt();
    (spent + params.r, spent)
}

/// Terminal utility specification.
///
/// CRRA kinds clamp negative wealth to zero before evaluating, so they stay
/// defined on grids whose lower extent dips below zero; the clamp makes
/// `phi` constant there, which is the natural continuation of "bankrupt".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum UtilitySpec {
    /// `phi(x) = 2 * sqrt(x)`, the CRRA member with exponent one half.
    CrraSqrt,
    /// `phi(x) = x^(1-gamma) / (1-gamma)`, or `ln x` at `gamma = 1`.
    Crra { gamma: f64 },
    /// Constant terminal utility; makes every policy optimal and the zero
    /// flow an equilibrium, which is useful for degenerate checks.
    Constant { value: f64 },
    /// Piecewise-linear table on its own strictly increasing support.
    /// Evaluation outside the support is an error rather than an
    /// extrapolation.
    CustomTable { x: Vec<f64>, phi: Vec<f64> },
}

impl UtilitySpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            UtilitySpec::CrraSqrt => Ok(()),
            UtilitySpec::Crra { gamma } => {
                if gamma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParams(format!("gamma = {gamma}")))
                }
            }
            UtilitySpec::Constant { value } => {
                if value.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParams(format!("constant utility = {value}")))
                }
            }
            UtilitySpec::CustomTable { x, phi } => {
                if x.len() < 2 || x.len() != phi.len() {
                    return Err(Error::InvalidParams(format!(
                        "utility table has {} abscissae against {} values",
                        x.len(),
                        phi.len()
                    )));
                }
                if x.iter().chain(phi.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParams(
                        "utility table entries must be finite".into(),
                    ));
                }
                if x.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidParams(
                        "utility table abscissae must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Evaluates the terminal utility at wealth `x`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            UtilitySpec::CrraSqrt => Ok(2.0 * x.max(0.0).sqrt()),
            UtilitySpec::Crra { gamma } => {
                let xc = x.max(0.0);
                if *gamma == 1.0 {
                    Ok(xc.ln())
                } else {
                    Ok(xc.powf(1.0 - gamma) / (1.0 - gamma))
                }
            }
            UtilitySpec::Constant { value } => Ok(*value),
            UtilitySpec::CustomTable { x: xs, phi } => {
                let lo = xs[0];
                let hi = xs[xs.len() - 1];
                if x < lo || x > hi {
                    return Err(Error::UtilityOutsideSupport { x, lo, hi });
                }
                let i = xs.partition_point(|p| *p <= x).clamp(1, xs.len() - 1) - 1;
                let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
                Ok((1.0 - t) * phi[i] + t * phi[i + 1])
            }
        }
    }

    /// Evaluates the utility on every node of a wealth grid, insisting on
    /// finite values so the terminal row of a value table is usable.
    pub fn on_grid(&self, grid: &WealthGrid) -> Result<Vec<f64>> {
        self.validate()?;
        grid.points()
            .iter()
            .map(|&x| {
                let v = self.eval(x)?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::UtilityNotFinite { x })
                }
            })
            .collect()
    }
}
