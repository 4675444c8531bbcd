//! Time, wealth, and action discretizations.
//!
//! The time grid is dyadic: refinement order `n` splits each unit of the
//! integer horizon `T` into `2^n` steps of length `dt = 2^-n`, giving
//! `K = T * 2^n` decision steps at times `t_k = k * dt`. Powers of two keep
//! every breakpoint exactly representable, so flows at different orders can
//! be compared without rounding slop.
//!
//! The wealth grid is a strictly increasing set of real nodes. Values
//! between nodes are read through linear interpolation and masses are
//! written back through the adjoint operation, a two-point deposit that
//! splits mass between the bracketing nodes in proportion to proximity.
//! The split preserves the mean of the deposited mass exactly, which is
//! what keeps forward propagation consistent with the controlled dynamics.
//! Outside the extent both operations clamp to the boundary node.

use crate::error::{Error, Result};

/// Dyadic time grid with `K = horizon * 2^order` steps of length `2^-order`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    order: u32,
    horizon: u32,
}

impl TimeGrid {
    /// Builds the grid of order `order` on the integer horizon `[0, horizon]`.
    ///
    /// A zero horizon is allowed and describes the degenerate game with no
    /// decision steps; solvers that need at least one step validate that
    /// themselves.
    pub fn new(order: u32, horizon: u32) -> Result<Self> {
        if order > 24 {
            return Err(Error::InvalidGrid(format!(
                "refinement order {order} is past any usable resolution (max 24)"
            )));
        }
        let steps = (horizon as u64) << order;
        if steps > 1 << 40 {
            return Err(Error::InvalidGrid(format!(
                "time grid would have {steps} steps"
            )));
        }
        Ok(Self { order, horizon })
    }

    /// Dyadic refinement order `n`.
    #[must_use]
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Integer horizon `T`.
    #[must_use]
    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    /// Number of decision steps `K = T * 2^n`.
    #[must_use]
    pub fn steps(&self) -> usize {
        (self.horizon as usize) << self.order
    }

    /// Step length `dt = 2^-n`, exact in binary floating point.
    #[must_use]
    pub fn dt(&self) -> f64 {
        0.5f64.powi(self.order as i32)
    }

    /// Time `t_k = k * dt` of step `k`; `k` may run to `steps()` inclusive.
    #[must_use]
    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }
}

/// Strictly increasing grid of wealth nodes with linear interpolation and
/// mass deposit.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthGrid {
    points: Vec<f64>,
    uniform_step: Option<f64>,
}

impl WealthGrid {
    /// Uniform grid of `count` nodes spanning `[x_min, x_max]`.
    pub fn uniform(x_min: f64, x_max: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidGrid(format!(
                "wealth grid needs at least 2 nodes, got {count}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::InvalidGrid(format!(
                "wealth extent [{x_min}, {x_max}] is not a finite interval"
            )));
        }
        let h = (x_max - x_min) / (count - 1) as f64;
        let mut points: Vec<f64> = (0..count).map(|i| x_min + i as f64 * h).collect();
        points[count - 1] = x_max;
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(format!(
                "extent [{x_min}, {x_max}] is too narrow for {count} distinct nodes"
            )));
        }
        Ok(Self {
            points,
            uniform_step: Some(h),
        })
    }

    /// Grid on explicit nodes, which must be finite and strictly increasing.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "wealth grid needs at least 2 nodes, got {}",
                points.len()
            )));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid("wealth node is not finite".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(
                "wealth nodes must be strictly increasing".into(),
            ));
        }
        let h = (points[points.len() - 1] - points[0]) / (points.len() - 1) as f64;
        let uniform = points
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h);
        Ok(Self {
            points,
            uniform_step: uniform.then_some(h),
        })
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[must_use]
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Node coordinate `x_i`.
    #[must_use]
    pub fn x(&self, i: usize) -> f64 {
        self.points[i]
    }

    #[must_use]
    pub fn x_min(&self) -> f64 {
        self.points[0]
    }

    #[must_use]
    pub fn x_max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    #[must_use]
    pub fn extent(&self) -> f64 {
        self.x_max() - self.x_min()
    }

    /// Locates `x` on the grid: returns the cell index `lo` and the blend
    /// weight `t in [0, 1]` such that `x ~ (1-t) * x_lo + t * x_{lo+1}`.
    /// Points outside the extent clamp to `(0, 0)` or `(len-2, 1)`.
    #[must_use]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let pts = &self.points;
        let last = pts.len() - 1;
        if x <= pts[0] {
            return (0, 0.0);
        }
        if x >= pts[last] {
            return (last - 1, 1.0);
        }
        let mut lo = match self.uniform_step {
            Some(h) => (((x - pts[0]) / h) as usize).min(last - 1),
            None => pts.partition_point(|p| *p <= x) - 1,
        };
        while lo > 0 && x < pts[lo] {
            lo -= 1;
        }
        while lo < last - 1 && x >= pts[lo + 1] {
            lo += 1;
        }
        let t = (x - pts[lo]) / (pts[lo + 1] - pts[lo]);
        (lo, t)
    }

    /// Linear interpolation of nodal `values` at `x`, clamped to the nearest
    /// boundary value outside the extent. At a node it reproduces the stored
    /// value exactly.
    ///
    /// # Panics
    ///
    /// Panics if `values` does not have one entry per node.
    #[must_use]
    pub fn interp(&self, values: &[f64], x: f64) -> f64 {
        assert_eq!(
            values.len(),
            self.points.len(),
            "value row does not match the wealth grid"
        );
        let (lo, t) = self.locate(x);
        (1.0 - t) * values[lo] + t * values[lo + 1]
    }

    /// Deposits `mass` at `x` onto the two bracketing nodes with weights
    /// proportional to proximity, so the deposited mean is preserved.
    /// Mass aimed outside the extent piles onto the boundary node; the
    /// amount that was clamped this way is returned so callers can monitor
    /// boundary leakage.
    ///
    /// # Panics
    ///
    /// Panics if `masses` does not have one entry per node.
    pub fn deposit(&self, masses: &mut [f64], x: f64, mass: f64) -> f64 {
        assert_eq!(
            masses.len(),
            self.points.len(),
            "mass row does not match the wealth grid"
        );
        let last = self.points.len() - 1;
        if x < self.points[0] {
            masses[0] += mass;
            return mass;
        }
        if x > self.points[last] {
            masses[last] += mass;
            return mass;
        }
        let (lo, t) = self.locate(x);
        let hi_part = mass * t;
        masses[lo] += mass - hi_part;
        masses[lo + 1] += hi_part;
        0.0
    }
}

/// Strictly increasing grid of admissible hash rates, always containing the
/// idle action `0` as its first point and the bound `L` as its last.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionGrid {
    points: Vec<f64>,
}

impl ActionGrid {
    /// Uniform grid of `count` actions on `[0, bound]`.
    pub fn uniform(bound: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidGrid(format!(
                "action grid needs at least 2 points, got {count}"
            )));
        }
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "action bound {bound} must be positive and finite"
            )));
        }
        let h = bound / (count - 1) as f64;
        let mut points: Vec<f64> = (0..count).map(|j| j as f64 * h).collect();
        points[0] = 0.0;
        points[count - 1] = bound;
        Ok(Self { points })
    }

    /// Grid on explicit actions; the first must be exactly `0`, the rest
    /// strictly increasing and finite.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "action grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points[0] != 0.0 {
            return Err(Error::InvalidGrid(format!(
                "action grid must start at 0, got {}",
                points[0]
            )));
        }
        if points.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidGrid("action is not finite".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(
                "actions must be strictly increasing".into(),
            ));
        }
        Ok(Self { points })
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[must_use]
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Action value `a_j`.
    #[must_use]
    pub fn a(&self, j: usize) -> f64 {
        self.points[j]
    }

    /// Upper bound `L`, the last grid point.
    #[must_use]
    pub fn bound(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
}
