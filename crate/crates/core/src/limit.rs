//! Dyadic refinement tools and exact event-driven path simulation.
//!
//! Solutions on dyadic time grids (step `2^-n`) embed into one another:
//! a piecewise-constant flow on level `n` is also piecewise constant on
//! every finer level, and coarsening is exact interval averaging. That
//! makes successive solutions directly comparable in L1 without any
//! interpolation error, which is what the refinement study measures.
//!
//! The path simulator runs the *continuous-time* dynamics under a
//! piecewise-constant policy: wealth drifts at rate `-c a` between events,
//! the hash rate refreshes only at dyadic interval boundaries, and jumps
//! arrive by thinning a unit-rate Poisson stream. The controlled intensity
//! `a / (a + eta m + eps)` never exceeds one, so a unit majorant is always
//! valid and a candidate is accepted with probability equal to the
//! intensity itself. One uniform is consumed per candidate whether or not
//! the current intensity is zero, so path counts and random streams stay
//! aligned across policies.

use std::ops::RangeInclusive;
use std::time::Instant;

use rand::Rng;
use rand_distr::Exp1;

use crate::equilibrium::{solve, EquilibriumResult, InitialFlow, SolverConfig};
use crate::error::{Error, Result};
use crate::game::GameInstance;
use crate::grid::TimeGrid;
use crate::model::intensity;
use crate::table::PolicyTable;

/// A piecewise-constant function of time on a dyadic grid: `horizon * 2^order`
/// equal intervals, one value per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFlow {
    order: u32,
    horizon: u32,
    values: Vec<f64>,
}

impl StepFlow {
    pub fn new(order: u32, horizon: u32, values: Vec<f64>) -> Result<Self> {
        let time = TimeGrid::new(order, horizon)?;
        if values.len() != time.steps() {
            return Err(Error::FlowLength {
                expected: time.steps(),
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure(format!(
                "step flow holds a non-finite value {bad}"
            )));
        }
        Ok(Self {
            order,
            horizon,
            values,
        })
    }

    #[must_use]
    pub fn order(&self) -> u32 {
        self.order
    }

    #[must_use]
    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    #[must_use]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at time `t`, reading the final interval at `t >= horizon`.
    #[must_use]
    pub fn value(&self, t: f64) -> f64 {
        let idx = (t * f64::from(1u32 << self.order)).floor();
        let idx = (idx.max(0.0) as usize).min(self.values.len() - 1);
        self.values[idx]
    }

    /// Rewrites the flow on another dyadic level. Refining repeats each
    /// value; coarsening takes exact interval averages. Both directions are
    /// L1-compatible: refining is lossless and coarsening is the L1
    /// projection onto the coarser level.
    pub fn discretize(&self, order: u32) -> Result<StepFlow> {
        if order == self.order {
            return Ok(self.clone());
        }
        if order > self.order {
            let reps = 1usize << (order - self.order);
            let mut values = Vec::with_capacity(self.values.len() * reps);
            for v in &self.values {
                values.extend(std::iter::repeat(*v).take(reps));
            }
            return StepFlow::new(order, self.horizon, values);
        }
        let group = 1usize << (self.order - order);
        let values = self
            .values
            .chunks_exact(group)
            .map(|chunk| chunk.iter().sum::<f64>() / group as f64)
            .collect();
        StepFlow::new(order, self.horizon, values)
    }

    /// L1 distance on `[0, horizon]`, computed on the common refinement.
    pub fn l1_distance(&self, other: &StepFlow) -> Result<f64> {
        if self.horizon != other.horizon {
            return Err(Error::ShapeMismatch(format!(
                "flows span different horizons: {} vs {}",
                self.horizon, other.horizon
            )));
        }
        let order = self.order.max(other.order);
        let a = self.discretize(order)?;
        let b = other.discretize(order)?;
        let dt = 0.5f64.powi(order as i32);
        Ok(a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs() * dt)
            .sum())
    }
}

/// Projects a continuous function of time onto a dyadic grid by per-interval
/// averaging (Simpson's rule, exact for cubics).
pub fn discretize_function(f: impl Fn(f64) -> f64, time: &TimeGrid) -> Result<StepFlow> {
    let mut values = Vec::with_capacity(time.steps());
    for k in 0..time.steps() {
        let t0 = time.t(k);
        let t1 = time.t(k + 1);
        let tm = 0.5 * (t0 + t1);
        values.push((f(t0) + 4.0 * f(tm) + f(t1)) / 6.0);
    }
    StepFlow::new(time.order(), time.horizon(), values)
}

/// The equilibrium flow of a solved game as a step function of time.
#[must_use]
pub fn interpolate_equilibrium(result: &EquilibriumResult) -> StepFlow {
    StepFlow {
        order: result.time.order(),
        horizon: result.time.horizon(),
        values: result.eta.values().to_vec(),
    }
}

/// One solved refinement level.
#[derive(Debug, Clone)]
pub struct RefinementLevel {
    pub order: u32,
    pub steps: usize,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    pub flow: StepFlow,
    /// L1 distance to the next (finer) level; `None` on the finest level.
    pub l1_to_next: Option<f64>,
}

/// Re-solves the same game on successively finer dyadic time grids and
/// measures how much the equilibrium flow still moves between levels.
///
/// A non-converging level is recorded with its final iterate rather than
/// aborting the study, so a slow level still contributes a distance. Only
/// constant initial flows make sense here (an explicit per-step guess is
/// tied to a single grid), and anything else is rejected.
pub fn refinement_study(
    game: &GameInstance,
    config: &SolverConfig,
    orders: RangeInclusive<u32>,
) -> Result<Vec<RefinementLevel>> {
    if orders.is_empty() {
        return Err(Error::InvalidConfig(
            "the refinement study needs at least one order".into(),
        ));
    }
    if !matches!(config.init, InitialFlow::Constant(_)) {
        return Err(Error::InvalidConfig(
            "the refinement study requires a constant initial flow".into(),
        ));
    }
    let mut levels = Vec::new();
    for order in orders {
        let refined = game.with_time(TimeGrid::new(order, game.time().horizon())?)?;
        let started = Instant::now();
        let result = match solve(&refined, config) {
            Ok(result) => result,
            Err(Error::NonConvergence { result, .. }) => *result,
            Err(other) => return Err(other),
        };
        levels.push(RefinementLevel {
            order,
            steps: result.time.steps(),
            iterations: result.iterations,
            converged: result.converged,
            wall_time_s: started.elapsed().as_secs_f64(),
            flow: interpolate_equilibrium(&result),
            l1_to_next: None,
        });
    }
    for i in 0..levels.len().saturating_sub(1) {
        let d = levels[i].flow.l1_distance(&levels[i + 1].flow)?;
        levels[i].l1_to_next = Some(d);
    }
    Ok(levels)
}

/// One linear stretch of a simulated path: wealth moves at `drift` from
/// `(t_start, x_start)` until the next segment begins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSegment {
    pub t_start: f64,
    pub x_start: f64,
    pub drift: f64,
}

/// A simulated continuous-time wealth path.
#[derive(Debug, Clone)]
pub struct ContinuousPath {
    segments: Vec<PathSegment>,
    jump_times: Vec<f64>,
    horizon: f64,
    x_terminal: f64,
}

impl ContinuousPath {
    #[must_use]
    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }

    #[must_use]
    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    #[must_use]
    pub fn jump_count(&self) -> usize {
        self.jump_times.len()
    }

    #[must_use]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    #[must_use]
    pub fn x_terminal(&self) -> f64 {
        self.x_terminal
    }

    /// Wealth at time `t`, right-continuous across jumps.
    #[must_use]
    pub fn wealth_at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon);
        let idx = self
            .segments
            .partition_point(|s| s.t_start <= t)
            .saturating_sub(1);
        let s = &self.segments[idx];
        s.x_start + s.drift * (t - s.t_start)
    }
}

/// Simulates one continuous-time path under a piecewise-constant policy and
/// a given mean hash-rate flow, starting from wealth `x0`.
///
/// The policy row for interval `k` is interpolated at the wealth held when
/// the interval begins, and the resulting hash rate stays frozen until the
/// next boundary, including across any jumps inside the interval.
pub fn simulate_continuous_path(
    game: &GameInstance,
    policy: &PolicyTable,
    flow: &StepFlow,
    x0: f64,
    rng: &mut impl Rng,
) -> Result<ContinuousPath> {
    let time = game.time();
    let steps = time.steps();
    if steps == 0 {
        return Err(Error::InvalidConfig(
            "path simulation needs at least one time step".into(),
        ));
    }
    if policy.steps() != steps || policy.nodes() != game.wealth().len() {
        return Err(Error::ShapeMismatch(format!(
            "policy is {} x {} but the game needs {} x {}",
            policy.steps(),
            policy.nodes(),
            steps,
            game.wealth().len()
        )));
    }
    if flow.horizon() != time.horizon() {
        return Err(Error::ShapeMismatch(format!(
            "flow spans horizon {} but the game runs to {}",
            flow.horizon(),
            time.horizon()
        )));
    }
    let params = game.params();
    let wealth = game.wealth();
    let mut segments = Vec::new();
    let mut jump_times = Vec::new();
    let mut t = 0.0f64;
    let mut x = x0;
    let mut k = 0usize;
    let mut a = wealth.interp(policy.row(0), x);
    let mut drift = -(params.c * a);
    segments.push(PathSegment {
        t_start: t,
        x_start: x,
        drift,
    });
    let mut next_candidate = t + rng.sample::<f64, _>(Exp1);
    loop {
        let boundary = time.t(k + 1);
        if next_candidate < boundary {
            x += drift * (next_candidate - t);
            t = next_candidate;
            let lam = intensity(a, flow.value(t), params);
            debug_assert!(lam <= 1.0, "unit majorant violated: {lam}");
            let u: f64 = rng.random();
            if u < lam {
                x += params.r;
                jump_times.push(t);
                segments.push(PathSegment {
                    t_start: t,
                    x_start: x,
                    drift,
                });
            }
            next_candidate = t + rng.sample::<f64, _>(Exp1);
        } else {
            x += drift * (boundary - t);
            t = boundary;
            k += 1;
            if k == steps {
                break;
            }
            a = wealth.interp(policy.row(k), x);
            drift = -(params.c * a);
            segments.push(PathSegment {
                t_start: t,
                x_start: x,
                drift,
            });
        }
    }
    Ok(ContinuousPath {
        segments,
        jump_times,
        horizon: t,
        x_terminal: x,
    })
}
