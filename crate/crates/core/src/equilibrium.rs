//! Damped fixed-point iteration on the mean hash-rate flow.
//!
//! An equilibrium flow reproduces itself: best-responding to it and pushing
//! the population forward under that best response returns the same flow.
//! The solver iterates
//!
//! ```text
//! eta_{l+1} = damping * eta_l + (1 - damping) * mean(best_response(eta_l))
//! ```
//!
//! and stops once the sup-norm update falls below the tolerance. Heavy
//! damping looks wasteful but is what makes the scheme robust: the
//! best-response map is close to a step function in the flow (small changes
//! in `eta` can flip the argmax at many nodes at once), and the damped
//! average tames that into a contraction in practice.
//!
//! After the loop, one undamped best-response pass at the settled flow
//! produces the reported policy, value surface, and distribution flow, so
//! every published artifact is exactly consistent with the published `eta`
//! rather than with the second-to-last iterate.

use serde::{Deserialize, Serialize};

use crate::engine::{DpEngine, EngineConfig};
use crate::error::{Error, Result};
use crate::flow::{consistency_residual, HashRateFlow};
use crate::game::GameInstance;
use crate::grid::TimeGrid;
use crate::model::Scheme;
use crate::table::{DistributionFlow, PolicyTable, ValueTable};

/// Starting guess for the flow iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialFlow {
    /// The same mean hash rate on every step.
    Constant(f64),
    /// One value per step, matching the time grid exactly.
    Explicit(Vec<f64>),
}

impl Default for InitialFlow {
    fn default() -> Self {
        InitialFlow::Constant(1.0)
    }
}

impl InitialFlow {
    /// Materializes the guess for a grid with `steps` steps and action
    /// bound `bound`.
    pub fn resolve(&self, steps: usize, bound: f64) -> Result<HashRateFlow> {
        match self {
            InitialFlow::Constant(v) => HashRateFlow::constant(*v, steps, bound),
            InitialFlow::Explicit(values) => {
                if values.len() != steps {
                    return Err(Error::FlowLength {
                        expected: steps,
                        got: values.len(),
                    });
                }
                HashRateFlow::new(values.clone(), bound)
            }
        }
    }
}

/// Solver knobs. The defaults are the ones used throughout the test suite:
/// damping 0.9, tolerance 1e-8 on the damped update, at most 5000 rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Weight kept on the current flow each round; must lie in [0, 1).
    pub damping: f64,
    /// Sup-norm threshold on the damped update.
    pub tol: f64,
    /// Maximum number of fixed-point rounds before giving up.
    pub max_iter: usize,
    /// Jump-probability discretization used by the engine.
    pub scheme: Scheme,
    /// Starting guess for the flow.
    pub init: InitialFlow,
    /// Factor relating the stopping tolerance to the certified bound on the
    /// final consistency residual.
    pub residual_safety: f64,
    /// Engine knobs forwarded to the backward/forward passes.
    pub engine: EngineConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            damping: 0.9,
            tol: 1e-8,
            max_iter: 5000,
            scheme: Scheme::default(),
            init: InitialFlow::default(),
            residual_safety: 10.0,
            engine: EngineConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping >= 0.0 && self.damping < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "damping {} must lie in [0, 1)",
                self.damping
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "tol {} must be positive and finite",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.residual_safety >= 1.0 && self.residual_safety.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "residual_safety {} must be at least 1",
                self.residual_safety
            )));
        }
        self.engine.validate()
    }

    /// Certified upper bound on the consistency residual of a converged run.
    /// A damped update below `tol` pins the undamped one below
    /// `tol / (1 - damping)`; the safety factor absorbs the final
    /// best-response pass moving once more.
    #[must_use]
    pub fn residual_bound(&self) -> f64 {
        self.tol / (1.0 - self.damping) * self.residual_safety
    }
}

/// One round of the damped iteration, with everything the round computed.
#[derive(Debug, Clone)]
pub struct FixedPointStep {
    /// Damped average of the incoming flow and the best-response mean.
    pub eta_next: HashRateFlow,
    /// Best-response policy against the incoming flow.
    pub policy: PolicyTable,
    /// Value surface of that best response.
    pub values: ValueTable,
    /// Distribution flow induced by the best response.
    pub flow: DistributionFlow,
    /// Mean hash rate realized by the best response, per step.
    pub control_mean: HashRateFlow,
    /// Total mass the forward pass clamped onto the grid boundary.
    pub clamped_mass: f64,
    /// Sup-norm of the damped update.
    pub residual: f64,
}

/// Progress report passed to the observer once per round.
#[derive(Debug, Clone, Copy)]
pub struct IterationEvent {
    pub iteration: usize,
    pub residual: f64,
    pub flow_min: f64,
    pub flow_max: f64,
}

/// A solved (or abandoned) equilibrium computation.
#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    /// The settled mean hash-rate flow.
    pub eta: HashRateFlow,
    /// Best response against `eta`.
    pub policy: PolicyTable,
    /// Value surface of that best response.
    pub values: ValueTable,
    /// Population distribution induced by the best response.
    pub flow: DistributionFlow,
    /// Mean hash rate realized by the best response.
    pub control_mean: HashRateFlow,
    /// Mass the final forward pass clamped onto the grid boundary.
    pub clamped_mass: f64,
    /// Damped residual after each round, in order.
    pub residual_trace: Vec<f64>,
    /// Number of rounds performed.
    pub iterations: usize,
    /// Whether the loop hit the tolerance before `max_iter`.
    pub converged: bool,
    /// Sup-norm distance between `eta` and `control_mean`.
    pub consistency_residual: f64,
    /// Certified bound the consistency residual must satisfy when converged.
    pub residual_bound: f64,
    /// Time grid the run used.
    pub time: TimeGrid,
}

/// One damped round: best-respond to `eta`, push the population forward,
/// and average the realized mean back into the flow.
pub fn fixed_point_step(
    engine: &DpEngine<'_>,
    eta: &HashRateFlow,
    damping: f64,
) -> Result<FixedPointStep> {
    if !(0.0..1.0).contains(&damping) {
        return Err(Error::InvalidConfig(format!(
            "damping {damping} must lie in [0, 1)"
        )));
    }
    let (values, policy) = engine.backward_induction(eta)?;
    let forward = engine.kolmogorov_forward(&policy, eta)?;
    let mut next = Vec::with_capacity(eta.values().len());
    let mut residual = 0.0f64;
    for (e, m) in eta.values().iter().zip(forward.control_mean.values()) {
        let blended = damping * e + (1.0 - damping) * m;
        residual = residual.max((blended - e).abs());
        next.push(blended);
    }
    let eta_next = HashRateFlow::new(next, eta.bound())?;
    Ok(FixedPointStep {
        eta_next,
        policy,
        values,
        flow: forward.distribution,
        control_mean: forward.control_mean,
        clamped_mass: forward.clamped_mass,
        residual,
    })
}

/// Solves for the equilibrium flow of `game` under `config`.
pub fn solve(game: &GameInstance, config: &SolverConfig) -> Result<EquilibriumResult> {
    solve_with(game, config, |_| {})
}

/// Like [`solve`], invoking `on_iter` after every round.
///
/// On non-convergence the partial result (final iterate, its best response,
/// and the full residual trace) rides along inside the error so callers can
/// still inspect or persist it.
pub fn solve_with(
    game: &GameInstance,
    config: &SolverConfig,
    mut on_iter: impl FnMut(&IterationEvent),
) -> Result<EquilibriumResult> {
    config.validate()?;
    let steps = game.time().steps();
    if steps == 0 {
        return Err(Error::InvalidConfig(
            "the time grid has no decision steps; nothing to solve".into(),
        ));
    }
    let engine = DpEngine::new(game, config.scheme, config.engine)?;
    let mut eta = config.init.resolve(steps, game.actions().bound())?;
    let mut trace = Vec::new();
    let mut converged = false;
    while trace.len() < config.max_iter {
        let step = fixed_point_step(&engine, &eta, config.damping)?;
        trace.push(step.residual);
        on_iter(&IterationEvent {
            iteration: trace.len() - 1,
            residual: step.residual,
            flow_min: step.eta_next.min(),
            flow_max: step.eta_next.max(),
        });
        eta = step.eta_next;
        if step.residual <= config.tol {
            converged = true;
            break;
        }
    }
    // Publish artifacts from one undamped pass at the settled flow, so the
    // reported policy, values, and distribution answer to `eta` itself.
    let (values, policy) = engine.backward_induction(&eta)?;
    let forward = engine.kolmogorov_forward(&policy, &eta)?;
    let consistency = consistency_residual(&eta, &forward.control_mean)?;
    let iterations = trace.len();
    let residual = trace.last().copied().unwrap_or(f64::INFINITY);
    let result = EquilibriumResult {
        eta,
        policy,
        values,
        flow: forward.distribution,
        control_mean: forward.control_mean,
        clamped_mass: forward.clamped_mass,
        residual_trace: trace,
        iterations,
        converged,
        consistency_residual: consistency,
        residual_bound: config.residual_bound(),
        time: *game.time(),
    };
    if converged {
        Ok(result)
    } else {
        Err(Error::NonConvergence {
            result: Box::new(result),
            residual,
            iterations,
            tol: config.tol,
        })
    }
}

/// Average initial-wealth value lost by playing `candidate` instead of the
/// best response, both against the same flow `eta`. Nonnegative up to
/// floating-point noise; zero exactly at a best response.
pub fn best_response_value_gap(
    engine: &DpEngine<'_>,
    eta: &HashRateFlow,
    candidate: &PolicyTable,
) -> Result<f64> {
    let (v_br, _) = engine.backward_induction(eta)?;
    let v_cand = engine.evaluate_policy(candidate, eta)?;
    let mu0 = engine.game().mu0();
    Ok(mu0
        .iter()
        .zip(v_br.row(0).iter().zip(v_cand.row(0)))
        .map(|(m, (b, c))| m * (b - c))
        .sum())
}
