//! Finite-horizon mean field games with controlled jump intensity, on a
//! grid, with the cryptocurrency-mining competition as the flagship model.
//!
//! A continuum of miners choose hash rates `a` in `[0, L]`. Hash rate costs
//! `c * a` per unit of time and wins the next reward `r` at intensity
//! `a / (a + eta m + eps)`, where `eta` is the population's mean hash rate,
//! `m` scales the crowd, and `eps` is a dummy competitor. Each miner
//! maximizes expected terminal utility `phi(X_T)` of accumulated wealth.
//! The interaction runs through the control average only, so an equilibrium
//! is a deterministic flow `t -> eta(t)` that reproduces itself: best
//! responding to it and averaging the resulting controls returns the same
//! flow.
//!
//! Everything here is discrete-time on dyadic grids (step `2^-n`), which
//! nest as `n` grows and make successive refinements directly comparable.
//! The pieces:
//!
//! * [`model`]: intensities, jump probabilities, per-step wealth moves,
//!   terminal utilities, and the two jump-probability discretizations.
//! * [`grid`], [`table`], [`flow`]: time/wealth/action grids and the dense
//!   value, policy, and distribution containers that live on them.
//! * [`initial`]: initial wealth laws and their mean-preserving projection
//!   onto the grid.
//! * [`game`]: one fully validated problem instance.
//! * [`engine`]: Bellman backups with golden-section action refinement and
//!   the adjoint forward propagation of the population law.
//! * [`equilibrium`]: the damped fixed-point loop on the flow, with a
//!   certified consistency residual on success and the partial iterate on
//!   failure.
//! * [`limit`]: dyadic refinement studies and exact event-driven simulation
//!   of the continuous-time dynamics under the discrete policy.
//! * [`population`]: finite-population Monte Carlo, either validating the
//!   mean-field law or running the live N-player interaction, plus wealth
//!   inequality statistics.
//!
//! The arithmetic conventions worth knowing: interpolation uses the blend
//! form `(1 - t) * v[lo] + t * v[lo + 1]` so node reads are exact, forward
//! deposits split mass as `up = m * p`, `down = m - up` so per-step totals
//! are conserved to a few ulps, and dyadic steps are exact binary fractions
//! so time arithmetic never drifts.

pub mod engine;
pub mod equilibrium;
pub mod error;
pub mod flow;
pub mod game;
pub mod grid;
pub mod initial;
pub mod limit;
pub mod model;
pub mod population;
pub mod table;

pub use engine::{DpEngine, EngineConfig, ForwardPass, StepReward};
pub use equilibrium::{
    best_response_value_gap, fixed_point_step, solve, solve_with, EquilibriumResult,
    FixedPointStep, InitialFlow, IterationEvent, SolverConfig,
};
pub use error::{Error, Result};
pub use flow::{consistency_residual, ControlMeasureFlow, FlowSteps, HashRateFlow};
pub use game::GameInstance;
pub use grid::{ActionGrid, TimeGrid, WealthGrid};
pub use initial::{default_extent, InitialWealth};
pub use limit::{
    discretize_function, interpolate_equilibrium, refinement_study, simulate_continuous_path,
    ContinuousPath, PathSegment, RefinementLevel, StepFlow,
};
pub use model::{
    intensity, jump_probability, step_destinations, DiscreteControlMeasure, FlowEntry,
    ModelParams, Scheme, UtilitySpec,
};
pub use population::{
    empirical_exploitability, simulate_population, wealth_histogram, wealth_statistics,
    InteractionMode, PopulationConfig, PopulationStep, PopulationTrajectory, WealthStats,
};
pub use table::{DistributionFlow, PolicyTable, ValueTable};
