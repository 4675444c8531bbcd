//! Finite-population Monte Carlo on the dyadic time grid.
//!
//! Every agent plays the same feedback policy, read off the policy table by
//! wealth interpolation at each step. Two interaction modes cover the two
//! questions worth asking of a finite population:
//!
//! * `Validation` drives every agent with the *given* mean flow, so agents
//!   are independent and the empirical law must reproduce the forward
//!   distribution of the grid engine up to Monte Carlo noise.
//! * `LiveEmpirical` drives agent `i` with the leave-one-out mean of the
//!   other agents' current hash rates, the actual N-player interaction. Its
//!   drift away from the mean-field prediction is the finite-N effect, and
//!   the empirical exploitability quantifies how little any single agent
//!   could gain by deviating.
//!
//! Randomness is reproducible and embarrassingly parallel in structure:
//! agent `i` owns stream `i` of a counter-based generator seeded once for
//! the whole population, consumes exactly one uniform for its initial
//! wealth and one per step thereafter, so results are independent of agent
//! iteration order and, in validation mode, of the population size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{DpEngine, EngineConfig};
use crate::error::{Error, Result};
use crate::flow::HashRateFlow;
use crate::game::GameInstance;
use crate::grid::WealthGrid;
use crate::model::{jump_probability, FlowEntry, Scheme};
use crate::table::PolicyTable;

/// How agents hear about the rest of the population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionMode {
    /// Everyone reacts to the prescribed mean flow; agents are independent.
    Validation,
    /// Everyone reacts to the leave-one-out empirical mean hash rate.
    LiveEmpirical,
}

/// Population size, interaction mode, and RNG seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub n_agents: usize,
    pub mode: InteractionMode,
    pub seed: u64,
}

/// Snapshot of the population entering step `k`, together with the hash
/// rates the policy assigns to that snapshot.
#[derive(Debug, Clone)]
pub struct PopulationStep {
    /// Wealth of every agent.
    pub wealth: Vec<f64>,
    /// Mean hash rate across agents.
    pub control_mean: f64,
    /// Fraction of agents whose hash rate is exactly zero.
    pub dropout_fraction: f64,
}

/// A full population run: one snapshot per grid node, `steps() + 1` in all.
///
/// The terminal snapshot has no decisions left; its mean and dropout are
/// computed by reading the last policy row at the terminal wealth, which
/// keeps every row of downstream statistics well defined.
#[derive(Debug, Clone)]
pub struct PopulationTrajectory {
    steps: Vec<PopulationStep>,
    pub seed: u64,
    pub mode: InteractionMode,
    /// Total number of rewards collected across all agents and steps.
    pub reward_count: u64,
}

impl PopulationTrajectory {
    #[must_use]
    pub fn steps(&self) -> &[PopulationStep] {
        &self.steps
    }

    #[must_use]
    pub fn n_agents(&self) -> usize {
        self.steps[0].wealth.len()
    }

    /// Mean hash rate per decision step, as a flow on the game's grid.
    pub fn empirical_flow(&self, bound: f64) -> Result<HashRateFlow> {
        let means = self.steps[..self.steps.len() - 1]
            .iter()
            .map(|s| s.control_mean)
            .collect();
        HashRateFlow::new(means, bound)
    }
}

/// Projects one wealth snapshot onto a grid as a probability histogram,
/// counting each agent as `1 / n` and clamping strays onto the boundary.
#[must_use]
pub fn wealth_histogram(grid: &WealthGrid, wealth: &[f64]) -> Vec<f64> {
    let mut masses = vec![0.0; grid.len()];
    let share = 1.0 / wealth.len() as f64;
    for &x in wealth {
        grid.deposit(&mut masses, x, share);
    }
    masses
}

/// Runs `config.n_agents` agents under `policy`. In validation mode the
/// jump probabilities come from `eta`; in live mode from the leave-one-out
/// empirical mean (zero for a single agent, who then competes only against
/// the dummy hash rate `eps`).
pub fn simulate_population(
    game: &GameInstance,
    policy: &PolicyTable,
    eta: &HashRateFlow,
    config: &PopulationConfig,
) -> Result<PopulationTrajectory> {
    let time = game.time();
    let steps = time.steps();
    if steps == 0 {
        return Err(Error::InvalidConfig(
            "population simulation needs at least one time step".into(),
        ));
    }
    if config.n_agents == 0 {
        return Err(Error::InvalidConfig(
            "population simulation needs at least one agent".into(),
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
    if eta.len() != steps {
        return Err(Error::FlowLength {
            expected: steps,
            got: eta.len(),
        });
    }
    let n = config.n_agents;
    let params = game.params();
    let wealth_grid = game.wealth();
    let dt = time.dt();

    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            rng
        })
        .collect();
    let mut x: Vec<f64> = rngs.iter_mut().map(|rng| game.init().sample(rng)).collect();

    let mut actions = vec![0.0; n];
    let mut recorded = Vec::with_capacity(steps + 1);
    let mut reward_count = 0u64;

    for k in 0..=steps {
        let row = policy.row(k.min(steps - 1));
        for (ai, xi) in actions.iter_mut().zip(&x) {
            *ai = wealth_grid.interp(row, *xi);
        }
        let total: f64 = actions.iter().sum();
        let zeros = actions.iter().filter(|a| **a == 0.0).count();
        recorded.push(PopulationStep {
            wealth: x.clone(),
            control_mean: total / n as f64,
            dropout_fraction: zeros as f64 / n as f64,
        });
        if k == steps {
            break;
        }
        for i in 0..n {
            let a = actions[i];
            let h = match config.mode {
                InteractionMode::Validation => eta.get(k),
                InteractionMode::LiveEmpirical => {
                    if n == 1 {
                        0.0
                    } else {
                        (total - a) / (n - 1) as f64
                    }
                }
            };
            let p = jump_probability(a, FlowEntry::Mean(h), time, params, Scheme::MeanHashRate);
            let u: f64 = rngs[i].random();
            x[i] -= params.c * a * dt;
            if u < p {
                x[i] += params.r;
                reward_count += 1;
            }
        }
    }

    Ok(PopulationTrajectory {
        steps: recorded,
        seed: config.seed,
        mode: config.mode,
        reward_count,
    })
}

/// How much initial-wealth value an average agent left on the table by
/// playing `policy` instead of best-responding, both measured against the
/// flow the population actually realized.
///
/// The gap is averaged over the realized initial wealths, reading both
/// value surfaces by interpolation, and is nonnegative up to interpolation
/// and floating-point noise.
pub fn empirical_exploitability(
    game: &GameInstance,
    policy: &PolicyTable,
    trajectory: &PopulationTrajectory,
    scheme: Scheme,
    engine_config: EngineConfig,
) -> Result<f64> {
    let engine = DpEngine::new(game, scheme, engine_config)?;
    let realized = trajectory.empirical_flow(game.actions().bound())?;
    let (v_br, _) = engine.backward_induction(&realized)?;
    let v_played = engine.evaluate_policy(policy, &realized)?;
    let initial = &trajectory.steps()[0].wealth;
    let gap: f64 = initial
        .iter()
        .map(|&x0| {
            game.wealth().interp(v_br.row(0), x0) - game.wealth().interp(v_played.row(0), x0)
        })
        .sum();
    Ok(gap / initial.len() as f64)
}

/// Per-step population statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WealthStats {
    pub step: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub gini: f64,
    pub dropout_fraction: f64,
    pub control_mean: f64,
}

/// Gini coefficient of the nonnegative parts of `wealth`; zero for a
/// population with nothing.
fn gini(wealth: &[f64]) -> f64 {
    let mut w: Vec<f64> = wealth.iter().map(|x| x.max(0.0)).collect();
    w.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = w.len() as f64;
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let weighted: f64 = w
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * (i + 1) as f64 - n - 1.0) * x)
        .sum();
    weighted / (n * total)
}

/// Summarizes every snapshot of a trajectory: population moments, Gini
/// coefficient, dropout, and the empirical control mean.
#[must_use]
pub fn wealth_statistics(trajectory: &PopulationTrajectory) -> Vec<WealthStats> {
    trajectory
        .steps()
        .iter()
        .enumerate()
        .map(|(k, step)| {
            let n = step.wealth.len() as f64;
            let mean = step.wealth.iter().sum::<f64>() / n;
            let m2 = step.wealth.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let m3 = step.wealth.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
            let skewness = if m2 > 1e-24 { m3 / m2.powf(1.5) } else { 0.0 };
            WealthStats {
                step: k,
                mean,
                variance: m2,
                skewness,
                gini: gini(&step.wealth),
                dropout_fraction: step.dropout_fraction,
                control_mean: step.control_mean,
            }
        })
        .collect()
}
