//! `mfg`: equilibrium solves, dyadic refinement studies, population
//! simulation, and best-response checks for the mining mean field game,
//! driven by TOML experiment files.
//!
//! Exit codes: 0 success; 2 configuration problem (unreadable file,
//! unknown keys, invalid values); 3 solver stopped above tolerance
//! (artifacts are still written); 4 a directory passed via
//! `--from-solve` lacks usable equilibrium artifacts; 1 anything else.

mod artifacts;
mod config;

use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use mfg_core::{
    best_response_value_gap, interpolate_equilibrium, simulate_population, solve,
    wealth_statistics, DpEngine, EquilibriumResult, Error as CoreError, GameInstance,
    PolicyTable, PopulationConfig, TimeGrid,
};

use artifacts::{
    best_response_csv, control_surface_csv, load_equilibrium, population_csv, refinement_csv,
    solve_telemetry, stats_csv, wealth_evolution_csv, write_solve_artifacts, ArtifactSet,
    LoadError, StudyRow,
};
use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "mfg",
    version,
    about = "Mean field game toolkit for the mining competition: equilibrium \
             solves, dyadic refinement studies, N-player simulation, and \
             best-response checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides [output] dir; default "out")
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulation seed (overrides [simulation] seed)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the equilibrium flow and write the run artifacts
    Solve(RunArgs),
    /// Re-solve on dyadic time grids and measure cross-level flow distances
    Refine {
        #[command(flatten)]
        run: RunArgs,
        /// Coarsest refinement order (overrides [refine] n_min)
        #[arg(long)]
        n_min: Option<u32>,
        /// Finest refinement order (overrides [refine] n_max)
        #[arg(long)]
        n_max: Option<u32>,
    },
    /// Simulate a finite population under the equilibrium policy
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Reuse solve artifacts from this directory instead of solving
        #[arg(long)]
        from_solve: Option<PathBuf>,
    },
    /// Best response against a solved flow, and the value it would gain
    BestResponse {
        #[command(flatten)]
        run: RunArgs,
        /// Reuse solve artifacts from this directory instead of solving
        #[arg(long)]
        from_solve: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    NonConvergence,
    MissingArtifact(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::NonConvergence => 3,
            Failure::MissingArtifact(_) => 4,
            Failure::Other(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(m) => format!("configuration: {m}"),
            Failure::NonConvergence => {
                "solver stopped above tolerance; artifacts were still written".into()
            }
            Failure::MissingArtifact(m) => format!("equilibrium artifacts: {m}"),
            Failure::Other(m) => m.clone(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Missing(path) => {
                Failure::MissingArtifact(format!("{} not found", path.display()))
            }
            LoadError::Corrupt(m) => Failure::MissingArtifact(m),
        }
    }
}

/// Everything a subcommand needs before doing real work.
struct Run {
    config: ExperimentConfig,
    game: GameInstance,
    seed: u64,
    out: PathBuf,
}

impl Run {
    fn prepare(args: &RunArgs) -> Result<Self, Failure> {
        let text = fs::read_to_string(&args.config)
            .map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
        let config = ExperimentConfig::parse(&text).map_err(Failure::Config)?;
        let game = config.build_game().map_err(Failure::Config)?;
        let seed = args.seed.unwrap_or(config.simulation.seed);
        let out = args
            .out
            .clone()
            .or_else(|| config.output.dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Run {
            config,
            game,
            seed,
            out,
        })
    }

    fn resolved(&self, game: &GameInstance) -> ExperimentConfig {
        self.config.resolved(game, self.seed)
    }

    /// Runs the solver, keeping the final iterate when it stops above
    /// tolerance so artifacts can still be written.
    fn solve_game(&self, game: &GameInstance) -> Result<(EquilibriumResult, bool), Failure> {
        match solve(game, &self.config.solver) {
            Ok(result) => Ok((result, true)),
            Err(CoreError::NonConvergence { result, .. }) => Ok((*result, false)),
            Err(e) => Err(Failure::Other(e.to_string())),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(run) => cmd_solve(&run),
        Command::Refine { run, n_min, n_max } => cmd_refine(&run, n_min, n_max),
        Command::Simulate { run, from_solve } => cmd_simulate(&run, from_solve),
        Command::BestResponse { run, from_solve } => cmd_best_response(&run, from_solve),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn cmd_solve(args: &RunArgs) -> Result<(), Failure> {
    let run = Run::prepare(args)?;
    let (result, converged) = run.solve_game(&run.game)?;
    let mut set = ArtifactSet::create(&run.out)?;
    write_solve_artifacts(&mut set, &run.game, &result)?;
    set.write_manifest(
        &run.resolved(&run.game),
        "solve",
        run.seed,
        solve_telemetry(&result),
    )?;
    println!(
        "solve: {} after {} rounds, consistency residual {:.3e}, artifacts in {}",
        if converged { "converged" } else { "stopped" },
        result.iterations,
        result.consistency_residual,
        set.dir().display()
    );
    if converged {
        Ok(())
    } else {
        Err(Failure::NonConvergence)
    }
}

fn cmd_refine(args: &RunArgs, n_min: Option<u32>, n_max: Option<u32>) -> Result<(), Failure> {
    let mut run = Run::prepare(args)?;
    let n_min = n_min.unwrap_or(run.config.refine.n_min);
    let n_max = n_max.unwrap_or(run.config.refine.n_max);
    if n_min > n_max {
        return Err(Failure::Config(format!(
            "n_min {n_min} exceeds n_max {n_max}"
        )));
    }
    run.config.refine.n_min = n_min;
    run.config.refine.n_max = n_max;

    let mut rows: Vec<StudyRow> = Vec::new();
    let mut flows = Vec::new();
    let mut all_converged = true;
    for order in n_min..=n_max {
        let time = TimeGrid::new(order, run.config.time.horizon)
            .map_err(|e| Failure::Config(e.to_string()))?;
        let level_game = run
            .game
            .with_time(time)
            .map_err(|e| Failure::Other(e.to_string()))?;
        let started = Instant::now();
        let (result, converged) = run.solve_game(&level_game)?;
        let wall_time_s = started.elapsed().as_secs_f64();
        all_converged &= converged;

        let mut set = ArtifactSet::create(&run.out.join(format!("n{order}")))?;
        write_solve_artifacts(&mut set, &level_game, &result)?;
        let mut level_config = run.config.clone();
        level_config.time.order = order;
        set.write_manifest(
            &level_config.resolved(&level_game, run.seed),
            "solve",
            run.seed,
            solve_telemetry(&result),
        )?;

        println!(
            "refine: order {order} ({} steps) {} after {} rounds in {wall_time_s:.1} s",
            result.time.steps(),
            if converged { "converged" } else { "stopped" },
            result.iterations,
        );
        rows.push(StudyRow {
            order,
            steps: result.time.steps(),
            l1_to_next: None,
            iterations: result.iterations,
            wall_time_s,
        });
        flows.push(interpolate_equilibrium(&result));
    }
    for i in 0..rows.len().saturating_sub(1) {
        let distance = flows[i]
            .l1_distance(&flows[i + 1])
            .map_err(|e| Failure::Other(e.to_string()))?;
        rows[i].l1_to_next = Some(distance);
        println!(
            "refine: L1 distance n{} -> n{}: {distance:.6e}",
            rows[i].order,
            rows[i + 1].order
        );
    }

    let mut set = ArtifactSet::create(&run.out)?;
    set.write("refinement_study.csv", &refinement_csv(&rows))?;
    let mut telemetry = toml::Table::new();
    telemetry.insert("all_converged".into(), all_converged.into());
    set.write_manifest(&run.resolved(&run.game), "refine", run.seed, telemetry)?;
    if all_converged {
        Ok(())
    } else {
        Err(Failure::NonConvergence)
    }
}

fn cmd_simulate(args: &RunArgs, from_solve: Option<PathBuf>) -> Result<(), Failure> {
    let run = Run::prepare(args)?;
    let mut set = ArtifactSet::create(&run.out)?;
    let mut telemetry;
    let (eta, policy) = match &from_solve {
        Some(dir) => {
            let loaded = load_equilibrium(dir, &run.game)?;
            telemetry = toml::Table::new();
            telemetry.insert("equilibrium_from".into(), dir.display().to_string().into());
            loaded
        }
        None => {
            let (result, converged) = run.solve_game(&run.game)?;
            write_solve_artifacts(&mut set, &run.game, &result)?;
            telemetry = solve_telemetry(&result);
            if !converged {
                set.write_manifest(&run.resolved(&run.game), "simulate", run.seed, telemetry)?;
                return Err(Failure::NonConvergence);
            }
            (result.eta, result.policy)
        }
    };

    let policy = if run.config.simulation.zero_policy {
        PolicyTable::zero(
            run.game.time().steps(),
            run.game.wealth().len(),
            run.game.actions().bound(),
        )
    } else {
        policy
    };
    let population = PopulationConfig {
        n_agents: run.config.simulation.n_agents,
        mode: run.config.simulation.mode,
        seed: run.seed,
    };
    let trajectory = simulate_population(&run.game, &policy, &eta, &population)
        .map_err(|e| Failure::Other(e.to_string()))?;
    let stats = wealth_statistics(&trajectory);

    set.write(
        "wealth_evolution.csv",
        &wealth_evolution_csv(&run.game, &trajectory),
    )?;
    set.write(
        "control_surface.csv",
        &control_surface_csv(&run.game, &policy),
    )?;
    set.write("stats.csv", &stats_csv(run.game.time(), &stats))?;
    set.write("population.csv", &population_csv(&stats, &eta))?;

    let first = &stats[0];
    let last = &stats[stats.len() - 1];
    telemetry.insert(
        "reward_count".into(),
        toml::Value::Integer(trajectory.reward_count as i64),
    );
    telemetry.insert("gini_initial".into(), first.gini.into());
    telemetry.insert("gini_terminal".into(), last.gini.into());
    telemetry.insert("dropout_terminal".into(), last.dropout_fraction.into());
    set.write_manifest(&run.resolved(&run.game), "simulate", run.seed, telemetry)?;
    println!(
        "simulate: {} agents over {} steps, Gini {:.4} -> {:.4}, dropout {:.4} -> {:.4}, artifacts in {}",
        run.config.simulation.n_agents,
        run.game.time().steps(),
        first.gini,
        last.gini,
        first.dropout_fraction,
        last.dropout_fraction,
        set.dir().display()
    );
    Ok(())
}

fn cmd_best_response(args: &RunArgs, from_solve: Option<PathBuf>) -> Result<(), Failure> {
    let run = Run::prepare(args)?;
    let mut set = ArtifactSet::create(&run.out)?;
    let mut telemetry;
    let (eta, candidate) = match &from_solve {
        Some(dir) => {
            let loaded = load_equilibrium(dir, &run.game)?;
            telemetry = toml::Table::new();
            telemetry.insert("equilibrium_from".into(), dir.display().to_string().into());
            loaded
        }
        None => {
            let (result, converged) = run.solve_game(&run.game)?;
            write_solve_artifacts(&mut set, &run.game, &result)?;
            telemetry = solve_telemetry(&result);
            if !converged {
                set.write_manifest(
                    &run.resolved(&run.game),
                    "best-response",
                    run.seed,
                    telemetry,
                )?;
                return Err(Failure::NonConvergence);
            }
            (result.eta, result.policy)
        }
    };

    let engine = DpEngine::new(&run.game, run.config.solver.scheme, run.config.solver.engine)
        .map_err(|e| Failure::Other(e.to_string()))?;
    let (_, best_policy) = engine
        .backward_induction(&eta)
        .map_err(|e| Failure::Other(e.to_string()))?;
    let gap = best_response_value_gap(&engine, &eta, &candidate)
        .map_err(|e| Failure::Other(e.to_string()))?;

    set.write("best_response.csv", &best_response_csv(&run.game, &best_policy))?;
    telemetry.insert("value_gap".into(), gap.into());
    set.write_manifest(
        &run.resolved(&run.game),
        "best-response",
        run.seed,
        telemetry,
    )?;
    println!(
        "best-response: value gap {gap:.6e} in utility units, artifacts in {}",
        set.dir().display()
    );
    Ok(())
}
