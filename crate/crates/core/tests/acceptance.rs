//! The acceptance gate: one test per criterion (or group of criteria that
//! share an expensive solve), each printing a `criterion N ...: PASS/FAIL`
//! line so a full run reads as a checklist. Run with `--nocapture` to see
//! the lines for passing tests too.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use mfg_core::{
    best_response_value_gap, default_extent, intensity, refinement_study, simulate_continuous_path,
    simulate_population, solve, wealth_statistics, ActionGrid, DpEngine, EngineConfig,
    GameInstance, HashRateFlow, InitialFlow, InitialWealth, InteractionMode, ModelParams,
    PolicyTable, PopulationConfig, Scheme, SolverConfig, StepFlow, TimeGrid, UtilitySpec,
    WealthGrid,
};

fn report(number: usize, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {number} ({name}): {verdict} [{detail}]");
}

/// The default mining model: unit cost and reward, population scale 1000,
/// square-root terminal utility, Normal(10, 2) initial wealth truncated at
/// zero, horizon 300 at half-unit steps, hash rates up to 10.
fn default_model(nodes: usize, action_nodes: usize, order: u32) -> GameInstance {
    let params = ModelParams::default();
    let time = TimeGrid::new(order, 300).unwrap();
    let init = InitialWealth::Normal {
        mean: 10.0,
        sd: 2.0,
    };
    let (x_min, x_max) = default_extent(&init, &params, &time);
    GameInstance::new(
        params,
        time,
        WealthGrid::uniform(x_min, x_max, nodes).unwrap(),
        ActionGrid::uniform(10.0, action_nodes).unwrap(),
        UtilitySpec::CrraSqrt,
        init,
    )
    .unwrap()
}

#[test]
fn criterion_01_backward_induction_matches_enumeration() {
    let started = Instant::now();
    let params = ModelParams {
        c: 1.0,
        r: 1.0,
        m: 2.0,
        eps: 0.25,
        a_max: 3.0,
    };
    let game = GameInstance::new(
        params,
        TimeGrid::new(1, 1).unwrap(),
        WealthGrid::uniform(0.0, 8.0, 5).unwrap(),
        ActionGrid::uniform(3.0, 8).unwrap(),
        UtilitySpec::CrraSqrt,
        InitialWealth::Dirac { x: 4.0 },
    )
    .unwrap();
    let config = EngineConfig {
        refine: false,
        ..EngineConfig::default()
    };
    let engine = DpEngine::new(&game, Scheme::MeanHashRate, config).unwrap();
    let steps = game.time().steps();
    let h = 0.6;
    let flow = HashRateFlow::constant(h, steps, 3.0).unwrap();
    let (values, _) = engine.backward_induction(&flow).unwrap();

    // Independent evaluator: enumerate the actions at every node and step,
    // rolling values backward with hand-written interpolation.
    let xs: Vec<f64> = (0..5).map(|i| game.wealth().x(i)).collect();
    let lerp = |vs: &[f64], y: f64| -> f64 {
        if y <= xs[0] {
            return vs[0];
        }
        if y >= xs[4] {
            return vs[4];
        }
        let mut j = 0;
        while xs[j + 1] < y {
            j += 1;
        }
        let w = (y - xs[j]) / (xs[j + 1] - xs[j]);
        vs[j] * (1.0 - w) + vs[j + 1] * w
    };
    let mut v: Vec<f64> = xs.iter().map(|x| 2.0 * x.max(0.0).sqrt()).collect();
    let mut worst = 0.0f64;
    for k in (0..steps).rev() {
        let mut v_new = vec![0.0; 5];
        for i in 0..5 {
            let mut best = f64::NEG_INFINITY;
            for j in 0..game.actions().len() {
                let a = game.actions().a(j);
                let lam = if a > 0.0 { a / (a + h * 2.0 + 0.25) } else { 0.0 };
                let p = game.time().dt() * lam;
                let drifted = xs[i] - a * game.time().dt();
                let val = p * lerp(&v, drifted + 1.0) + (1.0 - p) * lerp(&v, drifted);
                if val > best {
                    best = val;
                }
            }
            v_new[i] = best;
            worst = worst.max((values.at(k, i) - best).abs());
        }
        v = v_new;
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass = worst <= 1e-12 && elapsed < 1.0;
    report(
        1,
        "backward induction matches exhaustive action enumeration",
        pass,
        &format!("max deviation {worst:.2e}, {elapsed:.3} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_forward_mass_conservation_at_full_depth() {
    let game = default_model(512, 128, 1);
    let engine = DpEngine::new(&game, Scheme::MeanHashRate, EngineConfig::default()).unwrap();
    let steps = game.time().steps();
    let nodes = game.wealth().len();
    assert_eq!(steps, 600);
    // A wealth- and time-dependent policy, capped low enough that no mass
    // can walk off the far end of the grid within the horizon.
    let mut data = Vec::with_capacity(steps * nodes);
    for k in 0..steps {
        for i in 0..nodes {
            data.push(0.5 * ((i + k) % 5) as f64);
        }
    }
    let policy = PolicyTable::new(data, steps, nodes, 10.0).unwrap();
    let flow = HashRateFlow::constant(0.01, steps, 10.0).unwrap();
    let dist = engine
        .kolmogorov_forward(&policy, &flow)
        .unwrap()
        .distribution;
    let mut worst = 0.0f64;
    for k in 0..=steps {
        let sum: f64 = dist.row(k).iter().sum();
        worst = worst.max((sum - 1.0).abs());
    }
    let pass = worst <= 1e-12;
    report(
        2,
        "mass conservation over 600 forward steps",
        pass,
        &format!("max |sum - 1| = {worst:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criteria_03_to_07_and_09_default_model_equilibrium() {
    let mut failures: Vec<String> = Vec::new();
    let game = default_model(512, 128, 1);
    let steps = game.time().steps();

    let started = Instant::now();
    let mut results = Vec::new();
    for init in [0.1, 1.0, 5.0] {
        let config = SolverConfig {
            init: InitialFlow::Constant(init),
            ..SolverConfig::default()
        };
        match solve(&game, &config) {
            Ok(result) => results.push(result),
            Err(err) => {
                report(3, "equilibrium from three constant initializations", false, &format!("init {init}: {err}"));
                panic!("solve from init {init} failed: {err}");
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();

    let mut max_pairwise = 0.0f64;
    for a in &results {
        for b in &results {
            let d = a
                .eta
                .values()
                .iter()
                .zip(b.eta.values())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            max_pairwise = max_pairwise.max(d);
        }
    }
    let converged = results.iter().all(|r| r.converged);
    let c3 = converged && max_pairwise <= 1e-4 && elapsed <= 600.0;
    report(
        3,
        "equilibrium from three constant initializations",
        c3,
        &format!(
            "converged {converged}, pairwise sup distance {max_pairwise:.2e}, {:?} iterations, {elapsed:.0} s",
            results.iter().map(|r| r.iterations).collect::<Vec<_>>()
        ),
    );
    if !c3 {
        failures.push("criterion 3".into());
    }

    let result = &results[1];
    let eta_min = result
        .eta
        .values()
        .iter()
        .fold(f64::INFINITY, |acc, v| acc.min(*v));
    let c4 = eta_min > 0.0;
    report(
        4,
        "equilibrium flow stays strictly positive",
        c4,
        &format!("min hash rate {eta_min:.3e}"),
    );
    if !c4 {
        failures.push("criterion 4".into());
    }

    let c5 = result.consistency_residual <= 1e-6;
    report(
        5,
        "undamped consistency residual",
        c5,
        &format!("residual {:.2e}", result.consistency_residual),
    );
    if !c5 {
        failures.push("criterion 5".into());
    }

    let engine = DpEngine::new(&game, Scheme::MeanHashRate, EngineConfig::default()).unwrap();
    let gap = best_response_value_gap(&engine, &result.eta, &result.policy).unwrap();
    let c6 = gap.abs() <= 1e-6;
    report(
        6,
        "exploitability of the equilibrium policy",
        c6,
        &format!("value gap {gap:.2e}"),
    );
    if !c6 {
        failures.push("criterion 6".into());
    }

    let trajectory = simulate_population(
        &game,
        &result.policy,
        &result.eta,
        &PopulationConfig {
            n_agents: 2000,
            mode: InteractionMode::Validation,
            seed: 7,
        },
    )
    .unwrap();
    let stats = wealth_statistics(&trajectory);
    let first = &stats[0];
    let last = &stats[stats.len() - 1];
    let c7 = last.gini > first.gini && last.dropout_fraction > first.dropout_fraction;
    report(
        7,
        "wealth concentrates and dropout grows",
        c7,
        &format!(
            "gini {:.4} -> {:.4}, dropout {:.4} -> {:.4}",
            first.gini, last.gini, first.dropout_fraction, last.dropout_fraction
        ),
    );
    if !c7 {
        failures.push("criterion 7".into());
    }

    // Validation mode: the empirical control mean must track the flow
    // within its own CLT band at nearly every step.
    let validation = simulate_population(
        &game,
        &result.policy,
        &result.eta,
        &PopulationConfig {
            n_agents: 1000,
            mode: InteractionMode::Validation,
            seed: 11,
        },
    )
    .unwrap();
    let n = validation.n_agents() as f64;
    let mut inside = 0usize;
    for (k, snapshot) in validation.steps()[..steps].iter().enumerate() {
        let mean = snapshot.control_mean;
        let actions: Vec<f64> = snapshot
            .wealth
            .iter()
            .map(|x| game.wealth().interp(result.policy.row(k), *x))
            .collect();
        let var = actions.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        let band = 4.0 * (var / n).sqrt();
        if (mean - result.eta.get(k)).abs() <= band {
            inside += 1;
        }
    }
    let coverage = inside as f64 / steps as f64;

    let mut live_l1 = Vec::new();
    for (agents, seed) in [(100usize, 21u64), (1000, 22), (10000, 23)] {
        let run = simulate_population(
            &game,
            &result.policy,
            &result.eta,
            &PopulationConfig {
                n_agents: agents,
                mode: InteractionMode::LiveEmpirical,
                seed,
            },
        )
        .unwrap();
        let l1: f64 = run.steps()[..steps]
            .iter()
            .enumerate()
            .map(|(k, s)| (s.control_mean - result.eta.get(k)).abs() * game.time().dt())
            .sum();
        live_l1.push(l1);
    }
    let c9 = coverage >= 0.95 && live_l1[0] >= live_l1[1] && live_l1[1] >= live_l1[2];
    report(
        9,
        "finite populations track the mean field",
        c9,
        &format!(
            "CLT band coverage {coverage:.3}, live-mode L1 {:.3e} / {:.3e} / {:.3e}",
            live_l1[0], live_l1[1], live_l1[2]
        ),
    );
    if !c9 {
        failures.push("criterion 9".into());
    }

    assert!(failures.is_empty(), "failed: {}", failures.join(", "));
}

#[test]
fn criterion_08_dyadic_refinement_distances_decrease() {
    // The study re-times the default model on its default wealth grid. The
    // stopping tolerance sits above the argmax-flapping floor the sup-norm
    // residual reaches on the longest time grid (near-ties between separate
    // local maxima of the kinked action objective flip winners under tiny
    // flow perturbations, which stalls the tail of the iteration around
    // 2e-8), while staying far below the flow differences the study
    // measures.
    let game = default_model(512, 128, 1);
    let config = SolverConfig {
        tol: 1e-7,
        ..SolverConfig::default()
    };
    let started = Instant::now();
    let levels = refinement_study(&game, &config, 0..=3).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let distances: Vec<f64> = levels
        .iter()
        .filter_map(|level| level.l1_to_next)
        .collect();
    let decreasing = distances.windows(2).all(|w| w[1] < w[0]);
    let all_converged = levels.iter().all(|level| level.converged);
    let pass = decreasing && all_converged && distances.len() == 3 && elapsed <= 1800.0;
    let shown = distances
        .iter()
        .map(|d| format!("{d:.3e}"))
        .collect::<Vec<_>>()
        .join(", ");
    report(
        8,
        "equilibrium flows converge under dyadic refinement",
        pass,
        &format!("L1 distances [{shown}], converged {all_converged}, {elapsed:.0} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_10_thinning_matches_the_poisson_law() {
    let params = ModelParams {
        c: 1.0,
        r: 1.0,
        m: 1000.0,
        eps: 0.0,
        a_max: 2.0,
    };
    let time = TimeGrid::new(0, 25).unwrap();
    let game = GameInstance::new(
        params,
        time,
        WealthGrid::uniform(-60.0, 60.0, 25).unwrap(),
        ActionGrid::uniform(2.0, 5).unwrap(),
        UtilitySpec::CrraSqrt,
        InitialWealth::Dirac { x: 20.0 },
    )
    .unwrap();
    let steps = game.time().steps();
    let nodes = game.wealth().len();
    let policy = PolicyTable::new(vec![2.0; steps * nodes], steps, nodes, 2.0).unwrap();
    let eta = StepFlow::new(0, 25, vec![0.002; steps]).unwrap();
    // lambda = 2 / (2 + 0.002 * 1000) = 0.5 per unit time, constant along
    // every path, so jump counts are Poisson with mean 12.5.
    let rate = intensity(2.0, 0.002, game.params());
    assert!((rate - 0.5).abs() < 1e-15);
    let mean_target = rate * 25.0;

    let paths = 100_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut counts: Vec<u64> = vec![0; 64];
    let mut total = 0u64;
    for _ in 0..paths {
        let path = simulate_continuous_path(&game, &policy, &eta, 20.0, &mut rng).unwrap();
        let jumps = path.jump_count();
        total += jumps as u64;
        let bin = jumps.min(counts.len() - 1);
        counts[bin] += 1;
    }
    let sample_mean = total as f64 / paths as f64;
    let se = (mean_target / paths as f64).sqrt();
    let mean_ok = (sample_mean - mean_target).abs() <= 3.0 * se;

    // Chi-square goodness of fit against Poisson(12.5), pooling consecutive
    // counts until each cell expects at least five paths.
    let mut expected = vec![0.0f64; counts.len()];
    let mut prob = (-mean_target).exp();
    let mut tail = 1.0;
    for (j, e) in expected.iter_mut().enumerate() {
        if j > 0 {
            prob *= mean_target / j as f64;
        }
        if j == counts.len() - 1 {
            *e = tail * paths as f64;
        } else {
            *e = prob * paths as f64;
            tail -= prob;
        }
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut obs_acc = 0.0;
    let mut exp_acc = 0.0;
    for j in 0..counts.len() {
        obs_acc += counts[j] as f64;
        exp_acc += expected[j];
        if exp_acc >= 5.0 {
            pooled.push((obs_acc, exp_acc));
            obs_acc = 0.0;
            exp_acc = 0.0;
        }
    }
    if exp_acc > 0.0 {
        let last = pooled.last_mut().unwrap();
        last.0 += obs_acc;
        last.1 += exp_acc;
    }
    let statistic: f64 = pooled.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let cells = pooled.len();
    let threshold = ChiSquared::new((cells - 1) as f64)
        .unwrap()
        .inverse_cdf(0.99);
    let fit_ok = statistic <= threshold;

    let pass = mean_ok && fit_ok;
    report(
        10,
        "thinning reproduces the constant-rate jump law",
        pass,
        &format!(
            "mean {sample_mean:.3} vs {mean_target} (3 se = {:.3}), chi2 {statistic:.1} vs {threshold:.1} at {cells} cells",
            3.0 * se
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_monotonicity_suite() {
    // Values non-decreasing in wealth whenever the terminal utility is.
    let game = GameInstance::new(
        ModelParams {
            c: 1.0,
            r: 1.0,
            m: 10.0,
            eps: 0.0,
            a_max: 10.0,
        },
        TimeGrid::new(1, 2).unwrap(),
        WealthGrid::uniform(-15.0, 25.0, 81).unwrap(),
        ActionGrid::uniform(10.0, 21).unwrap(),
        UtilitySpec::CrraSqrt,
        InitialWealth::Dirac { x: 10.0 },
    )
    .unwrap();
    let engine = DpEngine::new(&game, Scheme::MeanHashRate, EngineConfig::default()).unwrap();
    let mut values_monotone = true;
    for h in [0.01, 0.05, 0.2] {
        let flow = HashRateFlow::constant(h, game.time().steps(), 10.0).unwrap();
        let (values, _) = engine.backward_induction(&flow).unwrap();
        for k in 0..=game.time().steps() {
            values_monotone &= values.row(k).windows(2).all(|w| w[1] >= w[0] - 1e-12);
        }
    }

    // The intensity is strictly increasing and strictly concave in the
    // action away from zero; second differences on the action grid.
    let actions = ActionGrid::uniform(10.0, 128).unwrap();
    let mut intensity_shape = true;
    for h in [0.001, 0.01, 0.1] {
        let params = ModelParams::default();
        let lam: Vec<f64> = (0..actions.len())
            .map(|j| intensity(actions.a(j), h, &params))
            .collect();
        for j in 1..lam.len() {
            intensity_shape &= lam[j] > lam[j - 1];
        }
        for j in 2..lam.len() - 1 {
            intensity_shape &= lam[j + 1] - 2.0 * lam[j] + lam[j - 1] < 0.0;
        }
    }

    // Best-response actions non-increasing in the population mean, sampled
    // at interior nodes and means bounded away from zero. The best response
    // first rises with the mean (an arms race against feeble competition)
    // and only decays past a turning point near r / (4 c m), so the sampled
    // means must start above that hump; with m = 10 it sits at 0.025, below
    // the 0.05 starting mean.
    let small = GameInstance::new(
        ModelParams {
            c: 1.0,
            r: 1.0,
            m: 10.0,
            eps: 0.0,
            a_max: 4.0,
        },
        TimeGrid::new(1, 1).unwrap(),
        WealthGrid::uniform(-10.0, 30.0, 81).unwrap(),
        ActionGrid::uniform(4.0, 41).unwrap(),
        UtilitySpec::CrraSqrt,
        InitialWealth::Dirac { x: 10.0 },
    )
    .unwrap();
    let engine = DpEngine::new(&small, Scheme::MeanHashRate, EngineConfig::default()).unwrap();
    let sample_nodes = [30usize, 40, 50, 60, 70];
    let mut previous: Option<Vec<f64>> = None;
    let mut br_monotone = true;
    let mut h = 0.05;
    while h <= 1.0 {
        let flow = HashRateFlow::constant(h, small.time().steps(), 4.0).unwrap();
        let (_, policy) = engine.backward_induction(&flow).unwrap();
        let current: Vec<f64> = sample_nodes
            .iter()
            .flat_map(|i| [policy.at(0, *i), policy.at(1, *i)])
            .collect();
        if let Some(prev) = &previous {
            for (now, before) in current.iter().zip(prev) {
                br_monotone &= *now <= before + 1e-6;
            }
        }
        previous = Some(current);
        h += 0.005;
    }

    let pass = values_monotone && intensity_shape && br_monotone;
    report(
        11,
        "monotonicity suite",
        pass,
        &format!(
            "values {values_monotone}, intensity shape {intensity_shape}, best response in mean {br_monotone}"
        ),
    );
    assert!(pass);
}
