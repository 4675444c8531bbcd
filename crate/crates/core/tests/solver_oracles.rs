//! Cross-checks of the fixed-point solver against independent references: a
//! straight-line reimplementation of one damped round, and a game with
//! linear utility whose equilibrium is computable by a one-dimensional scan.

use mfg_core::{
    fixed_point_step, solve, ActionGrid, DpEngine, EngineConfig, GameInstance, HashRateFlow,
    InitialWealth, ModelParams, Scheme, SolverConfig, TimeGrid, UtilitySpec, WealthGrid,
};

fn lerp(xs: &[f64], vs: &[f64], y: f64) -> f64 {
    if y <= xs[0] {
        return vs[0];
    }
    if y >= xs[xs.len() - 1] {
        return vs[vs.len() - 1];
    }
    let mut j = 0;
    while xs[j + 1] < y {
        j += 1;
    }
    let w = (y - xs[j]) / (xs[j + 1] - xs[j]);
    vs[j] * (1.0 - w) + vs[j + 1] * w
}

/// One damped round written out longhand: backward induction by grid scan,
/// forward propagation with two-point deposits, and the convex blend.
/// Nothing here touches the engine.
fn naive_round(
    xs: &[f64],
    actions: &[f64],
    mu0: &[f64],
    eta: &[f64],
    params: &ModelParams,
    dt: f64,
    damping: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = xs.len();
    let steps = eta.len();
    let phi: Vec<f64> = xs.iter().map(|x| 2.0 * x.max(0.0).sqrt()).collect();

    let objective = |v_next: &[f64], x: f64, a: f64, h: f64| {
        let lam = if a > 0.0 {
            a / (a + h * params.m + params.eps)
        } else {
            0.0
        };
        let p = dt * lam;
        let drifted = x - params.c * a * dt;
        p * lerp(xs, v_next, drifted + params.r) + (1.0 - p) * lerp(xs, v_next, drifted)
    };

    let mut v = phi;
    let mut policy = vec![0.0; steps * n];
    for k in (0..steps).rev() {
        let mut v_new = vec![0.0; n];
        for i in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = actions[0];
            for &a in actions {
                let val = objective(&v, xs[i], a, eta[k]);
                if val > best {
                    best = val;
                    best_a = a;
                }
            }
            v_new[i] = best;
            policy[k * n + i] = best_a;
        }
        v = v_new;
    }
    let v0 = v;

    let mut mu = mu0.to_vec();
    let mut means = Vec::with_capacity(steps);
    for k in 0..steps {
        let mut next = vec![0.0; n];
        let mut mean = 0.0;
        let mut deposit = |y: f64, w: f64, next: &mut Vec<f64>| {
            if y <= xs[0] {
                next[0] += w;
            } else if y >= xs[n - 1] {
                next[n - 1] += w;
            } else {
                let mut j = 0;
                while xs[j + 1] < y {
                    j += 1;
                }
                let t = (y - xs[j]) / (xs[j + 1] - xs[j]);
                next[j] += w * (1.0 - t);
                next[j + 1] += w * t;
            }
        };
        for i in 0..n {
            let w = mu[i];
            if w == 0.0 {
                continue;
            }
            let a = policy[k * n + i];
            let lam = if a > 0.0 {
                a / (a + eta[k] * params.m + params.eps)
            } else {
                0.0
            };
            let p = dt * lam;
            let drifted = xs[i] - params.c * a * dt;
            deposit(drifted + params.r, w * p, &mut next);
            deposit(drifted, w * (1.0 - p), &mut next);
            mean += a * w;
        }
        mu = next;
        means.push(mean);
    }

    let blended: Vec<f64> = eta
        .iter()
        .zip(&means)
        .map(|(e, m)| damping * e + (1.0 - damping) * m)
        .collect();
    (blended, means, v0)
}

#[test]
fn one_damped_round_matches_a_straight_line_reference() {
    let params = ModelParams::default();
    let time = TimeGrid::new(1, 2).unwrap();
    let game = GameInstance::new(
        params,
        time,
        WealthGrid::uniform(-25.0, 30.0, 111).unwrap(),
        ActionGrid::uniform(10.0, 41).unwrap(),
        UtilitySpec::CrraSqrt,
        InitialWealth::Normal {
            mean: 10.0,
            sd: 2.0,
        },
    )
    .unwrap();
    let config = EngineConfig {
        refine: false,
        ..EngineConfig::default()
    };
    let engine = DpEngine::new(&game, Scheme::MeanHashRate, config).unwrap();
    let steps = game.time().steps();
    // At this mean the aggregate rate eta * m is well under r / c, so the
    // best response mines and the round genuinely moves the flow.
    let eta = HashRateFlow::constant(0.0002, steps, 10.0).unwrap();
    let step = fixed_point_step(&engine, &eta, 0.9).unwrap();

    let xs: Vec<f64> = (0..game.wealth().len()).map(|i| game.wealth().x(i)).collect();
    let actions: Vec<f64> = (0..game.actions().len()).map(|j| game.actions().a(j)).collect();
    let (blended, means, v0) = naive_round(
        &xs,
        &actions,
        game.mu0(),
        eta.values(),
        game.params(),
        game.time().dt(),
        0.9,
    );

    for k in 0..steps {
        assert!(
            (step.eta_next.get(k) - blended[k]).abs() <= 1e-12,
            "step {k}: engine {} vs reference {}",
            step.eta_next.get(k),
            blended[k]
        );
        assert!((step.control_mean.get(k) - means[k]).abs() <= 1e-12);
    }
    for i in 0..xs.len() {
        assert!((step.values.at(0, i) - v0[i]).abs() <= 1e-12);
    }
    // The round must actually move the flow, or the comparison is vacuous.
    assert!(step.residual > 1e-4);
}

/// With linear utility the continuation value has unit slope wherever the
/// population can reach, so the best response against a constant flow h is
/// the same interior action at every node and step:
///
/// ```text
/// a*(h) = argmax_a [ r * a / (a + h m + eps) - c a ]
///       = sqrt(r (h m + eps) / c) - (h m + eps)
/// ```
///
/// An equilibrium flow is then a root of a*(h) - h, which a dense scan plus
/// bisection pins down to machine precision without any dynamic programming.
#[test]
fn linear_utility_equilibrium_matches_a_flow_space_scan() {
    let params = ModelParams {
        c: 0.5,
        r: 2.0,
        m: 1.0,
        eps: 0.1,
        a_max: 4.0,
    };
    let time = TimeGrid::new(0, 3).unwrap();
    let game = GameInstance::new(
        params,
        time,
        WealthGrid::uniform(0.0, 30.0, 31).unwrap(),
        ActionGrid::uniform(4.0, 41).unwrap(),
        UtilitySpec::Crra { gamma: 0.0 },
        InitialWealth::Dirac { x: 15.0 },
    )
    .unwrap();

    let br = |h: f64| {
        let d = h * params.m + params.eps;
        ((params.r * d / params.c).sqrt() - d).clamp(0.0, params.a_max)
    };
    let g = |h: f64| br(h) - h;

    let mut root = f64::NAN;
    let scan = 4000;
    for i in 0..scan {
        let (mut lo, mut hi) = (
            4.0 * i as f64 / scan as f64,
            4.0 * (i + 1) as f64 / scan as f64,
        );
        if g(lo) > 0.0 && g(hi) <= 0.0 {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            root = 0.5 * (lo + hi);
            break;
        }
    }
    assert!(root.is_finite(), "the scan found no fixed point");

    // The scan agrees with the closed-form root of 2 s^2 - 2 s - 0.1 = 0,
    // s = sqrt(h + 0.1).
    let s = (1.0 + 1.2f64.sqrt()) / 2.0;
    let analytic = s * s - 0.1;
    assert!((root - analytic).abs() <= 1e-9, "scan {root} vs {analytic}");

    let result = solve(&game, &SolverConfig::default()).unwrap();
    assert!(result.converged);
    for k in 0..game.time().steps() {
        assert!(
            (result.eta.get(k) - root).abs() <= 1e-6,
            "step {k}: solver {} vs scan {root}",
            result.eta.get(k)
        );
    }
    assert!(result.consistency_residual <= 1e-6);
}

#[test]
fn residual_trace_tail_is_monotone_for_a_converged_run() {
    let params = ModelParams {
        c: 1.0,
        r: 1.0,
        m: 10.0,
        eps: 0.0,
        a_max: 10.0,
    };
    let game = GameInstance::new(
        params,
        TimeGrid::new(1, 2).unwrap(),
        WealthGrid::uniform(-15.0, 25.0, 81).unwrap(),
        ActionGrid::uniform(10.0, 21).unwrap(),
        UtilitySpec::CrraSqrt,
        InitialWealth::Dirac { x: 10.0 },
    )
    .unwrap();
    // The tolerance must stay above the argmax wobble the refinement width
    // induces, or the trace bounces on that floor instead of decaying.
    let config = SolverConfig {
        damping: 0.95,
        tol: 1e-8,
        ..SolverConfig::default()
    };
    let result = solve(&game, &config).unwrap();
    assert!(result.converged);
    let trace = &result.residual_trace;
    assert!(
        trace.len() >= 60,
        "run converged in only {} rounds; the tail check needs more",
        trace.len()
    );
    for w in trace[trace.len() - 50..].windows(2) {
        assert!(
            w[1] <= w[0] * (1.0 + 1e-12),
            "tail residuals rose: {} -> {}",
            w[0],
            w[1]
        );
    }
}
