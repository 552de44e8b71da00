//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use aggdef_core::estimator::{compact_step, correct, filter_gain, gain, predict, FilterState, KinematicModel, Mat6};
use aggdef_core::harness::{self, ResolvedRun, RunConfig, RunFlags, RunSummary, Simulation};
use aggdef_core::metrics::TeamProblem;
use aggdef_core::network::{build_proximity_graph, check_b_connectivity, metropolis_weights, CommGraph};
use aggdef_core::objectives::{eval_cost, grad1_cost, grad2_cost, Barrier, CostGains, CostMode, CostSnapshot};
use aggdef_core::scenarios::{preset, ScenarioSpec, TrajectorySpec, PRESET_NAMES};
use aggdef_core::constraints::FeasibleBox;
use aggdef_core::{Mat3, Vec3};
use nalgebra::SMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Run {
    summary: RunSummary,
    sim: Simulation,
    elapsed: Duration,
}

fn simulate(run: ResolvedRun) -> Run {
    let start = Instant::now();
    let mut sim = Simulation::new(run).expect("valid run");
    let summary = sim.run_to_end().expect("run completes");
    Run {
        summary,
        sim,
        elapsed: start.elapsed(),
    }
}

fn preset_run(name: &str, seed: u64, prediction: bool) -> Run {
    simulate(
        RunConfig {
            seed: Some(seed),
            flags: RunFlags {
                prediction,
                ..RunFlags::default()
            },
            ..RunConfig::from_preset(name)
        }
        .resolve()
        .expect("preset resolves"),
    )
}

fn rand_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vec3::from_fn(|_, _| scale * rng.random_range(-1.0..1.0))
}

fn rand_spd(rng: &mut ChaCha8Rng) -> Mat3 {
    let a = Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    a * a.transpose() + Mat3::identity() * 0.1
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

// 1
fn tracker_conservation(runs: &[(&str, Run)]) -> Outcome {
    let mut worst = (0.0f64, 0.0f64, Duration::ZERO);
    for (_, r) in runs {
        worst.0 = worst.0.max(r.summary.max_s_conservation);
        worst.1 = worst.1.max(r.summary.max_y_conservation);
        worst.2 = worst.2.max(r.elapsed);
    }
    let steps_ok = runs.iter().all(|(_, r)| r.summary.horizon == 3000);
    outcome(
        steps_ok && worst.0 <= 1e-10 && worst.1 <= 1e-9 && worst.2 < Duration::from_secs(30),
        format!(
            "{} presets x 3000 steps: max s residual {:.2e}, max y residual {:.2e}, slowest run {:.2?}",
            runs.len(),
            worst.0,
            worst.1,
            worst.2
        ),
    )
}

// 2
fn static_convergence() -> Outcome {
    let mut spec = preset("fig3_left").unwrap();
    spec.barrier = Barrier::disabled();
    spec.noise.meas_var = 0.0;
    spec.horizon = 5000;
    let mut sim = Simulation::new(ResolvedRun::new(spec, RunFlags::default()).unwrap()).unwrap();
    let mut errs = vec![];
    let mut connected = true;
    loop {
        let x_star = sim.oracle_solution().unwrap();
        let e = sim
            .positions()
            .iter()
            .zip(x_star)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt();
        errs.push(e);
        connected &= sim.graph().is_connected();
        if !sim.step().unwrap() {
            break;
        }
    }
    let hit = errs.iter().position(|&e| e <= 1e-4);
    // fit log10(err) against t over the last decade before reaching 1e-4
    let slope = hit.and_then(|end| {
        let start = errs[..=end].iter().rposition(|&e| e > 1e-3).map(|k| k + 1)?;
        let pts: Vec<(f64, f64)> = (start..=end).map(|t| (t as f64, errs[t].log10())).collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    });
    let last = sim.metrics().last().unwrap();
    outcome(
        connected && hit.is_some_and(|t| t <= 5000) && slope.is_some_and(|s| s < 0.0),
        format!(
            "||x - x*|| <= 1e-4 at t = {:?}, final-decade log10 slope {:.3e}, final error {:.2e}, final s/y errors {:.1e}/{:.1e}",
            hit,
            slope.unwrap_or(f64::NAN),
            errs.last().unwrap(),
            last.s_error,
            last.y_error
        ),
    )
}

// 3
fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for mode in [CostMode::Surveillance, CostMode::Basketball] {
        for _ in 0..100 {
            let barrier = Barrier {
                enabled: true,
                epsilon: 0.05,
                grad_cap: 1e3,
            };
            let mut gains = CostGains::scalar(1.0, 1.0, 1.0, rng.random(), rng.random()).with_barrier(barrier);
            gains.q1 = rand_spd(&mut rng);
            gains.q2 = rand_spd(&mut rng);
            gains.q3 = rand_spd(&mut rng);
            let x = rand_vec(&mut rng, 3.0);
            let s = rand_vec(&mut rng, 3.0);
            let snap = CostSnapshot {
                p_ref: rand_vec(&mut rng, 3.0),
                b_ref: rand_vec(&mut rng, 3.0),
                offsets: vec![],
            };
            // ∇₂ of the local cost in the aggregate argument
            let g2 = grad2_cost(&x, &s, &snap, &gains, mode);
            for c in 0..3 {
                let (mut sp, mut sm) = (s, s);
                sp[c] += h;
                sm[c] -= h;
                let fd = (eval_cost(&x, &sp, &snap, &gains, mode) - eval_cost(&x, &sm, &snap, &gains, mode)) / (2.0 * h);
                worst = worst.max(rel_err(fd, g2[c]));
            }
            // ∇₁ without neighbors is the plain partial derivative
            let g1 = grad1_cost(&x, &s, &snap, &gains, mode);
            for c in 0..3 {
                let (mut xp, mut xm) = (x, x);
                xp[c] += h;
                xm[c] -= h;
                let fd = (eval_cost(&xp, &s, &snap, &gains, mode) - eval_cost(&xm, &s, &snap, &gains, mode)) / (2.0 * h);
                worst = worst.max(rel_err(fd, g1[c]));
            }
            // with neighbors, ∇₁ + mean ∇₂ is the team-cost gradient block
            let n = 3;
            let xs: Vec<Vec3> = (0..n).map(|_| rand_vec(&mut rng, 3.0)).collect();
            let open = FeasibleBox {
                lower: Vec3::repeat(-1e3),
                upper: Vec3::repeat(1e3),
                repaired: [false; 3],
            };
            let team = TeamProblem::new(
                mode,
                vec![gains.clone(); n],
                (0..n)
                    .map(|_| CostSnapshot {
                        p_ref: rand_vec(&mut rng, 3.0),
                        b_ref: snap.b_ref,
                        offsets: vec![],
                    })
                    .collect(),
                vec![open; n],
                &metropolis_weights(CommGraph::complete(n)),
            )
            .unwrap();
            let g = team.gradient(&xs);
            for k in 0..n {
                for c in 0..3 {
                    let (mut xp, mut xm) = (xs.clone(), xs.clone());
                    xp[k][c] += h;
                    xm[k][c] -= h;
                    let fd = (team.cost(&xp) - team.cost(&xm)) / (2.0 * h);
                    worst = worst.max(rel_err(fd, g[k][c]));
                }
            }
        }
    }
    outcome(worst <= 1e-6, format!("200 instances over two modes, max relative error {worst:.2e}"))
}

// 4
fn kalman_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let dt = rng.random_range(0.001..0.1);
        let a = SMatrix::<f64, 6, 6>::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let s = a * a.transpose() * rng.random_range(0.0..2.0);
        let r = rand_spd(&mut rng) * rng.random_range(1e-4..1.0);
        let model = KinematicModel::new(dt, s, r).unwrap();
        let b = SMatrix::<f64, 6, 6>::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let state = FilterState {
            xi: SMatrix::<f64, 6, 1>::from_fn(|_, _| rng.random_range(-5.0..5.0)),
            cov: b * b.transpose() + Mat6::identity() * 0.01,
        };
        let z = rand_vec(&mut rng, 5.0);
        let compact = compact_step(&state, &z, &gain(&state.cov, &model).unwrap(), &model);
        let composed = predict(&correct(&state, &z, &filter_gain(&state.cov, &model).unwrap(), &model), &model);
        let scale = |m: f64| m.max(1.0);
        worst = worst
            .max((compact.xi - composed.xi).amax() / scale(composed.xi.amax()))
            .max((compact.cov - composed.cov).amax() / scale(composed.cov.amax()));
    }

    // constant-velocity target, filter with process noise matched to the truth
    let r = 1e-4;
    let model = KinematicModel::new(0.01, Mat6::identity() * 1e-10, Mat3::identity() * r).unwrap();
    let (p0, v) = (Vec3::new(1.0, -2.0, 0.5), Vec3::new(0.4, 0.3, -0.1));
    let mut state = FilterState::from_position(p0, 1.0);
    let (burn_in, total) = (500, 3000);
    let mut sq = 0.0;
    for t in 0..total {
        // `state` is the prediction for tick t
        let truth = p0 + v * (t as f64 * 0.01);
        if t >= burn_in {
            sq += (state.position() - truth).norm_squared();
        }
        let z = truth + Vec3::from_fn(|_, _| r.sqrt() * rng.sample::<f64, _>(StandardNormal));
        state = compact_step(&state, &z, &gain(&state.cov, &model).unwrap(), &model);
    }
    let rmse = (sq / (total - burn_in) as f64).sqrt();
    outcome(
        worst <= 1e-12 && rmse <= r.sqrt(),
        format!("compact vs composed max rel diff {worst:.2e} over 1000 instances; tracking RMSE {rmse:.2e} <= sqrt(r) = {:.0e}", r.sqrt()),
    )
}

fn bfs_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![vec![]; n];
    for &(i, j) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

// 5
fn doubly_stochastic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut negative = false;
    for _ in 0..10_000 {
        let n = rng.random_range(1..12);
        let xs: Vec<Vec3> = (0..n).map(|_| rand_vec(&mut rng, 5.0)).collect();
        let g = metropolis_weights(build_proximity_graph(&xs, rng.random_range(0.5..8.0)).unwrap())
            .with_laziness(rng.random_range(0.0..0.5))
            .unwrap();
        let w = g.weights().unwrap();
        negative |= w.iter().any(|&v| v < 0.0);
        for k in 0..n {
            worst = worst.max((w.row(k).sum() - 1.0).abs()).max((w.column(k).sum() - 1.0).abs());
        }
    }
    let mut disagreements = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..8);
        let len = rng.random_range(1..10);
        let b = rng.random_range(1..4);
        let p = rng.random_range(0.05..0.5);
        let seq: Vec<Vec<(usize, usize)>> = (0..len)
            .map(|_| {
                (0..n)
                    .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                    .filter(|_| rng.random::<f64>() < p)
                    .collect()
            })
            .collect();
        let graphs: Vec<CommGraph> = seq.iter().map(|e| CommGraph::from_edges(n, e).unwrap()).collect();
        let got = check_b_connectivity(&graphs, b).unwrap();
        let want: Vec<bool> = (0..len)
            .map(|t| {
                let union: Vec<(usize, usize)> = seq[t..=(t + b).min(len - 1)].concat();
                bfs_connected(n, &union)
            })
            .collect();
        if got != want {
            disagreements += 1;
        }
    }
    outcome(
        worst <= 1e-12 && !negative && disagreements == 0,
        format!("10^4 graphs: max row/column deviation {worst:.2e}; B-connectivity vs BFS: {disagreements}/100 disagreements"),
    )
}

// 6
fn feasibility(all: &[&Run]) -> Outcome {
    let violations: usize = all.iter().map(|r| r.summary.box_violations).sum();
    let max_repairs_per_tick = all
        .iter()
        .flat_map(|r| r.sim.metrics().iter().map(|m| m.repairs as f64 / (3 * r.summary.agents) as f64))
        .fold(0.0, f64::max);
    let repairs: usize = all.iter().map(|r| r.summary.box_repairs).sum();
    outcome(
        violations == 0 && max_repairs_per_tick <= 1.0,
        format!(
            "{} runs: {violations} projection-box violations; {repairs} axis repairs logged, at most {:.0}% of axes per tick",
            all.len(),
            100.0 * max_repairs_per_tick
        ),
    )
}

// 7
fn qualitative_figures(runs: &[(&str, Run)]) -> Outcome {
    let get = |name: &str| &runs.iter().find(|(n, _)| *n == name).unwrap().1.summary;
    let (l3, r3) = (get("fig3_left"), get("fig3_right"));
    let (l4, r4) = (get("fig4_left"), get("fig4_right"));
    let pressing = l3.final_defender_intruder < r3.final_defender_intruder;
    let aggregation = r4.final_barycenter_target < l4.final_barycenter_target && r4.final_spread < l4.final_spread;
    outcome(
        pressing && aggregation,
        format!(
            "defender-intruder {:.3} (lambda 0.8) < {:.3} (lambda 0.2); barycenter-target {:.3} -> {:.3}, spread {:.3} -> {:.3} (gains 5 -> 20)",
            l3.final_defender_intruder,
            r3.final_defender_intruder,
            l4.final_barycenter_target,
            r4.final_barycenter_target,
            l4.final_spread,
            r4.final_spread
        ),
    )
}

/// Every intruder at the same spot, so all tracking points coincide.
fn coincident_scenario(barrier: bool) -> ScenarioSpec {
    let mut spec = preset("fig3_left").unwrap();
    spec.name = "coincident".into();
    spec.horizon = 1500;
    spec.noise.meas_var = 0.0;
    spec.barrier.enabled = barrier;
    spec.intruders = vec![TrajectorySpec::stationary([5.0, 5.0, 1.0]); 3];
    spec
}

// 8
fn collision_avoidance(basketball: &Run) -> Outcome {
    let eps = basketball.sim.spec().barrier.epsilon;
    let on = basketball.summary.min_pairwise_distance;
    let coincident_off = simulate(ResolvedRun::new(coincident_scenario(false), RunFlags::default()).unwrap());
    let coincident_on = simulate(ResolvedRun::new(coincident_scenario(true), RunFlags::default()).unwrap());
    let off = coincident_off.summary.min_pairwise_distance;
    let on_coincident = coincident_on.summary.min_pairwise_distance;
    outcome(
        on >= eps && off < eps && on_coincident >= eps,
        format!(
            "basketball with barrier: min distance {on:.3} >= {eps}; coincident targets: {off:.2e} without barrier, {on_coincident:.3} with"
        ),
    )
}

// 9
fn prediction_regret() -> Outcome {
    let seeds = [11, 12, 13, 14, 15];
    let mut on: Vec<f64> = seeds.iter().map(|&s| preset_run("surveillance_dynamic", s, true).summary.regret).collect();
    let mut off: Vec<f64> = seeds.iter().map(|&s| preset_run("surveillance_dynamic", s, false).summary.regret).collect();
    on.sort_by(f64::total_cmp);
    off.sort_by(f64::total_cmp);
    let (mon, moff) = (on[2], off[2]);
    outcome(mon <= moff, format!("median R_T over 5 seeds: prediction on {mon:.4e}, off {moff:.4e}"))
}

// 10
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut files = vec![];
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let cfg = RunConfig {
            seed: Some(99),
            horizon: Some(1000),
            out: Some(out.clone()),
            ..RunConfig::from_preset("basketball_demo")
        };
        harness::run(&cfg).unwrap();
        files.push((
            std::fs::read(out.join(harness::TRACE_FILE)).unwrap(),
            std::fs::read(out.join(harness::METRICS_FILE)).unwrap(),
        ));
    }
    let same = files[0] == files[1];
    outcome(same, format!("two basketball runs, seed 99, 1000 steps: trace {} bytes, identical = {same}", files[0].0.len()))
}

fn main() {
    let runs: Vec<(&str, Run)> = PRESET_NAMES.iter().map(|&name| (name, preset_run(name, 0, true))).collect();
    let basketball = &runs.iter().find(|(n, _)| *n == "basketball_demo").unwrap().1;

    let results = [
        ("tracker conservation", tracker_conservation(&runs)),
        ("static convergence", static_convergence()),
        ("gradient correctness", gradient_correctness()),
        ("kalman correctness", kalman_correctness()),
        ("doubly stochastic weights", doubly_stochastic()),
        ("feasibility", feasibility(&runs.iter().map(|(_, r)| r).collect::<Vec<_>>())),
        ("qualitative figure ordering", qualitative_figures(&runs)),
        ("collision avoidance", collision_avoidance(basketball)),
        ("online regret with prediction", prediction_regret()),
        ("determinism", determinism()),
    ];

    let mut failed = 0;
    for (k, (name, o)) in results.iter().enumerate() {
        println!("criterion {:>2} {:<30} {}  {}", k + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
