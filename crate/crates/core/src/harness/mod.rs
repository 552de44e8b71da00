//! Simulation driver.
//!
//! One tick is one algorithm iteration and one communication round. At tick
//! `t` the harness
//!
//! 1. builds the proximity graph `Gᵗ` from the defenders' positions,
//! 2. lets every defender sense its neighbor offsets and measure its intruder
//!    and the target,
//! 3. advances every filter to the prediction for `t + 1` and derives the
//!    predicted cost and box,
//! 4. exchanges `(s, y)` over `Gᵗ`,
//! 5. runs one optimize step per defender,
//!
//! and then records the state at `t + 1` together with the oracle benchmark.
//! Agents only see the world through measurements and sensed offsets.

mod output;
mod replay;

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use output::{
    read_metrics, read_trace, write_graphs, write_metrics, write_trace, MetricsRow, TraceRecord, GRAPH_FILE,
    METRICS_FILE, RUN_FILE, SUMMARY_FILE, TRACE_FILE,
};
pub use replay::{replay_oracle, write_report, ReplayReport, REPORT_FILES};

use crate::algorithm::{init_agent, AgentState, BoxTiming};
use crate::constraints::{build_box, FeasibleBox};
use crate::estimator::{measure, FilterState, MeasurementNoise, StackedFilter};
use crate::metrics::{
    centralized_oracle, min_pairwise_distance, tracking_errors, OracleOptions, OracleSolution, RegretLedger,
    TeamProblem,
};
use crate::network::{build_proximity_graph, check_b_connectivity, metropolis_weights, CommGraph, Message, MessageBus};
use crate::objectives::{sigma, CostGains, CostMode, CostSnapshot};
use crate::scenarios::{preset, sensed_offsets, ScenarioSpec};
use crate::{Error, Mat3, Result, Vec3};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "AGGDEF_OUT_DIR";

/// Algorithm and benchmark switches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunFlags {
    /// Build the cost and box from one-step-ahead predictions. When off, the
    /// agents use the filtered estimate of the current time instead.
    pub prediction: bool,
    /// Solve the full-information problem at every tick.
    pub oracle: bool,
    /// Overrides the scenario's barrier switch.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier: Option<bool>,
    /// Overrides the scenario's projection box timing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_timing: Option<BoxTiming>,
    /// Start every filter with zero covariance.
    pub strict_kalman_init: bool,
}

impl Default for RunFlags {
    fn default() -> Self {
        Self {
            prediction: true,
            oracle: true,
            barrier: None,
            box_timing: None,
            strict_kalman_init: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verbosity {
    Quiet,
    /// Trace, metrics and summary.
    #[default]
    Standard,
    /// Additionally writes the per-tick edge lists.
    Full,
}

/// Contents of a run configuration file.
///
/// Exactly one of `preset` and `scenario` must be given.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Overrides the scenario horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub verbosity: Verbosity,
    #[serde(default)]
    pub flags: RunFlags,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
}

impl RunConfig {
    pub fn from_preset(name: &str) -> Self {
        Self {
            preset: Some(name.to_string()),
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; trajectory CSV paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        if let Some(spec) = cfg.scenario.as_mut() {
            spec.resolve_files(path.parent().unwrap_or(Path::new(".")))?;
        }
        Ok(cfg)
    }

    /// Folds preset, seed, horizon and flag overrides into one inline
    /// scenario. The result replays identically without any other input.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        let mut spec = match (&self.preset, &self.scenario) {
            (Some(name), None) => preset(name)?,
            (None, Some(spec)) => spec.clone(),
            (Some(_), Some(_)) => return Err(Error::Config("give either `preset` or `scenario`, not both".into())),
            (None, None) => return Err(Error::Config("no scenario: set `preset` or a `[scenario]` table".into())),
        };
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(h) = self.horizon {
            spec.horizon = h;
        }
        if let Some(on) = self.flags.barrier {
            spec.barrier.enabled = on;
        }
        if let Some(timing) = self.flags.box_timing {
            spec.step.box_timing = timing;
        }
        if self.flags.strict_kalman_init {
            spec.estimator.strict_zero_init = true;
        }
        spec.validate()?;
        Ok(ResolvedRun {
            spec,
            flags: RunFlags {
                prediction: self.flags.prediction,
                oracle: self.flags.oracle,
                ..RunFlags::default()
            },
            verbosity: self.verbosity,
        })
    }
}

/// A self-contained run: scenario with all overrides applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRun {
    pub spec: ScenarioSpec,
    pub flags: RunFlags,
    #[serde(default)]
    pub verbosity: Verbosity,
}

impl ResolvedRun {
    pub fn new(spec: ScenarioSpec, flags: RunFlags) -> Result<Self> {
        RunConfig {
            scenario: Some(spec),
            flags,
            ..RunConfig::default()
        }
        .resolve()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let run: Self = toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        run.spec.validate()?;
        Ok(run)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Independent random streams of one defender.
#[derive(Debug, Clone)]
struct AgentRngs {
    noise: ChaCha8Rng,
    dropout: ChaCha8Rng,
    sensing: ChaCha8Rng,
}

impl AgentRngs {
    fn new(seed: u64, agent: usize) -> Self {
        let stream = |source: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(agent as u64 * 4 + source);
            rng
        };
        Self {
            noise: stream(0),
            dropout: stream(1),
            sensing: stream(2),
        }
    }
}

/// Full-information evaluation of one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickEvaluation {
    pub global_cost: f64,
    pub local_costs: Vec<f64>,
    pub oracle: Option<OracleSolution>,
}

/// True team problem at tick `t` for the realized graph.
pub fn true_problem(spec: &ScenarioSpec, t: usize, graph: &CommGraph) -> Result<TeamProblem> {
    let world = spec.world_at(t);
    let mode = spec.cost_mode();
    let basket = spec.basket();
    let anchor = spec.box_anchor(&world.target.0);
    let mut gains = Vec::with_capacity(spec.n_agents());
    let mut refs = Vec::with_capacity(spec.n_agents());
    let mut boxes = Vec::with_capacity(spec.n_agents());
    for (i, (p, _)) in world.intruders.iter().enumerate() {
        let g = spec.gains(i);
        refs.push(CostSnapshot::from_positions(mode, p, &world.target.0, basket.as_ref(), &g, Vec::new()));
        boxes.push(build_box(p, &anchor, &spec.tolerance, &spec.field)?);
        gains.push(g);
    }
    TeamProblem::new(mode, gains, refs, boxes, graph)
}

/// Team cost at `xs` and, if `warm` is given, the oracle solution started there.
///
/// The run loop and the trace replay both call this, so replayed regret is
/// bit-identical to the in-run value.
pub fn evaluate_tick(
    spec: &ScenarioSpec,
    t: usize,
    xs: &[Vec3],
    graph: &CommGraph,
    warm: Option<&[Vec3]>,
) -> Result<TickEvaluation> {
    let problem = true_problem(spec, t, graph)?;
    let s = sigma(xs)?;
    let local_costs: Vec<f64> = (0..xs.len())
        .map(|i| {
            let snap = problem.refs[i].with_offsets(graph.neighbors(i).iter().map(|&j| xs[i] - xs[j]).collect());
            crate::objectives::eval_cost(&xs[i], &s, &snap, &problem.gains[i], problem.mode)
        })
        .collect();
    let global_cost = problem.cost(xs);
    let oracle = warm
        .map(|w| centralized_oracle(&problem, w, OracleOptions::default()))
        .transpose()?;
    Ok(TickEvaluation {
        global_cost,
        local_costs,
        oracle,
    })
}

/// Mixing graph of one round: proximity, Metropolis weights, laziness.
pub fn round_graph(spec: &ScenarioSpec, xs: &[Vec3]) -> Result<CommGraph> {
    metropolis_weights(build_proximity_graph(xs, spec.comm_radius)?).with_laziness(spec.laziness)
}

/// Run totals written to `summary.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub horizon: usize,
    pub agents: usize,
    pub prediction: bool,
    /// `R_T`; NaN when the oracle is off.
    pub regret: f64,
    /// "optimal", "stationary" (barrier on) or "none".
    pub regret_baseline: String,
    pub max_s_error: f64,
    pub max_y_error: f64,
    pub max_s_conservation: f64,
    pub max_y_conservation: f64,
    /// Iterates of the projected step outside their projection box.
    pub box_violations: usize,
    /// Iterates `x` outside the box of the same round, a consequence of the
    /// convex combination with a moving box.
    pub iterate_outside_box: usize,
    /// Degenerate box axes repaired, summed over ticks and agents.
    pub box_repairs: usize,
    pub dropouts: usize,
    pub oracle_failures: usize,
    pub b_window: usize,
    pub b_connectivity_violations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_b_violation: Option<usize>,
    pub rounds: u64,
    pub messages: u64,
    pub min_pairwise_distance: f64,
    pub final_defender_intruder: f64,
    pub final_barycenter_target: f64,
    pub final_spread: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RunSummary {
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }
}

/// Simulator state between ticks.
#[derive(Debug, Clone)]
pub struct Simulation {
    run: ResolvedRun,
    mode: CostMode,
    noise: MeasurementNoise,
    rngs: Vec<AgentRngs>,
    gains: Vec<CostGains>,
    agents: Vec<AgentState>,
    /// References of each agent's current cost `f̂ᵗ` and the estimates behind them.
    refs: Vec<CostSnapshot>,
    estimates: Vec<(Vec3, Vec3)>,
    /// Each agent's box `X̂ᵗ`.
    boxes: Vec<FeasibleBox>,
    graph: CommGraph,
    bus: MessageBus,
    t: usize,
    trace: Vec<TraceRecord>,
    metrics: Vec<MetricsRow>,
    graphs: Vec<CommGraph>,
    ledger: RegretLedger,
    oracle_x: Option<Vec<Vec3>>,
    box_violations: usize,
    iterate_outside_box: usize,
    dropouts: usize,
    oracle_failures: usize,
}

impl Simulation {
    pub fn new(run: ResolvedRun) -> Result<Self> {
        let spec = &run.spec;
        spec.validate()?;
        let n = spec.n_agents();
        let model = spec.kinematic_model()?;
        let noise = spec.measurement_noise()?;
        let r = Mat3::identity() * spec.noise.meas_var;
        // the initial fix is always available
        let init_noise = MeasurementNoise::new(&r, &r, 0.0)?;
        let p0 = if spec.estimator.strict_zero_init { 0.0 } else { spec.estimator.p0 };
        let mode = spec.cost_mode();
        let basket = spec.basket();
        let world = spec.world_at(0);

        let mut rngs: Vec<AgentRngs> = (0..n).map(|i| AgentRngs::new(spec.seed, i)).collect();
        let gains: Vec<CostGains> = (0..n).map(|i| spec.gains(i)).collect();
        let mut agents = Vec::with_capacity(n);
        let mut refs = Vec::with_capacity(n);
        let mut estimates = Vec::with_capacity(n);
        let mut boxes = Vec::with_capacity(n);
        for i in 0..n {
            let rng = &mut rngs[i];
            let z = measure(&world.intruders[i].0, &world.target.0, &init_noise, &mut rng.noise, &mut rng.dropout)
                .expect("dropout disabled for the initial fix");
            let filter = StackedFilter::new(
                FilterState::from_position(z.fixed_rows::<3>(0).into_owned(), p0),
                FilterState::from_position(z.fixed_rows::<3>(3).into_owned(), p0),
                model.clone(),
                model.clone(),
            );
            let (p_hat, b_hat) = (filter.intruder.position(), filter.target.position());
            let snap = CostSnapshot::from_positions(mode, &p_hat, &b_hat, basket.as_ref(), &gains[i], Vec::new());
            let bx = build_box(&p_hat, &spec.box_anchor(&b_hat), &spec.tolerance, &spec.field)?;
            let x0 = Vec3::from(spec.agents[i].initial);
            agents.push(init_agent(i, &x0, &bx, &snap, filter, gains[i].clone(), mode, spec.step)?);
            refs.push(snap);
            estimates.push((p_hat, b_hat));
            boxes.push(bx);
        }
        let xs: Vec<Vec3> = agents.iter().map(|a| a.x).collect();
        let graph = round_graph(spec, &xs)?;
        let mut sim = Self {
            mode,
            noise,
            rngs,
            gains,
            agents,
            refs,
            estimates,
            boxes,
            graph,
            bus: MessageBus::new(),
            t: 0,
            trace: Vec::new(),
            metrics: Vec::new(),
            graphs: Vec::new(),
            ledger: RegretLedger::default(),
            oracle_x: None,
            box_violations: 0,
            iterate_outside_box: 0,
            dropouts: 0,
            oracle_failures: 0,
            run,
        };
        sim.record()?;
        Ok(sim)
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.run.spec
    }

    pub fn flags(&self) -> &RunFlags {
        &self.run.flags
    }

    /// Current tick.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn time(&self) -> f64 {
        self.run.spec.time_of(self.t)
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.run.spec.horizon
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.agents.iter().map(|a| a.x).collect()
    }

    pub fn graph(&self) -> &CommGraph {
        &self.graph
    }

    pub fn boxes(&self) -> &[FeasibleBox] {
        &self.boxes
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn metrics(&self) -> &[MetricsRow] {
        &self.metrics
    }

    pub fn graphs(&self) -> &[CommGraph] {
        &self.graphs
    }

    pub fn regret(&self) -> f64 {
        if self.run.flags.oracle {
            self.ledger.total()
        } else {
            f64::NAN
        }
    }

    /// Oracle solution of the current tick, if the oracle is on.
    pub fn oracle_solution(&self) -> Option<&[Vec3]> {
        self.oracle_x.as_deref()
    }

    pub fn bus(&self) -> &MessageBus {
        &self.bus
    }

    /// Advances one tick. Returns `false` once the horizon is reached.
    pub fn step(&mut self) -> Result<bool> {
        if self.is_done() {
            return Ok(false);
        }
        let spec = &self.run.spec;
        let n = spec.n_agents();
        let world = spec.world_at(self.t);
        let xs = self.positions();
        let basket = spec.basket();

        // sense, measure, predict: each agent touches only its own data
        let mut next_filters = Vec::with_capacity(n);
        let mut next_refs = Vec::with_capacity(n);
        let mut next_estimates = Vec::with_capacity(n);
        let mut next_boxes = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        for i in 0..n {
            let rng = &mut self.rngs[i];
            offsets.push(sensed_offsets(&xs, i, &self.graph, spec.noise.sensing_std, &mut rng.sensing));
            let z = measure(&world.intruders[i].0, &world.target.0, &self.noise, &mut rng.noise, &mut rng.dropout);
            let filter = &self.agents[i].filter;
            let (advanced, used) = match z {
                Some(z) => {
                    let advanced = filter.step(&z)?;
                    let used = if self.run.flags.prediction { advanced.clone() } else { filter.corrected(&z)? };
                    (advanced, used)
                }
                None => {
                    self.dropouts += 1;
                    let advanced = filter.predict_only();
                    let used = if self.run.flags.prediction { advanced.clone() } else { filter.clone() };
                    (advanced, used)
                }
            };
            let (p_hat, b_hat) = (used.intruder.position(), used.target.position());
            next_refs.push(CostSnapshot::from_positions(self.mode, &p_hat, &b_hat, basket.as_ref(), &self.gains[i], Vec::new()));
            next_boxes.push(build_box(&p_hat, &spec.box_anchor(&b_hat), &spec.tolerance, &spec.field)?);
            next_estimates.push((p_hat, b_hat));
            next_filters.push(advanced);
        }

        // exchange barrier: every message carries round-t trackers only
        let outbound: Vec<Message> = self
            .agents
            .iter()
            .map(|a| Message { sender: a.id, s: a.s, y: a.y })
            .collect();
        let mailboxes = self.bus.exchange(&self.graph, &outbound)?;
        let weights = self
            .graph
            .weights()
            .ok_or_else(|| Error::Protocol("round graph has no mixing weights".into()))?;

        let mut next_agents = Vec::with_capacity(n);
        for (i, filter) in next_filters.into_iter().enumerate() {
            let row: Vec<f64> = weights.row(i).iter().copied().collect();
            let snap_t = self.refs[i].with_offsets(offsets[i].clone());
            let snap_next = next_refs[i].with_offsets(offsets[i].clone());
            let agent = &self.agents[i];
            let mut next = agent.optimize_step(&mailboxes[i], &row, &snap_t, &snap_next, &self.boxes[i], &next_boxes[i])?;
            if !agent.projection_box(&self.boxes[i], &next_boxes[i]).contains(&next.x_tilde) {
                self.box_violations += 1;
            }
            if !next_boxes[i].contains(&next.x) {
                self.iterate_outside_box += 1;
            }
            next.filter = filter;
            next_agents.push(next);
        }

        self.agents = next_agents;
        self.refs = next_refs;
        self.estimates = next_estimates;
        self.boxes = next_boxes;
        self.t += 1;
        self.graph = round_graph(&self.run.spec, &self.positions())?;
        self.record()?;
        Ok(true)
    }

    /// Runs to the horizon and returns the summary.
    pub fn run_to_end(&mut self) -> Result<RunSummary> {
        while self.step()? {}
        self.summary()
    }

    fn record(&mut self) -> Result<()> {
        let spec = &self.run.spec;
        let xs = self.positions();
        let warm: Option<Vec<Vec3>> = self
            .run
            .flags
            .oracle
            .then(|| self.oracle_x.clone().unwrap_or_else(|| xs.clone()));
        let eval = evaluate_tick(spec, self.t, &xs, &self.graph, warm.as_deref())?;

        for (i, a) in self.agents.iter().enumerate() {
            self.trace.push(TraceRecord {
                t: self.t,
                agent: i,
                x: a.x,
                x_tilde: a.x_tilde,
                s: a.s,
                y: a.y,
                p_hat: self.estimates[i].0,
                b_hat: self.estimates[i].1,
                box_lower: self.boxes[i].lower,
                box_upper: self.boxes[i].upper,
                local_cost: eval.local_costs[i],
                degree: self.graph.degree(i),
                cov_trace: a.filter.covariance_trace(),
            });
        }

        let ss: Vec<Vec3> = self.agents.iter().map(|a| a.s).collect();
        let ys: Vec<Vec3> = self.agents.iter().map(|a| a.y).collect();
        let g2: Vec<Vec3> = self.agents.iter().zip(&self.refs).map(|(a, r)| a.grad2(r)).collect();
        let errs = tracking_errors(&xs, &ss, &ys, &g2)?;

        let (oracle_cost, iterations, converged) = match &eval.oracle {
            Some(sol) => {
                if !sol.converged {
                    self.oracle_failures += 1;
                }
                (sol.cost, sol.iterations, sol.converged)
            }
            None => (f64::NAN, 0, false),
        };
        let gap = eval.global_cost - oracle_cost;
        if self.t > 0 && eval.oracle.is_some() {
            self.ledger.push(eval.global_cost, oracle_cost);
        }
        self.oracle_x = eval.oracle.map(|sol| sol.x);
        self.metrics.push(MetricsRow {
            t: self.t,
            global_cost: eval.global_cost,
            oracle_cost,
            gap,
            s_error: errs.s_error,
            y_error: errs.y_error,
            s_conservation: errs.s_conservation,
            y_conservation: errs.y_conservation,
            min_distance: min_pairwise_distance(&xs),
            repairs: self.boxes.iter().map(FeasibleBox::repairs).sum(),
            oracle_iterations: iterations,
            oracle_converged: converged,
        });
        self.graphs.push(self.graph.clone());
        Ok(())
    }

    pub fn summary(&self) -> Result<RunSummary> {
        let spec = &self.run.spec;
        let max = |f: fn(&MetricsRow) -> f64| self.metrics.iter().map(f).fold(0.0, f64::max);
        let b_ok = check_b_connectivity(&self.graphs, spec.b_window)?;
        let first_b_violation = b_ok.iter().position(|ok| !ok);
        let xs = self.positions();
        let world = spec.world_at(self.t);
        let center = sigma(&xs)?;
        let n = xs.len() as f64;
        let mut warnings = Vec::new();
        if let Some(t) = first_b_violation {
            warnings.push(format!("graph sequence is not {}-connected from tick {t}", spec.b_window));
        }
        if self.oracle_failures > 0 {
            warnings.push(format!("oracle hit its iteration cap on {} ticks", self.oracle_failures));
        }
        Ok(RunSummary {
            scenario: spec.name.clone(),
            seed: spec.seed,
            horizon: spec.horizon,
            agents: spec.n_agents(),
            prediction: self.run.flags.prediction,
            regret: self.regret(),
            regret_baseline: match (self.run.flags.oracle, spec.barrier.enabled) {
                (false, _) => "none",
                (true, true) => "stationary",
                (true, false) => "optimal",
            }
            .to_string(),
            max_s_error: max(|m| m.s_error),
            max_y_error: max(|m| m.y_error),
            max_s_conservation: max(|m| m.s_conservation),
            max_y_conservation: max(|m| m.y_conservation),
            box_violations: self.box_violations,
            iterate_outside_box: self.iterate_outside_box,
            box_repairs: self.metrics.iter().map(|m| m.repairs).sum(),
            dropouts: self.dropouts,
            oracle_failures: self.oracle_failures,
            b_window: spec.b_window,
            b_connectivity_violations: b_ok.iter().filter(|ok| !**ok).count(),
            first_b_violation,
            rounds: self.bus.rounds(),
            messages: self.bus.delivered(),
            min_pairwise_distance: self.metrics.iter().map(|m| m.min_distance).fold(f64::INFINITY, f64::min),
            final_defender_intruder: xs.iter().zip(&world.intruders).map(|(x, p)| (x - p.0).norm()).sum::<f64>() / n,
            final_barycenter_target: (center - world.target.0).norm(),
            final_spread: xs.iter().map(|x| (x - center).norm()).sum::<f64>() / n,
            warnings,
        })
    }

    /// Writes trace, metrics, summary and the resolved run file into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<RunSummary> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let summary = self.summary()?;
        write_trace(&dir.join(TRACE_FILE), &self.trace)?;
        write_metrics(&dir.join(METRICS_FILE), &self.metrics)?;
        if self.run.verbosity == Verbosity::Full {
            write_graphs(&dir.join(GRAPH_FILE), &self.graphs)?;
        }
        output::write_text(&dir.join(SUMMARY_FILE), &summary.to_toml_string()?)?;
        output::write_text(&dir.join(RUN_FILE), &self.run.to_toml_string()?)?;
        Ok(summary)
    }
}

/// Default output directory: `$AGGDEF_OUT_DIR/<scenario>-seed<seed>`, or
/// `runs/<scenario>-seed<seed>` when the variable is unset.
pub fn default_out_dir(spec: &ScenarioSpec) -> PathBuf {
    let base = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    base.join(format!("{}-seed{}", spec.name, spec.seed))
}

/// Resolves `config`, simulates the full horizon and writes all outputs.
/// Returns the summary and the output directory.
pub fn run(config: &RunConfig) -> Result<(RunSummary, PathBuf)> {
    let resolved = config.resolve()?;
    let out = config.out.clone().unwrap_or_else(|| default_out_dir(&resolved.spec));
    let mut sim = Simulation::new(resolved)?;
    while sim.step()? {}
    let summary = sim.write_outputs(&out)?;
    Ok((summary, out))
}
