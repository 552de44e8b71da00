//! Full-information benchmark and run diagnostics.
//!
//! The centralized oracle solves the team problem of one tick with true
//! intruder/target positions and the realized neighbor sets, by projected
//! gradient with backtracking. Dynamic regret accumulates the per-tick gap
//! between the team cost at the algorithm's iterate and at the oracle point.

use crate::constraints::{project, FeasibleBox};
use crate::network::CommGraph;
use crate::objectives::{eval_quadratic, grad1_cost, grad2_cost, sigma, CostGains, CostMode, CostSnapshot};
use crate::{Error, Result, Vec3};

/// Team problem of one tick: every defender's cost parameters, reference
/// points and box, plus the neighbor sets frozen at that tick.
#[derive(Debug, Clone)]
pub struct TeamProblem {
    pub mode: CostMode,
    pub gains: Vec<CostGains>,
    /// Reference points only; offsets are rebuilt from the candidate positions.
    pub refs: Vec<CostSnapshot>,
    pub boxes: Vec<FeasibleBox>,
    pub neighbors: Vec<Vec<usize>>,
}

impl TeamProblem {
    pub fn new(
        mode: CostMode,
        gains: Vec<CostGains>,
        refs: Vec<CostSnapshot>,
        boxes: Vec<FeasibleBox>,
        graph: &CommGraph,
    ) -> Result<Self> {
        let n = gains.len();
        if n == 0 || refs.len() != n || boxes.len() != n || graph.n() != n {
            return Err(Error::Input("team problem components disagree on the team size".into()));
        }
        Ok(Self {
            mode,
            gains,
            refs,
            boxes,
            neighbors: (0..n).map(|i| graph.neighbors(i).to_vec()).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.gains.len()
    }

    fn snapshot(&self, i: usize, xs: &[Vec3]) -> CostSnapshot {
        self.refs[i].with_offsets(self.neighbors[i].iter().map(|&j| xs[i] - xs[j]).collect())
    }

    /// Team cost `Σ_i f_i(x_i, σ(x), x_{N_i})`.
    pub fn cost(&self, xs: &[Vec3]) -> f64 {
        let s = sigma(xs).expect("non-empty team");
        (0..self.n())
            .map(|i| {
                let snap = self.snapshot(i, xs);
                crate::objectives::eval_cost(&xs[i], &s, &snap, &self.gains[i], self.mode)
            })
            .sum()
    }

    /// Block `k` of the team gradient:
    /// `∇₁ f_k + (1/N) Σ_j ∇₂ f_j + 2 Σ_{j ∈ N_k} ∇B(x_k − x_j)`.
    pub fn gradient(&self, xs: &[Vec3]) -> Vec<Vec3> {
        let n = self.n();
        let s = sigma(xs).expect("non-empty team");
        let mean_g2: Vec3 = (0..n)
            .map(|j| grad2_cost(&xs[j], &s, &self.refs[j], &self.gains[j], self.mode))
            .sum::<Vec3>()
            / n as f64;
        (0..n)
            .map(|k| grad1_cost(&xs[k], &s, &self.snapshot(k, xs), &self.gains[k], self.mode) + mean_g2)
            .collect()
    }

    /// Crude Lipschitz bound of the quadratic part of the team gradient.
    fn lipschitz_bound(&self) -> f64 {
        let norm = |m: &crate::Mat3| m.symmetric_eigenvalues().amax();
        let max_q1 = self.gains.iter().map(|g| norm(&g.q1)).fold(0.0, f64::max);
        let mean_q2 = self.gains.iter().map(|g| norm(&g.q2)).sum::<f64>() / self.n() as f64;
        let max_q3 = match self.mode {
            CostMode::Surveillance => self.gains.iter().map(|g| norm(&g.q3)).fold(0.0, f64::max),
            CostMode::Basketball => 0.0,
        };
        2.0 * (max_q1 + mean_q2 + max_q3)
    }

    pub fn project(&self, xs: &[Vec3]) -> Vec<Vec3> {
        xs.iter().zip(&self.boxes).map(|(x, b)| project(x, b)).collect()
    }

    /// `‖x − Π(x − η ∇f(x))‖` over the stacked vector.
    pub fn fixed_point_residual(&self, xs: &[Vec3], eta: f64) -> f64 {
        let g = self.gradient(xs);
        let moved: Vec<Vec3> = xs.iter().zip(&g).map(|(x, g)| x - eta * g).collect();
        stacked_dist(xs, &self.project(&moved))
    }

    /// Whether any defender has the barrier term active.
    pub fn has_barrier(&self) -> bool {
        self.gains.iter().any(|g| g.barrier.enabled)
    }

    /// Quadratic part only (testing aid).
    pub fn quadratic_cost(&self, xs: &[Vec3]) -> f64 {
        let s = sigma(xs).expect("non-empty team");
        (0..self.n())
            .map(|i| eval_quadratic(&xs[i], &s, &self.refs[i], &self.gains[i], self.mode))
            .sum()
    }
}

fn stacked_dist(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).norm_squared()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x: Vec<Vec3>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Step length in force at termination.
    pub step: f64,
}

/// Projected gradient on the team problem, warm-started at `warm`.
///
/// Steps start at `1/L` for the quadratic part and halve until the sufficient
/// decrease condition `f(x⁺) ≤ f(x) + ∇f(x)·(x⁺ − x) + ‖x⁺ − x‖² / (2η)` holds.
/// Iteration stops once the accepted step moves less than `tol`.
pub fn centralized_oracle(problem: &TeamProblem, warm: &[Vec3], opts: OracleOptions) -> Result<OracleSolution> {
    if warm.len() != problem.n() {
        return Err(Error::Input(format!("warm start has {} blocks, expected {}", warm.len(), problem.n())));
    }
    let eta0 = 1.0 / problem.lipschitz_bound().max(1e-12);
    let mut x = problem.project(warm);
    let mut fx = problem.cost(&x);
    let mut eta = eta0;
    for it in 1..=opts.max_iter {
        let g = problem.gradient(&x);
        let (next, f_next, moved) = loop {
            let cand = problem.project(&x.iter().zip(&g).map(|(x, g)| x - eta * g).collect::<Vec<_>>());
            let f_cand = problem.cost(&cand);
            let lin: f64 = x.iter().zip(&cand).zip(&g).map(|((x, c), g)| g.dot(&(c - x))).sum();
            let d = stacked_dist(&x, &cand);
            if f_cand <= fx + lin + d * d / (2.0 * eta) + 1e-15 * fx.abs().max(1.0) || eta < 1e-16 {
                break (cand, f_cand, d);
            }
            eta *= 0.5;
        };
        x = next;
        fx = f_next;
        if moved <= opts.tol {
            return Ok(OracleSolution { x, cost: fx, iterations: it, converged: true, step: eta });
        }
        // let the step recover after a backtrack
        eta = (eta * 2.0).min(eta0);
    }
    Ok(OracleSolution {
        x,
        cost: fx,
        iterations: opts.max_iter,
        converged: false,
        step: eta,
    })
}

/// `R_T = Σ_t (f_t(x_t) − f_t(x*_t))` and the per-step gaps.
pub fn dynamic_regret(costs: &[f64], oracle_costs: &[f64]) -> Result<(f64, Vec<f64>)> {
    if costs.len() != oracle_costs.len() {
        return Err(Error::Input("cost and oracle series differ in length".into()));
    }
    let gaps: Vec<f64> = costs.iter().zip(oracle_costs).map(|(c, o)| c - o).collect();
    Ok((gaps.iter().sum(), gaps))
}

/// Running regret with per-step rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretLedger {
    costs: Vec<f64>,
    oracle_costs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl RegretLedger {
    pub fn push(&mut self, cost: f64, oracle_cost: f64) {
        let prev = self.cumulative.last().copied().unwrap_or(0.0);
        self.costs.push(cost);
        self.oracle_costs.push(oracle_cost);
        self.cumulative.push(prev + (cost - oracle_cost));
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.costs.iter().zip(&self.oracle_costs).map(|(c, o)| c - o)
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }
}

/// Tracker diagnostics at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackingErrors {
    /// `max_i ‖s_i − σ(x)‖`.
    pub s_error: f64,
    /// `max_i ‖y_i − (1/N) Σ_j ∇₂ f̂_j‖`.
    pub y_error: f64,
    /// `‖(1/N) Σ_i s_i − σ(x)‖`, zero up to rounding.
    pub s_conservation: f64,
    /// `‖Σ_i y_i − Σ_i ∇₂ f̂_i‖`, zero up to rounding.
    pub y_conservation: f64,
}

/// Consensus errors of the trackers. `grad2` holds `∇₂ f̂_i(x_i, s_i)`.
pub fn tracking_errors(xs: &[Vec3], ss: &[Vec3], ys: &[Vec3], grad2: &[Vec3]) -> Result<TrackingErrors> {
    let n = xs.len();
    if n == 0 || ss.len() != n || ys.len() != n || grad2.len() != n {
        return Err(Error::Input("tracker arrays disagree on the team size".into()));
    }
    let sig = sigma(xs)?;
    let g_sum: Vec3 = grad2.iter().sum();
    let g_mean = g_sum / n as f64;
    let y_sum: Vec3 = ys.iter().sum();
    let s_mean: Vec3 = ss.iter().sum::<Vec3>() / n as f64;
    Ok(TrackingErrors {
        s_error: ss.iter().map(|s| (s - sig).norm()).fold(0.0, f64::max),
        y_error: ys.iter().map(|y| (y - g_mean).norm()).fold(0.0, f64::max),
        s_conservation: (s_mean - sig).norm(),
        y_conservation: (y_sum - g_sum).norm(),
    })
}

/// Smallest distance between any two defenders (infinite for a single one).
pub fn min_pairwise_distance(xs: &[Vec3]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            best = best.min((xs[i] - xs[j]).norm());
        }
    }
    best
}
