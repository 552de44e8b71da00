//! Post-hoc tools over a finished run directory.

use std::path::Path;

use super::output::{fmt_f, read_metrics, read_trace, write_table, TraceRecord};
use super::{evaluate_tick, round_graph, ResolvedRun, METRICS_FILE, RUN_FILE, TRACE_FILE};
use crate::metrics::RegretLedger;
use crate::{Error, Result, Vec3};

/// Files written by [`write_report`].
pub const REPORT_FILES: [&str; 3] = ["positions.csv", "regret.csv", "tracking.csv"];

/// Regret recomputed from a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub regret: f64,
    /// Regret stored in the run's metrics, if the run had the oracle on.
    pub in_run_regret: Option<f64>,
    /// Largest per-tick difference between replayed and stored gaps.
    pub max_gap_difference: Option<f64>,
    /// Per-tick gaps for ticks `1..=T`.
    pub gaps: Vec<f64>,
    pub oracle_failures: usize,
}

/// Trace positions grouped by tick.
fn positions_by_tick(trace: &[TraceRecord], n: usize, path: &Path) -> Result<Vec<Vec<Vec3>>> {
    if n == 0 || !trace.len().is_multiple_of(n) {
        return Err(Error::parse(path, format!("{} records do not split into ticks of {n} agents", trace.len())));
    }
    trace
        .chunks(n)
        .enumerate()
        .map(|(t, chunk)| {
            if chunk.iter().enumerate().any(|(i, r)| r.t != t || r.agent != i) {
                return Err(Error::parse(path, format!("records of tick {t} are missing or out of order")));
            }
            Ok(chunk.iter().map(|r| r.x).collect())
        })
        .collect()
}

/// Recomputes the oracle and dynamic regret from `dir/trace.csv` and `dir/run.toml`.
pub fn replay_oracle(dir: &Path) -> Result<ReplayReport> {
    let run = ResolvedRun::load(&dir.join(RUN_FILE))?;
    let trace_path = dir.join(TRACE_FILE);
    let trace = read_trace(&trace_path)?;
    let ticks = positions_by_tick(&trace, run.spec.n_agents(), &trace_path)?;

    let mut ledger = RegretLedger::default();
    let mut warm: Option<Vec<Vec3>> = None;
    let mut oracle_failures = 0;
    let mut gaps = Vec::with_capacity(ticks.len().saturating_sub(1));
    for (t, xs) in ticks.iter().enumerate() {
        let graph = round_graph(&run.spec, xs)?;
        let start = warm.clone().unwrap_or_else(|| xs.clone());
        let eval = evaluate_tick(&run.spec, t, xs, &graph, Some(&start))?;
        let sol = eval.oracle.expect("oracle requested");
        if !sol.converged {
            oracle_failures += 1;
        }
        if t > 0 {
            ledger.push(eval.global_cost, sol.cost);
            gaps.push(eval.global_cost - sol.cost);
        }
        warm = Some(sol.x);
    }

    let metrics_path = dir.join(METRICS_FILE);
    let (in_run_regret, max_gap_difference) = if run.flags.oracle && metrics_path.exists() {
        let rows = read_metrics(&metrics_path)?;
        let stored: Vec<f64> = rows.iter().filter(|r| r.t > 0).map(|r| r.gap).collect();
        if stored.len() != gaps.len() {
            return Err(Error::parse(&metrics_path, "metrics and trace cover different horizons"));
        }
        let mut in_run = RegretLedger::default();
        for r in rows.iter().filter(|r| r.t > 0) {
            in_run.push(r.global_cost, r.oracle_cost);
        }
        let diff = stored.iter().zip(&gaps).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        (Some(in_run.total()), Some(diff))
    } else {
        (None, None)
    };

    Ok(ReplayReport {
        regret: ledger.total(),
        in_run_regret,
        max_gap_difference,
        gaps,
        oracle_failures,
    })
}

/// Writes plot-ready tables next to the trace: defender and intruder
/// positions per tick, the regret curve (one row per tick `1..=T`) and the
/// tracker errors. Regret comes from the stored metrics when available and
/// is recomputed from the trace otherwise.
pub fn write_report(dir: &Path) -> Result<()> {
    let run = ResolvedRun::load(&dir.join(RUN_FILE))?;
    let trace_path = dir.join(TRACE_FILE);
    let trace = read_trace(&trace_path)?;
    let ticks = positions_by_tick(&trace, run.spec.n_agents(), &trace_path)?;
    let horizon = ticks.len() - 1;

    let positions = trace.iter().map(|r| {
        let world = run.spec.world_at(r.t);
        let p = world.intruders[r.agent].0;
        let b = world.target.0;
        let mut row = vec![r.t.to_string(), fmt_f(world.time), r.agent.to_string()];
        row.extend(r.x.iter().chain(p.iter()).chain(b.iter()).map(|v| fmt_f(*v)));
        row
    });
    write_table(
        &dir.join(REPORT_FILES[0]),
        &["t", "time", "agent", "x", "y", "z", "intruder_x", "intruder_y", "intruder_z", "target_x", "target_y", "target_z"],
        positions,
    )?;

    let metrics_path = dir.join(METRICS_FILE);
    let metrics = if metrics_path.exists() { Some(read_metrics(&metrics_path)?) } else { None };
    let gaps: Vec<f64> = match &metrics {
        Some(rows) if run.flags.oracle => rows.iter().filter(|r| r.t > 0).map(|r| r.gap).collect(),
        _ => replay_oracle(dir)?.gaps,
    };
    if gaps.len() != horizon {
        return Err(Error::parse(&metrics_path, "metrics and trace cover different horizons"));
    }
    let mut cumulative = 0.0;
    let regret_rows = gaps.iter().enumerate().map(|(k, g)| {
        cumulative += g;
        vec![(k + 1).to_string(), fmt_f(*g), fmt_f(cumulative)]
    });
    write_table(&dir.join(REPORT_FILES[1]), &["t", "gap", "cumulative_regret"], regret_rows.collect::<Vec<_>>())?;

    let rows = metrics.ok_or_else(|| Error::io(&metrics_path, std::io::ErrorKind::NotFound.into()))?;
    write_table(
        &dir.join(REPORT_FILES[2]),
        &["t", "s_error", "y_error", "s_conservation", "y_conservation", "min_distance"],
        rows.iter().map(|r| {
            vec![
                r.t.to_string(),
                fmt_f(r.s_error),
                fmt_f(r.y_error),
                fmt_f(r.s_conservation),
                fmt_f(r.y_conservation),
                fmt_f(r.min_distance),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::super::{RunConfig, Simulation};
    use super::*;

    #[test]
    fn replay_matches_in_run_regret() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunConfig {
            horizon: Some(40),
            seed: Some(3),
            ..RunConfig::from_preset("fig3_right")
        }
        .resolve()
        .unwrap();
        let mut sim = Simulation::new(run).unwrap();
        let summary = sim.run_to_end().unwrap();
        sim.write_outputs(dir.path()).unwrap();
        let rep = replay_oracle(dir.path()).unwrap();
        assert_eq!(rep.gaps.len(), 40);
        assert!((rep.regret - summary.regret).abs() <= 1e-9);
        assert_eq!(rep.max_gap_difference, Some(0.0));

        write_report(dir.path()).unwrap();
        let regret_csv = std::fs::read_to_string(dir.path().join("regret.csv")).unwrap();
        assert_eq!(regret_csv.lines().count(), 1 + 40);
    }

    #[test]
    fn truncated_trace_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut sim = Simulation::new(
            RunConfig {
                horizon: Some(3),
                ..RunConfig::from_preset("fig3_left")
            }
            .resolve()
            .unwrap(),
        )
        .unwrap();
        sim.run_to_end().unwrap();
        sim.write_outputs(dir.path()).unwrap();
        let path = dir.path().join(TRACE_FILE);
        let text = std::fs::read_to_string(&path).unwrap();
        let cut: Vec<&str> = text.lines().take(6).collect();
        std::fs::write(&path, cut.join("\n") + "\n").unwrap();
        assert!(matches!(replay_oracle(dir.path()), Err(Error::Parse { .. })));
    }
}
