//! Trace, metrics and graph files.
//!
//! All files are headered CSV with a fixed column order. Floats are written
//! with 17 significant digits so that reading a trace back reproduces every
//! value bit for bit.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::network::CommGraph;
use crate::{Error, Result, Vec3};

pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const GRAPH_FILE: &str = "graph.csv";
pub const SUMMARY_FILE: &str = "summary.toml";
pub const RUN_FILE: &str = "run.toml";

/// State of one defender at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub agent: usize,
    pub x: Vec3,
    /// Projected point of the step that produced `x` (`x` itself at t = 0).
    pub x_tilde: Vec3,
    pub s: Vec3,
    pub y: Vec3,
    /// Intruder and target estimates behind the agent's current cost.
    pub p_hat: Vec3,
    pub b_hat: Vec3,
    pub box_lower: Vec3,
    pub box_upper: Vec3,
    /// True local cost `f_i(x_i, σ(x), x_{N_i})` at this tick.
    pub local_cost: f64,
    pub degree: usize,
    /// Trace of the agent's filter covariance (intruder plus target block).
    pub cov_trace: f64,
}

/// Team-level diagnostics at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub t: usize,
    pub global_cost: f64,
    /// NaN when the oracle is disabled.
    pub oracle_cost: f64,
    pub gap: f64,
    pub s_error: f64,
    pub y_error: f64,
    pub s_conservation: f64,
    pub y_conservation: f64,
    pub min_distance: f64,
    pub repairs: usize,
    pub oracle_iterations: usize,
    pub oracle_converged: bool,
}

pub(crate) fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_vec(out: &mut Vec<String>, v: &Vec3) {
    out.extend(v.iter().map(|c| fmt_f(*c)));
}

fn vec_header(out: &mut Vec<String>, name: &str) {
    out.extend(["x", "y", "z"].iter().map(|c| format!("{name}_{c}")));
}

pub fn trace_header() -> Vec<String> {
    let mut h = vec!["t".to_string(), "agent".to_string()];
    for name in ["x", "x_tilde", "s", "y", "p_hat", "b_hat", "box_lo", "box_hi"] {
        vec_header(&mut h, name);
    }
    h.extend(["local_cost", "degree", "cov_trace"].map(String::from));
    h
}

impl TraceRecord {
    fn fields(&self) -> Vec<String> {
        let mut out = vec![self.t.to_string(), self.agent.to_string()];
        for v in [
            &self.x,
            &self.x_tilde,
            &self.s,
            &self.y,
            &self.p_hat,
            &self.b_hat,
            &self.box_lower,
            &self.box_upper,
        ] {
            push_vec(&mut out, v);
        }
        out.push(fmt_f(self.local_cost));
        out.push(self.degree.to_string());
        out.push(fmt_f(self.cov_trace));
        out
    }

    fn parse(fields: &[&str], path: &Path, line: usize) -> Result<Self> {
        let bad = |what: &str| Error::parse(path, format!("line {line}: {what}"));
        if fields.len() != trace_header().len() {
            return Err(bad("wrong number of columns"));
        }
        let f = |k: usize| fields[k].parse::<f64>().map_err(|_| bad("malformed number"));
        let u = |k: usize| fields[k].parse::<usize>().map_err(|_| bad("malformed integer"));
        let v = |k: usize| -> Result<Vec3> { Ok(Vec3::new(f(k)?, f(k + 1)?, f(k + 2)?)) };
        Ok(Self {
            t: u(0)?,
            agent: u(1)?,
            x: v(2)?,
            x_tilde: v(5)?,
            s: v(8)?,
            y: v(11)?,
            p_hat: v(14)?,
            b_hat: v(17)?,
            box_lower: v(20)?,
            box_upper: v(23)?,
            local_cost: f(26)?,
            degree: u(27)?,
            cov_trace: f(28)?,
        })
    }
}

pub fn metrics_header() -> Vec<String> {
    [
        "t",
        "global_cost",
        "oracle_cost",
        "gap",
        "s_error",
        "y_error",
        "s_conservation",
        "y_conservation",
        "min_distance",
        "repairs",
        "oracle_iterations",
        "oracle_converged",
    ]
    .map(String::from)
    .to_vec()
}

impl MetricsRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.t.to_string(),
            fmt_f(self.global_cost),
            fmt_f(self.oracle_cost),
            fmt_f(self.gap),
            fmt_f(self.s_error),
            fmt_f(self.y_error),
            fmt_f(self.s_conservation),
            fmt_f(self.y_conservation),
            fmt_f(self.min_distance),
            self.repairs.to_string(),
            self.oracle_iterations.to_string(),
            u8::from(self.oracle_converged).to_string(),
        ]
    }

    fn parse(fields: &[&str], path: &Path, line: usize) -> Result<Self> {
        let bad = |what: &str| Error::parse(path, format!("line {line}: {what}"));
        if fields.len() != metrics_header().len() {
            return Err(bad("wrong number of columns"));
        }
        let f = |k: usize| fields[k].parse::<f64>().map_err(|_| bad("malformed number"));
        let u = |k: usize| fields[k].parse::<usize>().map_err(|_| bad("malformed integer"));
        Ok(Self {
            t: u(0)?,
            global_cost: f(1)?,
            oracle_cost: f(2)?,
            gap: f(3)?,
            s_error: f(4)?,
            y_error: f(5)?,
            s_conservation: f(6)?,
            y_conservation: f(7)?,
            min_distance: f(8)?,
            repairs: u(9)?,
            oracle_iterations: u(10)?,
            oracle_converged: u(11)? != 0,
        })
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

fn write_rows<I>(path: &Path, header: Vec<String>, rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<T>(path: &Path, header: Vec<String>, parse: impl Fn(&[&str], &Path, usize) -> Result<T>) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let found = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if found.iter().ne(header.iter().map(String::as_str)) {
        return Err(Error::parse(path, "unexpected header"));
    }
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let fields: Vec<&str> = rec.iter().collect();
        out.push(parse(&fields, path, k + 2)?);
    }
    Ok(out)
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> Result<()> {
    write_rows(path, trace_header(), records.iter().map(TraceRecord::fields))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    read_rows(path, trace_header(), TraceRecord::parse)
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_rows(path, metrics_header(), rows.iter().map(MetricsRow::fields))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    read_rows(path, metrics_header(), MetricsRow::parse)
}

/// Edge list per tick: one `t,i,j,weight` row per undirected edge.
pub fn write_graphs(path: &Path, graphs: &[CommGraph]) -> Result<()> {
    let header = ["t", "i", "j", "weight"].map(String::from).to_vec();
    let rows = graphs.iter().enumerate().flat_map(|(t, g)| {
        g.edges()
            .map(move |(i, j)| vec![t.to_string(), i.to_string(), j.to_string(), fmt_f(g.weight(i, j))])
            .collect::<Vec<_>>()
    });
    write_rows(path, header, rows)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Generic CSV writer for report tables.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    write_rows(path, header.iter().map(|s| s.to_string()).collect(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: usize) -> TraceRecord {
        TraceRecord {
            t,
            agent: 1,
            x: Vec3::new(0.1, -1.0 / 3.0, std::f64::consts::PI),
            x_tilde: Vec3::new(1e-300, -0.0, 5e17),
            s: Vec3::repeat(0.2),
            y: Vec3::repeat(-7.25),
            p_hat: Vec3::repeat(1.0),
            b_hat: Vec3::repeat(2.0),
            box_lower: Vec3::repeat(-3.0),
            box_upper: Vec3::repeat(3.0),
            local_cost: 12.345678901234567,
            degree: 2,
            cov_trace: 0.5,
        }
    }

    #[test]
    fn trace_round_trips_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(TRACE_FILE);
        let recs = vec![record(0), record(1)];
        write_trace(&path, &recs).unwrap();
        let back = read_trace(&path).unwrap();
        assert_eq!(back, recs);
        assert_eq!(back[0].x_tilde[1].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn metrics_round_trip_with_nan() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(METRICS_FILE);
        let row = MetricsRow {
            t: 3,
            global_cost: 1.5,
            oracle_cost: f64::NAN,
            gap: f64::NAN,
            s_error: 0.0,
            y_error: 1e-12,
            s_conservation: 0.0,
            y_conservation: 0.0,
            min_distance: f64::INFINITY,
            repairs: 3,
            oracle_iterations: 0,
            oracle_converged: false,
        };
        write_metrics(&path, std::slice::from_ref(&row)).unwrap();
        let back = read_metrics(&path).unwrap();
        assert!(back[0].oracle_cost.is_nan());
        assert_eq!(back[0].min_distance, f64::INFINITY);
        assert_eq!(back[0].repairs, 3);
    }

    #[test]
    fn header_mismatch_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_trace(&path), Err(Error::Parse { .. })));
        assert!(matches!(read_trace(&dir.path().join("none.csv")), Err(Error::Io { .. })));
    }
}
