use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    /// Time [s].
    pub t: f64,
    /// Position [m].
    pub pos: [f64; 3],
}

/// Instantaneous relocation, e.g. a pass that moves the ball to a new holder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub t: f64,
    pub to: [f64; 3],
}

/// Piecewise-linear path with optional jumps.
///
/// Between consecutive anchors the position is interpolated linearly. An event
/// starts a new piece: the path never interpolates across an event, the left
/// limit at the event time is the preceding piece's value, and the value at
/// the event time is the event position. A waypoint may share its time with an
/// event; it then acts as the left limit.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectorySpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub waypoints: Vec<Waypoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<JumpEvent>,
    /// CSV file with `t,x,y,z` rows, resolved relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
enum Anchor {
    Waypoint(f64, Vec3),
    Event(f64, Vec3),
}

impl Anchor {
    fn time(&self) -> f64 {
        match *self {
            Anchor::Waypoint(t, _) | Anchor::Event(t, _) => t,
        }
    }

    fn pos(&self) -> Vec3 {
        match *self {
            Anchor::Waypoint(_, p) | Anchor::Event(_, p) => p,
        }
    }

    fn is_event(&self) -> bool {
        matches!(self, Anchor::Event(..))
    }
}

impl TrajectorySpec {
    pub fn stationary(pos: [f64; 3]) -> Self {
        Self {
            waypoints: vec![Waypoint { t: 0.0, pos }],
            ..Self::default()
        }
    }

    pub fn through(points: &[(f64, [f64; 3])]) -> Self {
        Self {
            waypoints: points.iter().map(|&(t, pos)| Waypoint { t, pos }).collect(),
            ..Self::default()
        }
    }

    /// Replaces a `csv` reference by the waypoints it contains.
    pub fn load_csv(&mut self, base_dir: &Path) -> Result<()> {
        let Some(rel) = self.csv.take() else {
            return Ok(());
        };
        let path = base_dir.join(&rel);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut waypoints = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == 4 => waypoints.push(Waypoint {
                    t: v[0],
                    pos: [v[1], v[2], v[3]],
                }),
                // header row
                Err(_) if lineno == 0 => continue,
                _ => {
                    return Err(Error::parse(
                        &path,
                        format!("line {}: expected `t,x,y,z`", lineno + 1),
                    ))
                }
            }
        }
        self.waypoints.extend(waypoints);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.csv.is_some() {
            return Err(Error::Config("trajectory CSV reference was not loaded".into()));
        }
        if self.waypoints.is_empty() && self.events.is_empty() {
            return Err(Error::Config("trajectory needs at least one waypoint or event".into()));
        }
        let finite = |t: f64, p: &[f64; 3]| t.is_finite() && p.iter().all(|c| c.is_finite());
        if !self.waypoints.iter().all(|w| finite(w.t, &w.pos)) || !self.events.iter().all(|e| finite(e.t, &e.to)) {
            return Err(Error::Config("trajectory contains non-finite values".into()));
        }
        for (name, times) in [
            ("waypoint", self.waypoints.iter().map(|w| w.t).collect::<Vec<_>>()),
            ("event", self.events.iter().map(|e| e.t).collect::<Vec<_>>()),
        ] {
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config(format!("{name} times must be strictly increasing")));
            }
        }
        Ok(())
    }

    fn anchors(&self) -> Vec<Anchor> {
        let mut out: Vec<Anchor> = self
            .waypoints
            .iter()
            .map(|w| Anchor::Waypoint(w.t, Vec3::from(w.pos)))
            .chain(self.events.iter().map(|e| Anchor::Event(e.t, Vec3::from(e.to))))
            .collect();
        // stable: at equal times the waypoint (left limit) precedes the event
        out.sort_by(|a, b| a.time().total_cmp(&b.time()).then(a.is_event().cmp(&b.is_event())));
        out
    }

    /// Position and velocity at time `t`; times outside the anchors clamp to
    /// the end points with zero velocity.
    pub fn sample(&self, t: f64) -> (Vec3, Vec3) {
        let anchors = self.anchors();
        let Some(first) = anchors.first() else {
            return (Vec3::zeros(), Vec3::zeros());
        };
        // last anchor with time <= t; events win ties since they sort later
        let Some(k) = anchors.iter().rposition(|a| a.time() <= t) else {
            return (first.pos(), Vec3::zeros());
        };
        let prev = anchors[k];
        match anchors.get(k + 1) {
            Some(next @ Anchor::Waypoint(..)) => {
                let span = next.time() - prev.time();
                let vel = (next.pos() - prev.pos()) / span;
                (prev.pos() + vel * (t - prev.time()), vel)
            }
            _ => (prev.pos(), Vec3::zeros()),
        }
    }

    /// Largest segment speed, jumps excluded.
    pub fn max_speed(&self) -> f64 {
        self.anchors()
            .windows(2)
            .filter(|w| !w[1].is_event())
            .map(|w| (w[1].pos() - w[0].pos()).norm() / (w[1].time() - w[0].time()))
            .fold(0.0, f64::max)
    }

    pub fn event_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().map(|e| e.t)
    }

    /// All anchor positions, used for field containment checks.
    pub fn anchor_positions(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.waypoints
            .iter()
            .map(|w| Vec3::from(w.pos))
            .chain(self.events.iter().map(|e| Vec3::from(e.to)))
    }
}

/// Free-function form of [`TrajectorySpec::sample`].
pub fn sample_trajectory(spec: &TrajectorySpec, t: f64) -> (Vec3, Vec3) {
    spec.sample(t)
}
