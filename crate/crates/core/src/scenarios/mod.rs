//! Scenario descriptions, presets and the world oracle.
//!
//! A [`ScenarioSpec`] fully determines the ground truth of a run: intruder and
//! target trajectories, the defenders' cost parameters and initial positions,
//! noise levels, and the communication radius. Only the harness reads the
//! truth; agents see it through [`crate::estimator::measure`] and
//! [`sensed_offsets`].

mod presets;
mod trajectory;

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use presets::{preset, PRESET_NAMES};
pub use trajectory::{sample_trajectory, JumpEvent, TrajectorySpec, Waypoint};

use crate::algorithm::StepConfig;
use crate::constraints::{FieldBox, Tolerance};
use crate::estimator::{KinematicModel, MeasurementNoise};
use crate::network::CommGraph;
use crate::objectives::{Barrier, CostGains, CostMode};
use crate::{Error, Mat3, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    SurveillanceStatic,
    SurveillanceDynamic,
    Basketball,
}

impl ScenarioMode {
    pub fn cost_mode(self) -> CostMode {
        match self {
            ScenarioMode::Basketball => CostMode::Basketball,
            _ => CostMode::Surveillance,
        }
    }
}

/// Per-defender cost weights.
///
/// Scalar gains give `Q1 = γ_p I` (pull to tracking point), `Q2 = γ_b I`
/// (barycenter to target, or to the basket–ball point in basketball mode) and
/// `Q3 = γ_agg I` (defender to barycenter, surveillance only). A full matrix
/// in `q1`/`q2`/`q3` replaces the corresponding scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSpec {
    pub gamma_p: f64,
    #[serde(default)]
    pub gamma_b: f64,
    #[serde(default)]
    pub gamma_agg: f64,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q1: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q2: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q3: Option<[[f64; 3]; 3]>,
}

impl GainSpec {
    pub fn scalar(gamma_p: f64, gamma_b: f64, gamma_agg: f64, lambda: f64) -> Self {
        Self {
            gamma_p,
            gamma_b,
            gamma_agg,
            lambda,
            q1: None,
            q2: None,
            q3: None,
        }
    }

    pub fn to_gains(&self, lambda_agg: f64, barrier: Barrier) -> CostGains {
        let mat = |m: &Option<[[f64; 3]; 3]>, gamma: f64| match m {
            Some(rows) => Mat3::from_fn(|i, j| rows[i][j]),
            None => Mat3::identity() * gamma,
        };
        CostGains {
            q1: mat(&self.q1, self.gamma_p),
            q2: mat(&self.q2, self.gamma_b),
            q3: mat(&self.q3, self.gamma_agg),
            lambda: self.lambda,
            lambda_agg,
            barrier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    /// Initial position [m]; projected into the first feasible box.
    pub initial: [f64; 3],
    pub gains: GainSpec,
}

/// Process covariance used by the defenders' filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessNoise {
    /// `S = scale · I6` per block.
    Isotropic { scale: f64 },
    /// `S = G Gᵀ σ²` per block.
    Acceleration { sigma2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub process: ProcessNoise,
    /// Measurement variance `r`: `R = r · I3` for intruder and target alike.
    pub meas_var: f64,
    /// Probability that a defender's measurement is missing in a round.
    #[serde(default)]
    pub dropout: f64,
    /// Std. dev. of additive noise on sensed neighbor offsets [m].
    #[serde(default)]
    pub sensing_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    /// Initial covariance `P⁰ = p0 · I`.
    pub p0: f64,
    /// Start with `P⁰ = 0` regardless of `p0`.
    #[serde(default)]
    pub strict_zero_init: bool,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            p0: 1.0,
            strict_zero_init: false,
        }
    }
}

fn default_b_window() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub mode: ScenarioMode,
    /// Number of algorithm iterations `T`.
    pub horizon: usize,
    /// Tick length [s].
    pub dt: f64,
    /// Communication/sensing radius [m].
    pub comm_radius: f64,
    /// Window `B` for the B-connectivity report.
    #[serde(default = "default_b_window")]
    pub b_window: usize,
    /// Lazy mixing `A <- (1 − θ) A + θ I`.
    #[serde(default)]
    pub laziness: f64,
    pub step: StepConfig,
    #[serde(default)]
    pub lambda_agg: f64,
    pub barrier: Barrier,
    pub tolerance: Tolerance,
    pub field: FieldBox,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    /// Speed guard for trajectories [m/s].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basket: Option<[f64; 3]>,
    pub target: TrajectorySpec,
    pub intruders: Vec<TrajectorySpec>,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn cost_mode(&self) -> CostMode {
        self.mode.cost_mode()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads any CSV trajectories referenced by the spec.
    pub fn resolve_files(&mut self, base_dir: &Path) -> Result<()> {
        self.target.load_csv(base_dir)?;
        for tr in &mut self.intruders {
            tr.load_csv(base_dir)?;
        }
        Ok(())
    }

    pub fn gains(&self, i: usize) -> CostGains {
        self.agents[i].gains.to_gains(self.lambda_agg, self.barrier)
    }

    /// Time [s] of tick `t`.
    pub fn time_of(&self, t: usize) -> f64 {
        t as f64 * self.dt
    }

    pub fn kinematic_model(&self) -> Result<KinematicModel> {
        let r = Mat3::identity() * self.noise.meas_var;
        match self.noise.process {
            ProcessNoise::Isotropic { scale } => KinematicModel::with_isotropic_noise(self.dt, scale, r),
            ProcessNoise::Acceleration { sigma2 } => KinematicModel::with_acceleration_noise(self.dt, sigma2, r),
        }
    }

    pub fn measurement_noise(&self) -> Result<MeasurementNoise> {
        let r = Mat3::identity() * self.noise.meas_var;
        MeasurementNoise::new(&r, &r, self.noise.dropout)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.agents.len();
        if n == 0 {
            return Err(Error::Config("scenario has no defenders".into()));
        }
        if self.intruders.len() != n {
            return Err(Error::Config(format!(
                "{} intruder trajectories for {n} defenders",
                self.intruders.len()
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.comm_radius.is_nan() || self.comm_radius <= 0.0 {
            return Err(Error::Config("comm_radius must be positive".into()));
        }
        if self.b_window == 0 {
            return Err(Error::Config("b_window must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.laziness) {
            return Err(Error::Config("laziness must lie in [0,1)".into()));
        }
        if self.mode == ScenarioMode::Basketball && self.basket.is_none() {
            return Err(Error::Config("basketball scenario needs a basket position".into()));
        }
        if self.noise.meas_var < 0.0 || self.noise.sensing_std < 0.0 {
            return Err(Error::Config("noise levels must be non-negative".into()));
        }
        self.step.validate()?;
        self.tolerance.validate()?;
        self.field.validate()?;
        self.kinematic_model()?;
        self.measurement_noise()?;
        for i in 0..n {
            self.gains(i).validate().map_err(|e| Error::Config(format!("agent {i}: {e}")))?;
        }
        for (k, tr) in std::iter::once(&self.target).chain(&self.intruders).enumerate() {
            let what = if k == 0 { "target".to_string() } else { format!("intruder {}", k - 1) };
            tr.validate().map_err(|e| Error::Config(format!("{what}: {e}")))?;
            if let Some(p) = tr.anchor_positions().find(|p| !self.field.contains(p)) {
                return Err(Error::Config(format!("{what} leaves the field at {p:?}")));
            }
            if let Some(vmax) = self.max_speed {
                let v = tr.max_speed();
                if v > vmax {
                    return Err(Error::Config(format!("{what} moves at {v} m/s, above the {vmax} m/s guard")));
                }
            }
        }
        Ok(())
    }

    /// Ground truth at tick `t`, defender positions left empty.
    pub fn world_at(&self, t: usize) -> WorldState {
        let time = self.time_of(t);
        WorldState {
            t,
            time,
            intruders: self.intruders.iter().map(|tr| tr.sample(time)).collect(),
            target: self.target.sample(time),
            defenders: Vec::new(),
        }
    }

    /// Point the feasible band reaches toward: the target, or the basket.
    pub fn box_anchor(&self, target_estimate: &Vec3) -> Vec3 {
        match (self.mode, self.basket) {
            (ScenarioMode::Basketball, Some(b)) => Vec3::from(b),
            _ => *target_estimate,
        }
    }

    pub fn basket(&self) -> Option<Vec3> {
        self.basket.map(Vec3::from)
    }
}

/// Ground truth at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub t: usize,
    pub time: f64,
    /// `(position, velocity)` of each intruder.
    pub intruders: Vec<(Vec3, Vec3)>,
    /// `(position, velocity)` of the target or ball.
    pub target: (Vec3, Vec3),
    pub defenders: Vec<Vec3>,
}

/// `{x_i − x_j : j ∈ N_i \ {i}}` from true defender positions, optionally
/// perturbed by isotropic Gaussian noise of std `noise_std`.
pub fn sensed_offsets<R: Rng + ?Sized>(
    defenders: &[Vec3],
    i: usize,
    graph: &CommGraph,
    noise_std: f64,
    rng: &mut R,
) -> Vec<Vec3> {
    graph
        .neighbors(i)
        .iter()
        .map(|&j| {
            let d = defenders[i] - defenders[j];
            if noise_std > 0.0 {
                d + Vec3::from_fn(|_, _| noise_std * rng.sample::<f64, _>(StandardNormal))
            } else {
                d
            }
        })
        .collect()
}
