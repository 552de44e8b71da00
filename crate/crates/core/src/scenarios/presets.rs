use super::{
    AgentSpec, EstimatorSpec, GainSpec, JumpEvent, NoiseSpec, ProcessNoise, ScenarioMode, ScenarioSpec,
    TrajectorySpec, Waypoint,
};
use crate::algorithm::StepConfig;
use crate::constraints::{FieldBox, Tolerance};
use crate::objectives::Barrier;
use crate::{Error, Result};

pub const PRESET_NAMES: [&str; 6] = [
    "fig3_left",
    "fig3_right",
    "fig4_left",
    "fig4_right",
    "basketball_demo",
    "surveillance_dynamic",
];

const DT: f64 = 0.01;
const HORIZON: usize = 3000;
const HEIGHT: f64 = 1.0;

/// Step size of the presets. The preset gains give the team cost a gradient
/// Lipschitz constant of up to 44; at α = 0.2 every preset settles into a
/// period-two oscillation between box corners, and the tracker lag pushes
/// the stable range below 2/L, so fig4_right still oscillates at α = 0.04.
const PRESET_ALPHA: f64 = 0.02;

fn preset_step() -> StepConfig {
    StepConfig {
        alpha: PRESET_ALPHA,
        ..StepConfig::default()
    }
}

/// Built-in scenario by name.
pub fn preset(name: &str) -> Result<ScenarioSpec> {
    match name {
        "fig3_left" => Ok(pressing(name, 0.8)),
        "fig3_right" => Ok(pressing(name, 0.2)),
        "fig4_left" => Ok(aggregation(name, 5.0)),
        "fig4_right" => Ok(aggregation(name, 20.0)),
        "basketball_demo" => Ok(basketball()),
        "surveillance_dynamic" => Ok(dynamic_surveillance()),
        other => Err(Error::Config(format!(
            "unknown preset `{other}` (expected one of {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}

fn surveillance_base(name: &str, mode: ScenarioMode) -> ScenarioSpec {
    ScenarioSpec {
        name: name.to_string(),
        mode,
        horizon: HORIZON,
        dt: DT,
        comm_radius: 15.0,
        b_window: 1,
        laziness: 0.0,
        step: preset_step(),
        lambda_agg: 0.0,
        barrier: Barrier::default(),
        tolerance: Tolerance {
            kappa: [0.02, 0.02, 0.02],
            // flat formation: the height band is always degenerate and
            // collapses onto the target height
            eps_min: [0.1, 0.1, 0.5],
        },
        field: FieldBox {
            lower: [-10.0, -10.0, 0.0],
            upper: [10.0, 10.0, 3.0],
        },
        noise: NoiseSpec {
            process: ProcessNoise::Isotropic { scale: 10.0 },
            meas_var: 1e-4,
            dropout: 0.0,
            sensing_std: 0.0,
        },
        estimator: EstimatorSpec::default(),
        max_speed: None,
        basket: None,
        target: TrajectorySpec::stationary([0.0, 0.0, HEIGHT]),
        intruders: [[5.0, 4.0], [-5.0, 3.0], [2.0, -6.0]]
            .iter()
            .map(|p| TrajectorySpec::stationary([p[0], p[1], HEIGHT]))
            .collect(),
        agents: Vec::new(),
        seed: 0,
    }
}

fn initial_positions() -> [[f64; 3]; 3] {
    [[0.6, 0.5, HEIGHT], [-0.6, 0.4, HEIGHT], [0.3, -0.6, HEIGHT]]
}

/// Static pressing study: same gains, tracking points pushed toward the
/// intruders (λ = 0.8) or back toward the target (λ = 0.2).
fn pressing(name: &str, lambda: f64) -> ScenarioSpec {
    let mut spec = surveillance_base(name, ScenarioMode::SurveillanceStatic);
    spec.agents = initial_positions()
        .iter()
        .map(|&initial| AgentSpec {
            initial,
            gains: GainSpec::scalar(10.0, 5.0, 0.1, lambda),
        })
        .collect();
    spec
}

/// Static aggregation study: mixed λ, barycenter and cohesion weights both set to `weight`.
fn aggregation(name: &str, weight: f64) -> ScenarioSpec {
    let mut spec = surveillance_base(name, ScenarioMode::SurveillanceStatic);
    spec.agents = initial_positions()
        .iter()
        .zip([0.5, 0.8, 0.2])
        .map(|(&initial, lambda)| AgentSpec {
            initial,
            gains: GainSpec::scalar(2.0, weight, weight, lambda),
        })
        .collect();
    spec
}

/// Slowly circulating intruders around a fixed target (≤ 0.5 m/s).
fn dynamic_surveillance() -> ScenarioSpec {
    let mut spec = surveillance_base("surveillance_dynamic", ScenarioMode::SurveillanceDynamic);
    let loops: [[[f64; 2]; 4]; 3] = [
        [[5.0, 4.0], [3.0, 6.0], [6.0, 2.5], [5.0, 4.0]],
        [[-5.0, 3.0], [-3.0, 5.5], [-6.0, 1.5], [-5.0, 3.0]],
        [[2.0, -6.0], [4.5, -4.0], [1.0, -4.5], [2.0, -6.0]],
    ];
    spec.intruders = loops
        .iter()
        .map(|pts| {
            TrajectorySpec::through(
                &pts.iter()
                    .enumerate()
                    .map(|(k, p)| (10.0 * k as f64, [p[0], p[1], HEIGHT]))
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    spec.max_speed = Some(0.5);
    spec.noise.process = ProcessNoise::Acceleration { sigma2: 1.0 };
    spec.agents = initial_positions()
        .iter()
        .map(|&initial| AgentSpec {
            initial,
            gains: GainSpec::scalar(10.0, 5.0, 0.1, 0.8),
        })
        .collect();
    spec
}

/// Three defenders guard the basket against a scripted offense; the ball
/// starts with the middle attacker and is passed to the right wing at 15 s.
fn basketball() -> ScenarioSpec {
    let offense: [[[f64; 2]; 4]; 3] = [
        [[-4.0, 8.0], [-3.0, 5.5], [-5.0, 6.0], [-4.0, 7.0]],
        [[0.0, 9.0], [1.0, 6.5], [-1.0, 7.0], [0.5, 6.0]],
        [[4.0, 8.0], [3.0, 5.5], [5.0, 6.5], [4.0, 7.0]],
    ];
    let intruders: Vec<TrajectorySpec> = offense
        .iter()
        .map(|pts| {
            TrajectorySpec::through(
                &pts.iter()
                    .enumerate()
                    .map(|(k, p)| (10.0 * k as f64, [p[0], p[1], HEIGHT]))
                    .collect::<Vec<_>>(),
            )
        })
        .collect();

    let pass_time = 15.0;
    let (holder, receiver) = (&intruders[1], &intruders[2]);
    let at = |tr: &TrajectorySpec, t: f64| {
        let p = tr.sample(t).0;
        Waypoint { t, pos: [p[0], p[1], p[2]] }
    };
    let mut waypoints: Vec<Waypoint> = [0.0, 10.0, pass_time].iter().map(|&t| at(holder, t)).collect();
    waypoints.extend([20.0, 30.0].iter().map(|&t| at(receiver, t)));
    let ball = TrajectorySpec {
        waypoints,
        events: vec![JumpEvent {
            t: pass_time,
            to: at(receiver, pass_time).pos,
        }],
        csv: None,
    };

    ScenarioSpec {
        name: "basketball_demo".into(),
        mode: ScenarioMode::Basketball,
        horizon: HORIZON,
        dt: DT,
        comm_radius: 8.0,
        b_window: 1,
        laziness: 0.0,
        step: preset_step(),
        lambda_agg: 0.5,
        barrier: Barrier::default(),
        tolerance: Tolerance {
            kappa: [0.02, 0.02, 0.02],
            eps_min: [0.1, 0.1, 0.5],
        },
        field: FieldBox {
            lower: [-7.5, 0.0, 0.0],
            upper: [7.5, 14.0, 3.0],
        },
        noise: NoiseSpec {
            process: ProcessNoise::Isotropic { scale: 10.0 },
            meas_var: 1e-4,
            dropout: 0.0,
            sensing_std: 0.0,
        },
        estimator: EstimatorSpec::default(),
        max_speed: Some(1.0),
        basket: Some([0.0, 1.0, HEIGHT]),
        target: ball,
        intruders,
        agents: [[-2.0, 3.0], [0.2, 3.5], [2.0, 3.0]]
            .iter()
            .zip([0.4, 0.4, 0.4])
            .map(|(p, lambda)| AgentSpec {
                initial: [p[0], p[1], HEIGHT],
                gains: GainSpec::scalar(10.0, 5.0, 0.0, lambda),
            })
            .collect(),
        seed: 0,
    }
}
