//! Per-defender state machine: tracker initialization and the optimize step.
//!
//! One optimize step, with `a_ij` the mixing weights of the current round:
//!
//! ```text
//! x̃  = Π_X[x − α (∇₁ f̂ᵗ(x, s) + ∇φ(x) y)]
//! x⁺ = x + δ (x̃ − x)
//! s⁺ = Σ_j a_ij s_j + φ(x⁺) − φ(x)
//! y⁺ = Σ_j a_ij y_j + ∇₂ f̂ᵗ⁺¹(x⁺, s⁺) − ∇₂ f̂ᵗ(x, s)
//! ```
//!
//! `s` tracks the barycenter σ(x) and `y` tracks the team average of `∇₂ f`.
//! With doubly stochastic weights both network means are conserved exactly.

use serde::{Deserialize, Serialize};

use crate::constraints::{project, FeasibleBox};
use crate::estimator::StackedFilter;
use crate::network::Mailbox;
use crate::objectives::{grad1_cost, grad2_cost, phi, phi_jacobian, CostGains, CostMode, CostSnapshot};
use crate::{Error, Result, Vec3};

/// Which box the feasible-direction step projects onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxTiming {
    /// Box predicted in the same iteration from the fresh estimates.
    #[default]
    Predicted,
    /// Box predicted one iteration earlier (the box for the current time).
    Previous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub alpha: f64,
    pub delta: f64,
    #[serde(default)]
    pub box_timing: BoxTiming,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            delta: 0.4,
            box_timing: BoxTiming::Predicted,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::Config(format!("delta must lie in [0,1], got {}", self.delta)));
        }
        Ok(())
    }
}

/// Private data of one defender.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub x: Vec3,
    /// Projected point of the latest step (equals `x` right after init).
    pub x_tilde: Vec3,
    pub s: Vec3,
    pub y: Vec3,
    pub filter: StackedFilter,
    pub gains: CostGains,
    pub mode: CostMode,
    pub config: StepConfig,
}

/// Places the defender at `x0` (projected into `box0` if needed) and seeds the
/// trackers with `s = φ(x0)`, `y = ∇₂ f⁰(x0, s)`.
#[allow(clippy::too_many_arguments)]
pub fn init_agent(
    id: usize,
    x0: &Vec3,
    box0: &FeasibleBox,
    snapshot0: &CostSnapshot,
    filter: StackedFilter,
    gains: CostGains,
    mode: CostMode,
    config: StepConfig,
) -> Result<AgentState> {
    config.validate()?;
    let x = project(x0, box0);
    let s = phi(&x);
    let y = grad2_cost(&x, &s, snapshot0, &gains, mode);
    Ok(AgentState {
        id,
        x,
        x_tilde: x,
        s,
        y,
        filter,
        gains,
        mode,
        config,
    })
}

impl AgentState {
    pub fn grad2(&self, snapshot: &CostSnapshot) -> Vec3 {
        grad2_cost(&self.x, &self.s, snapshot, &self.gains, self.mode)
    }

    /// Runs one optimize step.
    ///
    /// `weights` is row `i` of the round's mixing matrix; every agent with a
    /// positive weight must have a message in `mailbox`. `snapshot_t` and
    /// `snapshot_next` instantiate `f̂ᵗ` and `f̂ᵗ⁺¹`. `box_t` and `box_next`
    /// are the previous and freshly predicted boxes; [`BoxTiming`] picks one.
    pub fn optimize_step(
        &self,
        mailbox: &Mailbox,
        weights: &[f64],
        snapshot_t: &CostSnapshot,
        snapshot_next: &CostSnapshot,
        box_t: &FeasibleBox,
        box_next: &FeasibleBox,
    ) -> Result<AgentState> {
        let (mut s_mix, mut y_mix) = (Vec3::zeros(), Vec3::zeros());
        for (j, &a) in weights.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let m = mailbox.from_sender(j).ok_or_else(|| {
                Error::Protocol(format!("agent {} has weight {a} for {j} but no message", self.id))
            })?;
            s_mix += a * m.s;
            y_mix += a * m.y;
        }

        let proj_box = match self.config.box_timing {
            BoxTiming::Predicted => box_next,
            BoxTiming::Previous => box_t,
        };
        let direction = grad1_cost(&self.x, &self.s, snapshot_t, &self.gains, self.mode)
            + phi_jacobian(&self.x) * self.y;
        let x_tilde = project(&(self.x - self.config.alpha * direction), proj_box);
        let x_next = self.x + self.config.delta * (x_tilde - self.x);
        let s_next = s_mix + phi(&x_next) - phi(&self.x);
        let y_next = y_mix + grad2_cost(&x_next, &s_next, snapshot_next, &self.gains, self.mode)
            - grad2_cost(&self.x, &self.s, snapshot_t, &self.gains, self.mode);

        Ok(AgentState {
            x: x_next,
            x_tilde,
            s: s_next,
            y: y_next,
            ..self.clone()
        })
    }

    /// The projection box the last step used, given the two candidates.
    pub fn projection_box<'a>(&self, box_t: &'a FeasibleBox, box_next: &'a FeasibleBox) -> &'a FeasibleBox {
        match self.config.box_timing {
            BoxTiming::Predicted => box_next,
            BoxTiming::Previous => box_t,
        }
    }
}
