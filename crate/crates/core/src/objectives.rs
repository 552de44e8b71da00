//! Local defender cost, aggregation map and the partial gradients used by the
//! optimize step.
//!
//! The local cost of defender `i` is
//!
//! ```text
//! f_i(x_i, σ) = ‖x_i − p_ref‖²_Q1 + ‖σ − b_ref‖²_Q2 + ‖σ − x_i‖²_Q3 + Σ_j −log ‖x_i − x_j‖
//! ```
//!
//! where `p_ref` is the defender's tracking point, `b_ref` the point the team
//! barycenter should guard and `j` ranges over the sensed neighbors. In
//! basketball mode the cohesion term `‖σ − x_i‖²_Q3` is absent.

use serde::{Deserialize, Serialize};

use crate::{Error, Mat3, Result, Vec3};

/// Which cost layout and tracking-point convention a scenario uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// Defend a target against intruders; tracking point slides from target to intruder.
    Surveillance,
    /// Defend a basket; tracking point slides from intruder to basket, barycenter
    /// follows a point between basket and ball.
    Basketball,
}

/// Log-barrier collision term and its numerical guards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub enabled: bool,
    /// Distances below this are clamped before taking the logarithm [m].
    pub epsilon: f64,
    /// Per-neighbor cap on the barrier gradient magnitude.
    pub grad_cap: f64,
}

impl Default for Barrier {
    fn default() -> Self {
        Self {
            enabled: true,
            epsilon: 0.05,
            grad_cap: 1e3,
        }
    }
}

impl Barrier {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }
}

/// Weights and tracking parameters of one defender.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGains {
    /// Pull toward the tracking point.
    pub q1: Mat3,
    /// Pull of the barycenter toward `b_ref`.
    pub q2: Mat3,
    /// Cohesion: pull of the defender toward the barycenter.
    pub q3: Mat3,
    pub lambda: f64,
    pub lambda_agg: f64,
    pub barrier: Barrier,
}

impl CostGains {
    /// Isotropic gains `Q1 = γ_p I`, `Q2 = γ_b I`, `Q3 = γ_agg I`.
    pub fn scalar(gamma_p: f64, gamma_b: f64, gamma_agg: f64, lambda: f64, lambda_agg: f64) -> Self {
        Self {
            q1: Mat3::identity() * gamma_p,
            q2: Mat3::identity() * gamma_b,
            q3: Mat3::identity() * gamma_agg,
            lambda,
            lambda_agg,
            barrier: Barrier::default(),
        }
    }

    pub fn with_barrier(mut self, barrier: Barrier) -> Self {
        self.barrier = barrier;
        self
    }

    /// Q1 must be positive definite, Q2 and Q3 positive semidefinite, all
    /// symmetric; λ's within `[0, 1]`; barrier guards positive.
    pub fn validate(&self) -> Result<()> {
        for (name, q, strict) in [("Q1", &self.q1, true), ("Q2", &self.q2, false), ("Q3", &self.q3, false)] {
            if q.iter().any(|v| !v.is_finite()) || (q - q.transpose()).amax() > 1e-12 {
                return Err(Error::Config(format!("{name} must be finite and symmetric")));
            }
            let min = q.symmetric_eigenvalues().min();
            if (strict && min <= 0.0) || min < -1e-12 {
                let kind = if strict { "positive definite" } else { "positive semidefinite" };
                return Err(Error::Config(format!("{name} must be {kind} (min eigenvalue {min})")));
            }
        }
        for (name, l) in [("lambda", self.lambda), ("lambda_agg", self.lambda_agg)] {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::Config(format!("{name} must lie in [0,1], got {l}")));
            }
        }
        if !(self.barrier.epsilon > 0.0 && self.barrier.grad_cap > 0.0) {
            return Err(Error::Config("barrier epsilon and gradient cap must be positive".into()));
        }
        Ok(())
    }
}

/// Reference points and sensed neighbor offsets that instantiate one local
/// cost at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSnapshot {
    pub p_ref: Vec3,
    pub b_ref: Vec3,
    /// `x_i − x_j` for every sensed neighbor `j ≠ i`.
    pub offsets: Vec<Vec3>,
}

impl CostSnapshot {
    /// Snapshot from intruder and target (or ball) positions.
    ///
    /// `basket` is required in basketball mode and ignored otherwise.
    pub fn from_positions(
        mode: CostMode,
        intruder: &Vec3,
        target: &Vec3,
        basket: Option<&Vec3>,
        gains: &CostGains,
        offsets: Vec<Vec3>,
    ) -> Self {
        let (p_ref, b_ref) = match (mode, basket) {
            (CostMode::Basketball, Some(bsk)) => (
                tracking_point(mode, intruder, bsk, gains.lambda),
                aggregate_point(mode, target, bsk, gains.lambda_agg),
            ),
            _ => (
                tracking_point(CostMode::Surveillance, intruder, target, gains.lambda),
                *target,
            ),
        };
        Self { p_ref, b_ref, offsets }
    }

    pub fn with_offsets(&self, offsets: Vec<Vec3>) -> Self {
        Self {
            offsets,
            ..self.clone()
        }
    }
}

/// Aggregation map: identity, so σ is the team barycenter.
pub fn phi(x: &Vec3) -> Vec3 {
    *x
}

/// Jacobian of [`phi`].
pub fn phi_jacobian(_x: &Vec3) -> Mat3 {
    Mat3::identity()
}

/// Mean of `φ(x_i)` over the team.
pub fn sigma(xs: &[Vec3]) -> Result<Vec3> {
    if xs.is_empty() {
        return Err(Error::Input("aggregate of an empty team".into()));
    }
    Ok(xs.iter().map(phi).sum::<Vec3>() / xs.len() as f64)
}

/// Point on the segment between an intruder and the anchor.
///
/// Surveillance: `λ p + (1 − λ) anchor` (anchor = target, λ → 1 presses).
/// Basketball: `λ anchor + (1 − λ) p` (anchor = basket, λ → 1 sags back).
pub fn tracking_point(mode: CostMode, p: &Vec3, anchor: &Vec3, lambda: f64) -> Vec3 {
    match mode {
        CostMode::Surveillance => p * lambda + anchor * (1.0 - lambda),
        CostMode::Basketball => anchor * lambda + p * (1.0 - lambda),
    }
}

/// Point the barycenter is pulled toward. Surveillance: the target itself.
/// Basketball: `(1 − λ_agg) basket + λ_agg ball`.
pub fn aggregate_point(mode: CostMode, target: &Vec3, anchor: &Vec3, lambda_agg: f64) -> Vec3 {
    match mode {
        CostMode::Surveillance => *target,
        CostMode::Basketball => anchor * (1.0 - lambda_agg) + target * lambda_agg,
    }
}

fn quad(v: &Vec3, q: &Mat3) -> f64 {
    v.dot(&(q * v))
}

/// Quadratic part of the local cost.
pub fn eval_quadratic(x: &Vec3, s: &Vec3, snap: &CostSnapshot, gains: &CostGains, mode: CostMode) -> f64 {
    let mut out = quad(&(x - snap.p_ref), &gains.q1) + quad(&(s - snap.b_ref), &gains.q2);
    if mode == CostMode::Surveillance {
        out += quad(&(s - x), &gains.q3);
    }
    out
}

/// `Σ_j −log(max(‖x_i − x_j‖, ε))` over the snapshot's offsets.
pub fn eval_barrier(offsets: &[Vec3], barrier: &Barrier) -> f64 {
    if !barrier.enabled {
        return 0.0;
    }
    offsets
        .iter()
        .map(|d| -d.norm().max(barrier.epsilon).ln())
        .sum()
}

/// Local cost `f_i(x_i, s, offsets)`.
pub fn eval_cost(x: &Vec3, s: &Vec3, snap: &CostSnapshot, gains: &CostGains, mode: CostMode) -> f64 {
    eval_quadratic(x, s, snap, gains, mode) + eval_barrier(&snap.offsets, &gains.barrier)
}

/// Gradient of one barrier summand `−log ‖d‖` with respect to `x_i`, where
/// `d = x_i − x_j`: `−d / max(‖d‖², ε²)`, magnitude capped.
pub fn barrier_summand_grad(d: &Vec3, barrier: &Barrier) -> Vec3 {
    let g = -d / d.norm_squared().max(barrier.epsilon * barrier.epsilon);
    let mag = g.norm();
    if mag > barrier.grad_cap {
        g * (barrier.grad_cap / mag)
    } else {
        g
    }
}

/// `∇₁ f_i`: partial gradient in the defender's own position.
///
/// The barrier enters with factor 2. Each pair `(i, j)` appears in both
/// `f_i` and `f_j`, so this is the `x_i`-block of the gradient of the team
/// cost `Σ_k f_k`, which is what the optimize step descends.
pub fn grad1_cost(x: &Vec3, s: &Vec3, snap: &CostSnapshot, gains: &CostGains, mode: CostMode) -> Vec3 {
    let mut g = 2.0 * gains.q1 * (x - snap.p_ref);
    if mode == CostMode::Surveillance {
        g += 2.0 * gains.q3 * (x - s);
    }
    if gains.barrier.enabled {
        let b: Vec3 = snap
            .offsets
            .iter()
            .map(|d| barrier_summand_grad(d, &gains.barrier))
            .sum();
        g += 2.0 * b;
    }
    g
}

/// `∇₂ f_i`: partial gradient in the aggregate argument. The barrier does not
/// depend on σ.
pub fn grad2_cost(x: &Vec3, s: &Vec3, snap: &CostSnapshot, gains: &CostGains, mode: CostMode) -> Vec3 {
    let mut g = 2.0 * gains.q2 * (s - snap.b_ref);
    if mode == CostMode::Surveillance {
        g += 2.0 * gains.q3 * (s - x);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const MODES: [CostMode; 2] = [CostMode::Surveillance, CostMode::Basketball];

    fn snap(p: Vec3, b: Vec3, offsets: Vec<Vec3>) -> CostSnapshot {
        CostSnapshot { p_ref: p, b_ref: b, offsets }
    }

    fn rand_vec(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
        Vec3::from_fn(|_, _| rng.random_range(-r..r))
    }

    fn rand_spd(rng: &mut ChaCha8Rng) -> Mat3 {
        let a = Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        a * a.transpose() + Mat3::identity() * 0.1
    }

    #[test]
    fn phi_is_identity() {
        assert_eq!(phi(&Vec3::new(1., 2., 3.)), Vec3::new(1., 2., 3.));
        assert_eq!(phi(&Vec3::zeros()), Vec3::zeros());
    }

    #[test]
    fn phi_jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = 1e-5;
        for _ in 0..20 {
            let x = rand_vec(&mut rng, 10.0);
            let mut jac = Mat3::zeros();
            for c in 0..3 {
                let mut e = Vec3::zeros();
                e[c] = h;
                jac.set_column(c, &((phi(&(x + e)) - phi(&(x - e))) / (2.0 * h)));
            }
            assert!((jac - phi_jacobian(&x)).amax() < 1e-8);
        }
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma(&[Vec3::repeat(1.0); 4]).unwrap(), Vec3::repeat(1.0));
        assert_eq!(
            sigma(&[Vec3::new(3., 0., 0.), Vec3::new(-3., 0., 0.)]).unwrap(),
            Vec3::zeros()
        );
        let s = sigma(&[Vec3::new(1., 0., 0.), Vec3::new(0., 2., 0.), Vec3::new(0., 0., 3.)]).unwrap();
        assert!((s - Vec3::new(1.0 / 3.0, 2.0 / 3.0, 1.0)).amax() < 1e-15);
        assert!(matches!(sigma(&[]), Err(Error::Input(_))));
    }

    #[test]
    fn tracking_point_conventions() {
        let p = Vec3::new(4., 2., 1.);
        let b = Vec3::new(0., 0., 1.);
        assert_eq!(tracking_point(CostMode::Surveillance, &p, &b, 1.0), p);
        assert_eq!(tracking_point(CostMode::Surveillance, &p, &b, 0.0), b);
        assert_eq!(
            tracking_point(CostMode::Basketball, &Vec3::new(2., 0., 0.), &Vec3::zeros(), 0.5),
            Vec3::new(1., 0., 0.)
        );
        // reversed convention: λ = 1 sits on the basket
        assert_eq!(tracking_point(CostMode::Basketball, &p, &b, 1.0), b);
        assert_eq!(aggregate_point(CostMode::Basketball, &p, &b, 1.0), p);
        assert_eq!(aggregate_point(CostMode::Surveillance, &p, &b, 0.3), p);
    }

    #[test]
    fn cost_examples() {
        let g = CostGains::scalar(1.0, 1.0, 1.0, 0.5, 0.5);
        let z = Vec3::zeros();
        let x = Vec3::new(1., 2., 3.);
        assert_eq!(eval_cost(&x, &x, &snap(x, x, vec![]), &g, CostMode::Surveillance), 0.0);
        let e1 = Vec3::new(1., 0., 0.);
        assert_eq!(eval_cost(&e1, &z, &snap(z, z, vec![]), &g, CostMode::Surveillance), 2.0);
        // basketball drops the cohesion term
        assert_eq!(eval_cost(&e1, &z, &snap(z, z, vec![]), &g, CostMode::Basketball), 1.0);
        let off = Vec3::new(std::f64::consts::E, 0., 0.);
        assert!((eval_barrier(&[off], &g.barrier) + 1.0).abs() < 1e-15);
        assert_eq!(eval_barrier(&[off], &Barrier::disabled()), 0.0);
    }

    #[test]
    fn barrier_guard_avoids_log_zero() {
        let b = Barrier::default();
        let v = eval_barrier(&[Vec3::zeros()], &b);
        assert!((v + b.epsilon.ln()).abs() < 1e-15);
        let g = barrier_summand_grad(&Vec3::zeros(), &b);
        assert_eq!(g, Vec3::zeros());
        let tiny = Barrier { grad_cap: 1.0, ..b };
        assert!((barrier_summand_grad(&Vec3::new(0.1, 0., 0.), &tiny).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grad1_examples() {
        let g = CostGains::scalar(1.0, 1.0, 1.0, 0.5, 0.5);
        let x = Vec3::new(1., -1., 2.);
        assert_eq!(grad1_cost(&x, &x, &snap(x, x, vec![]), &g, CostMode::Surveillance), Vec3::zeros());
        let only_barrier = CostGains::scalar(1.0, 0.0, 0.0, 0.5, 0.5);
        let grad = grad1_cost(&x, &x, &snap(x, x, vec![Vec3::new(1., 0., 0.)]), &only_barrier, CostMode::Surveillance);
        assert_eq!(grad, Vec3::new(-2., 0., 0.));
    }

    #[test]
    fn grad2_examples() {
        let x = Vec3::new(1., 1., 1.);
        let g = CostGains::scalar(1.0, 1.0, 1.0, 0.5, 0.5);
        assert_eq!(grad2_cost(&x, &x, &snap(x, x, vec![]), &g, CostMode::Surveillance), Vec3::zeros());
        let g = CostGains::scalar(1.0, 1.0, 0.0, 0.5, 0.5);
        let out = grad2_cost(&Vec3::zeros(), &x, &snap(Vec3::zeros(), Vec3::zeros(), vec![]), &g, CostMode::Surveillance);
        assert_eq!(out, Vec3::new(2., 2., 2.));
    }

    /// Potential whose exact gradient the optimize step uses: quadratic part
    /// plus twice the barrier.
    fn algorithm_potential(x: &Vec3, s: &Vec3, sn: &CostSnapshot, g: &CostGains, m: CostMode) -> f64 {
        eval_quadratic(x, s, sn, g, m) + 2.0 * eval_barrier(&sn.offsets, &g.barrier)
    }

    fn central_diff(f: impl Fn(&Vec3) -> f64, at: &Vec3) -> Vec3 {
        let h = 1e-5;
        Vec3::from_fn(|c, _| {
            let mut e = Vec3::zeros();
            e[c] = h;
            (f(&(at + e)) - f(&(at - e))) / (2.0 * h)
        })
    }

    fn rel_err(a: &Vec3, b: &Vec3) -> f64 {
        (a - b).norm() / b.norm().max(1.0)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for mode in MODES {
            let mut checked = 0;
            while checked < 100 {
                let gains = CostGains {
                    q1: rand_spd(&mut rng),
                    q2: rand_spd(&mut rng),
                    q3: rand_spd(&mut rng),
                    lambda: 0.5,
                    lambda_agg: 0.5,
                    barrier: Barrier::default(),
                };
                let x = rand_vec(&mut rng, 5.0);
                let s = rand_vec(&mut rng, 5.0);
                let offsets: Vec<Vec3> = (0..rng.random_range(0..4)).map(|_| rand_vec(&mut rng, 3.0)).collect();
                if offsets.iter().any(|d| d.norm() < 10.0 * gains.barrier.epsilon) {
                    continue;
                }
                let sn = snap(rand_vec(&mut rng, 5.0), rand_vec(&mut rng, 5.0), offsets.clone());
                let g1 = grad1_cost(&x, &s, &sn, &gains, mode);
                let fd1 = central_diff(
                    |xx| {
                        // neighbors are fixed in absolute terms: offsets move with x
                        let moved: Vec<Vec3> = offsets.iter().map(|d| d + (xx - x)).collect();
                        algorithm_potential(xx, &s, &sn.with_offsets(moved), &gains, mode)
                    },
                    &x,
                );
                assert!(rel_err(&g1, &fd1) <= 1e-6, "{mode:?} grad1 {g1:?} vs {fd1:?}");
                let g2 = grad2_cost(&x, &s, &sn, &gains, mode);
                let fd2 = central_diff(|ss| eval_cost(&x, ss, &sn, &gains, mode), &s);
                assert!(rel_err(&g2, &fd2) <= 1e-6, "{mode:?} grad2 {g2:?} vs {fd2:?}");
                checked += 1;
            }
        }
    }

    #[test]
    fn quadratic_part_is_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for mode in MODES {
            for _ in 0..1000 {
                let gains = CostGains {
                    q1: rand_spd(&mut rng),
                    q2: rand_spd(&mut rng),
                    q3: rand_spd(&mut rng),
                    lambda: 0.5,
                    lambda_agg: 0.5,
                    barrier: Barrier::default(),
                };
                let sn = snap(rand_vec(&mut rng, 5.0), rand_vec(&mut rng, 5.0), vec![]);
                let (x1, s1, x2, s2) = (
                    rand_vec(&mut rng, 5.0),
                    rand_vec(&mut rng, 5.0),
                    rand_vec(&mut rng, 5.0),
                    rand_vec(&mut rng, 5.0),
                );
                let mid = eval_quadratic(&((x1 + x2) / 2.0), &((s1 + s2) / 2.0), &sn, &gains, mode);
                let avg = (eval_quadratic(&x1, &s1, &sn, &gains, mode) + eval_quadratic(&x2, &s2, &sn, &gains, mode)) / 2.0;
                assert!(mid <= avg + 1e-10);
            }
        }
    }

    #[test]
    fn translation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let gains = CostGains::scalar(3.0, 2.0, 1.0, 0.4, 0.6);
        for mode in MODES {
            for _ in 0..100 {
                let (x, s) = (rand_vec(&mut rng, 5.0), rand_vec(&mut rng, 5.0));
                let offsets = vec![rand_vec(&mut rng, 3.0), rand_vec(&mut rng, 3.0)];
                let sn = snap(rand_vec(&mut rng, 5.0), rand_vec(&mut rng, 5.0), offsets.clone());
                let shift = rand_vec(&mut rng, 100.0);
                // relative offsets are invariant under a common shift
                let shifted = snap(sn.p_ref + shift, sn.b_ref + shift, offsets);
                let (xs, ss) = (x + shift, s + shift);
                let c0 = eval_cost(&x, &s, &sn, &gains, mode);
                let c1 = eval_cost(&xs, &ss, &shifted, &gains, mode);
                assert!((c0 - c1).abs() <= 1e-12 * c0.abs().max(1.0));
                assert!((grad1_cost(&x, &s, &sn, &gains, mode) - grad1_cost(&xs, &ss, &shifted, &gains, mode)).amax() <= 1e-10);
                assert!((grad2_cost(&x, &s, &sn, &gains, mode) - grad2_cost(&xs, &ss, &shifted, &gains, mode)).amax() <= 1e-10);
            }
        }
    }

    #[test]
    fn barrier_gradient_repels() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let b = Barrier::default();
        for _ in 0..1000 {
            let d = rand_vec(&mut rng, 2.0);
            if d.norm() == 0.0 {
                continue;
            }
            // descending the gradient moves x_i away from x_j
            assert!((-barrier_summand_grad(&d, &b)).dot(&d) > 0.0);
        }
    }

    #[test]
    fn gains_validation() {
        assert!(CostGains::scalar(1.0, 0.0, 0.0, 0.5, 0.5).validate().is_ok());
        assert!(CostGains::scalar(0.0, 1.0, 1.0, 0.5, 0.5).validate().is_err());
        assert!(CostGains::scalar(1.0, -1.0, 1.0, 0.5, 0.5).validate().is_err());
        assert!(CostGains::scalar(1.0, 1.0, 1.0, 1.5, 0.5).validate().is_err());
        let mut g = CostGains::scalar(1.0, 1.0, 1.0, 0.5, 0.5);
        g.q1[(0, 1)] = 0.3;
        assert!(g.validate().is_err());
    }
}
