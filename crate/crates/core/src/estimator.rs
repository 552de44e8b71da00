//! Kalman prediction of intruder and target motion.
//!
//! Both the assigned intruder and the target are modelled as discrete-time
//! double integrators driven by white acceleration noise. Each defender keeps
//! one [`FilterState`] per tracked body and advances them with the predictor
//! form of the filter: the gain `K = F P Hᵀ (H P Hᵀ + R)⁻¹` maps the innovation
//! of the current estimate straight into the one-step-ahead prediction, so the
//! estimate held after a step at time `t` is the prediction for `t + 1`.
//!
//! The predictor step factors exactly as a Joseph-form measurement update
//! (gain `L = P Hᵀ (H P Hᵀ + R)⁻¹`, with `K = F L`) followed by a time update;
//! [`correct`] and [`predict`] expose those two halves.

use nalgebra::{DMatrix, SMatrix, SVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Mat3, Result, Vec3};

pub type Vec6 = SVector<f64, 6>;
pub type Mat6 = SMatrix<f64, 6, 6>;
pub type Mat6x3 = SMatrix<f64, 6, 3>;
pub type Mat3x6 = SMatrix<f64, 3, 6>;

const SYMMETRY_TOL: f64 = 1e-9;

/// Constant-velocity model `ξ⁺ = F ξ + G a`, `z = H ξ + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicModel {
    dt: f64,
    process_cov: Mat6,
    meas_cov: Mat3,
}

impl KinematicModel {
    pub fn new(dt: f64, process_cov: Mat6, meas_cov: Mat3) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Input(format!("time step must be positive, got {dt}")));
        }
        check_psd(&process_cov, "process covariance")?;
        check_psd(&meas_cov, "measurement covariance")?;
        Ok(Self {
            dt,
            process_cov,
            meas_cov,
        })
    }

    /// Process covariance `S = G Gᵀ σ²` induced by acceleration noise of variance `sigma2`.
    pub fn with_acceleration_noise(dt: f64, sigma2: f64, meas_cov: Mat3) -> Result<Self> {
        if sigma2.is_nan() || sigma2 < 0.0 {
            return Err(Error::Input(format!("acceleration variance must be >= 0, got {sigma2}")));
        }
        let g = input_map(dt);
        Self::new(dt, g * g.transpose() * sigma2, meas_cov)
    }

    /// Process covariance `S = scale · I6`.
    pub fn with_isotropic_noise(dt: f64, scale: f64, meas_cov: Mat3) -> Result<Self> {
        Self::new(dt, Mat6::identity() * scale, meas_cov)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn process_cov(&self) -> &Mat6 {
        &self.process_cov
    }

    pub fn meas_cov(&self) -> &Mat3 {
        &self.meas_cov
    }

    /// `F = [[I, dt I], [0, I]]`.
    pub fn transition(&self) -> Mat6 {
        let mut f = Mat6::identity();
        for k in 0..3 {
            f[(k, k + 3)] = self.dt;
        }
        f
    }

    /// `G = [0; dt I]`.
    pub fn input_map(&self) -> Mat6x3 {
        input_map(self.dt)
    }

    /// `H = [I, 0]`.
    pub fn observation(&self) -> Mat3x6 {
        observation()
    }
}

fn input_map(dt: f64) -> Mat6x3 {
    let mut g = Mat6x3::zeros();
    for k in 0..3 {
        g[(k + 3, k)] = dt;
    }
    g
}

fn observation() -> Mat3x6 {
    let mut h = Mat3x6::zeros();
    for k in 0..3 {
        h[(k, k)] = 1.0;
    }
    h
}

fn check_psd<const D: usize>(m: &SMatrix<f64, D, D>, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input(format!("{what} has non-finite entries")));
    }
    if (m - m.transpose()).amax() > SYMMETRY_TOL {
        return Err(Error::Input(format!("{what} is not symmetric")));
    }
    let min_eig = min_eigenvalue(m);
    if min_eig < -SYMMETRY_TOL {
        return Err(Error::Input(format!(
            "{what} is not positive semidefinite (min eigenvalue {min_eig:e})"
        )));
    }
    Ok(())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue<const D: usize>(m: &SMatrix<f64, D, D>) -> f64 {
    DMatrix::from_iterator(D, D, m.iter().copied())
        .symmetric_eigenvalues()
        .min()
}

/// Estimate of one body's `(position, velocity)` and its covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub xi: Vec6,
    pub cov: Mat6,
}

impl FilterState {
    /// Position taken from a measurement, velocity zero, covariance `p0 · I6`.
    pub fn from_position(position: Vec3, p0: f64) -> Self {
        let mut xi = Vec6::zeros();
        xi.fixed_rows_mut::<3>(0).copy_from(&position);
        Self {
            xi,
            cov: Mat6::identity() * p0,
        }
    }

    pub fn position(&self) -> Vec3 {
        observation() * self.xi
    }

    pub fn velocity(&self) -> Vec3 {
        self.xi.fixed_rows::<3>(3).into_owned()
    }
}

/// Time update: `ξ' = F ξ`, `P' = F P Fᵀ + S`.
pub fn predict(state: &FilterState, model: &KinematicModel) -> FilterState {
    let f = model.transition();
    FilterState {
        xi: f * state.xi,
        cov: f * state.cov * f.transpose() + model.process_cov,
    }
}

fn innovation_inverse(cov: &Mat6, model: &KinematicModel) -> Result<Mat3> {
    let h = model.observation();
    let innov = h * cov * h.transpose() + model.meas_cov;
    innov
        .try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Numerical("innovation covariance H P Hᵀ + R is singular".into()))
}

/// Predictor gain `K = F P Hᵀ (H P Hᵀ + R)⁻¹`.
pub fn gain(cov: &Mat6, model: &KinematicModel) -> Result<Mat6x3> {
    Ok(model.transition() * filter_gain(cov, model)?)
}

/// Measurement-update gain `L = P Hᵀ (H P Hᵀ + R)⁻¹`; `gain = F · filter_gain`.
pub fn filter_gain(cov: &Mat6, model: &KinematicModel) -> Result<Mat6x3> {
    let inv = innovation_inverse(cov, model)?;
    Ok(cov * model.observation().transpose() * inv)
}

/// Joseph-form measurement update with the supplied gain:
/// `ξ' = ξ + K (z − H ξ)`, `P' = (I − K H) P (I − K H)ᵀ + K R Kᵀ`.
pub fn correct(state: &FilterState, z: &Vec3, gain: &Mat6x3, model: &KinematicModel) -> FilterState {
    let h = model.observation();
    let a = Mat6::identity() - gain * h;
    FilterState {
        xi: state.xi + gain * (z - h * state.xi),
        cov: a * state.cov * a.transpose() + gain * model.meas_cov * gain.transpose(),
    }
}

/// One predictor-form step with an explicit gain:
/// `ξ' = (F − K H) ξ + K z`, `P' = (F − K H) P (F − K H)ᵀ + K R Kᵀ + S`.
pub fn compact_step(state: &FilterState, z: &Vec3, gain: &Mat6x3, model: &KinematicModel) -> FilterState {
    let a = model.transition() - gain * model.observation();
    FilterState {
        xi: a * state.xi + gain * z,
        cov: a * state.cov * a.transpose()
            + gain * model.meas_cov * gain.transpose()
            + model.process_cov,
    }
}

/// Per-defender filter bank: one block for the assigned intruder, one for the
/// target. The blocks never share covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedFilter {
    pub intruder: FilterState,
    pub target: FilterState,
    pub intruder_model: KinematicModel,
    pub target_model: KinematicModel,
}

impl StackedFilter {
    pub fn new(
        intruder: FilterState,
        target: FilterState,
        intruder_model: KinematicModel,
        target_model: KinematicModel,
    ) -> Self {
        Self {
            intruder,
            target,
            intruder_model,
            target_model,
        }
    }

    /// Gains for both blocks at the current covariance.
    pub fn gains(&self) -> Result<(Mat6x3, Mat6x3)> {
        Ok((
            gain(&self.intruder.cov, &self.intruder_model)?,
            gain(&self.target.cov, &self.target_model)?,
        ))
    }

    /// Predictor step with gains recomputed from the current covariances.
    pub fn step(&self, z: &Vec6) -> Result<Self> {
        let (ki, kt) = self.gains()?;
        Ok(self.step_with_gains(z, &ki, &kt))
    }

    pub fn step_with_gains(&self, z: &Vec6, intruder_gain: &Mat6x3, target_gain: &Mat6x3) -> Self {
        let (zi, zt) = split(z);
        Self {
            intruder: compact_step(&self.intruder, &zi, intruder_gain, &self.intruder_model),
            target: compact_step(&self.target, &zt, target_gain, &self.target_model),
            ..self.clone()
        }
    }

    /// Time update only, used when the measurement is missing.
    pub fn predict_only(&self) -> Self {
        Self {
            intruder: predict(&self.intruder, &self.intruder_model),
            target: predict(&self.target, &self.target_model),
            ..self.clone()
        }
    }

    /// Measurement update only: the filtered estimate of the current time.
    pub fn corrected(&self, z: &Vec6) -> Result<Self> {
        let (zi, zt) = split(z);
        let li = filter_gain(&self.intruder.cov, &self.intruder_model)?;
        let lt = filter_gain(&self.target.cov, &self.target_model)?;
        Ok(Self {
            intruder: correct(&self.intruder, &zi, &li, &self.intruder_model),
            target: correct(&self.target, &zt, &lt, &self.target_model),
            ..self.clone()
        })
    }

    /// Stacked 12-dim state `col(ξ_intruder, ξ_target)`.
    pub fn stacked_state(&self) -> SVector<f64, 12> {
        let mut out = SVector::<f64, 12>::zeros();
        out.fixed_rows_mut::<6>(0).copy_from(&self.intruder.xi);
        out.fixed_rows_mut::<6>(6).copy_from(&self.target.xi);
        out
    }

    /// Block-diagonal 12×12 covariance.
    pub fn stacked_covariance(&self) -> SMatrix<f64, 12, 12> {
        let mut out = SMatrix::<f64, 12, 12>::zeros();
        out.fixed_view_mut::<6, 6>(0, 0).copy_from(&self.intruder.cov);
        out.fixed_view_mut::<6, 6>(6, 6).copy_from(&self.target.cov);
        out
    }

    pub fn covariance_trace(&self) -> f64 {
        self.intruder.cov.trace() + self.target.cov.trace()
    }
}

fn split(z: &Vec6) -> (Vec3, Vec3) {
    (z.fixed_rows::<3>(0).into_owned(), z.fixed_rows::<3>(3).into_owned())
}

/// Predictor step on the stacked filter: `ξ̂' = (F̄ − K H̄) ξ̂ + K z`.
pub fn kf_step_compact(filter: &StackedFilter, z: &Vec6) -> Result<StackedFilter> {
    filter.step(z)
}

/// `(p̂, b̂) = (H ξ̂_intruder, H ξ̂_target)`.
pub fn position_estimate(filter: &StackedFilter) -> (Vec3, Vec3) {
    (filter.intruder.position(), filter.target.position())
}

/// Gaussian measurement noise for one defender: square roots of the intruder
/// and target covariances plus a dropout probability.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementNoise {
    intruder_sqrt: Mat3,
    target_sqrt: Mat3,
    dropout: f64,
}

impl MeasurementNoise {
    pub fn new(intruder_cov: &Mat3, target_cov: &Mat3, dropout: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&dropout) {
            return Err(Error::Input(format!("dropout probability must lie in [0,1], got {dropout}")));
        }
        check_psd(intruder_cov, "intruder measurement covariance")?;
        check_psd(target_cov, "target measurement covariance")?;
        Ok(Self {
            intruder_sqrt: psd_sqrt(intruder_cov),
            target_sqrt: psd_sqrt(target_cov),
            dropout,
        })
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }
}

/// Symmetric square root; tolerates semidefinite input.
fn psd_sqrt(m: &Mat3) -> Mat3 {
    let eig = SymmetricEigen::new(*m);
    let d = Mat3::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Draws `z = (p + w, b + w')` for one defender, or `None` on dropout.
///
/// Six normals are always drawn from `noise_rng` so the noise sequence does not
/// depend on dropout outcomes.
pub fn measure<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    intruder: &Vec3,
    target: &Vec3,
    noise: &MeasurementNoise,
    noise_rng: &mut R1,
    dropout_rng: &mut R2,
) -> Option<Vec6> {
    let wi = Vec3::from_fn(|_, _| noise_rng.sample::<f64, _>(StandardNormal));
    let wt = Vec3::from_fn(|_, _| noise_rng.sample::<f64, _>(StandardNormal));
    let missing = noise.dropout > 0.0 && dropout_rng.random::<f64>() < noise.dropout;
    if missing {
        return None;
    }
    let zi = intruder + noise.intruder_sqrt * wi;
    let zt = target + noise.target_sqrt * wt;
    let mut z = Vec6::zeros();
    z.fixed_rows_mut::<3>(0).copy_from(&zi);
    z.fixed_rows_mut::<3>(3).copy_from(&zt);
    Some(z)
}
