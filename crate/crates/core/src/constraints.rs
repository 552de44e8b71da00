//! Per-defender feasible boxes.
//!
//! On every axis the defender must sit between its intruder and the anchor
//! (target or basket), keeping a margin `ε_c` from the intruder that grows
//! quadratically with the intruder–anchor separation. The band is intersected
//! with the field box. Projection onto the result is a component-wise clamp.

use serde::{Deserialize, Serialize};

use crate::{ensure_finite, Error, Result, Vec3};

/// Axis-aligned operating region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldBox {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
}

impl FieldBox {
    pub fn new(lower: [f64; 3], upper: [f64; 3]) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for c in 0..3 {
            if !(self.lower[c].is_finite() && self.upper[c].is_finite()) || self.lower[c] > self.upper[c] {
                return Err(Error::Config(format!(
                    "field box axis {c}: [{}, {}] is not a valid interval",
                    self.lower[c], self.upper[c]
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|c| self.lower[c] <= p[c] && p[c] <= self.upper[c])
    }

    pub fn center(&self) -> Vec3 {
        Vec3::from_fn(|c, _| 0.5 * (self.lower[c] + self.upper[c]))
    }
}

/// Feasible box of one defender for one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibleBox {
    pub lower: Vec3,
    pub upper: Vec3,
    /// Axes whose interval was empty and got collapsed to a singleton.
    pub repaired: [bool; 3],
}

impl FeasibleBox {
    pub fn repairs(&self) -> usize {
        self.repaired.iter().filter(|&&r| r).count()
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        (0..3).all(|c| self.lower[c] <= x[c] && x[c] <= self.upper[c])
    }

    pub fn center(&self) -> Vec3 {
        (self.lower + self.upper) / 2.0
    }
}

/// Per-axis margin parameters `κ_c` and `ε_{c,min}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub kappa: [f64; 3],
    pub eps_min: [f64; 3],
}

impl Tolerance {
    pub fn validate(&self) -> Result<()> {
        if self.kappa.iter().chain(&self.eps_min).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("kappa and eps_min must be positive".into()));
        }
        Ok(())
    }
}

/// `ε_c = max(ε_min, κ |p_c − b_c|²)`.
pub fn adaptive_tolerance(p_c: f64, b_c: f64, kappa_c: f64, eps_min_c: f64) -> f64 {
    let d = p_c - b_c;
    eps_min_c.max(kappa_c * d * d)
}

/// Band between intruder `p_hat` and anchor `b_hat`, intersected with `field`.
///
/// An empty axis collapses to the point of the field closest to the anchor
/// coordinate, and the axis is flagged as repaired.
pub fn build_box(p_hat: &Vec3, b_hat: &Vec3, tol: &Tolerance, field: &FieldBox) -> Result<FeasibleBox> {
    ensure_finite(p_hat, "intruder estimate")?;
    ensure_finite(b_hat, "anchor estimate")?;
    let mut lower = Vec3::zeros();
    let mut upper = Vec3::zeros();
    let mut repaired = [false; 3];
    for c in 0..3 {
        let (p, b) = (p_hat[c], b_hat[c]);
        let eps = adaptive_tolerance(p, b, tol.kappa[c], tol.eps_min[c]);
        let (lo, hi) = if p <= b { (p + eps, b) } else { (b, p - eps) };
        let (lo, hi) = (lo.max(field.lower[c]), hi.min(field.upper[c]));
        if lo <= hi {
            lower[c] = lo;
            upper[c] = hi;
        } else {
            let v = b.clamp(field.lower[c], field.upper[c]);
            lower[c] = v;
            upper[c] = v;
            repaired[c] = true;
        }
    }
    Ok(FeasibleBox { lower, upper, repaired })
}

/// Euclidean projection onto the box (component-wise clamp).
pub fn project(x: &Vec3, b: &FeasibleBox) -> Vec3 {
    Vec3::from_fn(|c, _| x[c].clamp(b.lower[c], b.upper[c]))
}
