//! Static check of whether friction along the pole axis can carry the
//! vehicle's weight once it has wrapped.

use serde::{Deserialize, Serialize};

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Relative slack when comparing capacity with weight, so a grip computed as
/// exactly `required_normal_force` is not lost to rounding.
const ROUNDING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HoldError {
    #[error("frictionless hold impossible")]
    Frictionless,
    #[error("invalid grip: {0}")]
    InvalidGrip(String),
}

/// Total normal force needed so that `μ·ΣN = m·g`.
pub fn required_normal_force(vehicle_mass: f64, friction_mu: f64) -> Result<f64, HoldError> {
    if friction_mu <= 0.0 {
        return Err(HoldError::Frictionless);
    }
    Ok(vehicle_mass * STANDARD_GRAVITY / friction_mu)
}

/// Capstan tension ratio `e^(μθ)` of a band wrapped `theta` around a
/// cylinder.
pub fn capstan_tension_ratio(theta: f64, friction_mu: f64) -> f64 {
    (friction_mu * theta).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripState {
    /// Normal forces of the pole contacts, N.
    pub normal_forces: Vec<f64>,
    /// Sum of both wings' wrap angles, rad.
    pub total_wrap: f64,
    pub friction_mu: f64,
    pub vehicle_mass: f64,
    pub gravity: f64,
}

impl GripState {
    pub fn new(normal_forces: Vec<f64>, total_wrap: f64, friction_mu: f64, vehicle_mass: f64) -> Self {
        Self {
            normal_forces,
            total_wrap,
            friction_mu,
            vehicle_mass,
            gravity: STANDARD_GRAVITY,
        }
    }

    pub fn validate(&self) -> Result<(), HoldError> {
        if self.normal_forces.iter().any(|n| !(*n >= 0.0 && n.is_finite())) {
            return Err(HoldError::InvalidGrip("normal forces must be finite and >= 0".into()));
        }
        if !(self.total_wrap >= 0.0) {
            return Err(HoldError::InvalidGrip("total wrap must be >= 0".into()));
        }
        if !(self.friction_mu >= 0.0 && self.vehicle_mass >= 0.0 && self.gravity >= 0.0) {
            return Err(HoldError::InvalidGrip("mu, mass and gravity must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoldReport {
    /// Axial friction the contacts can supply, N.
    pub capacity: f64,
    /// Weight to be carried, N.
    pub required: f64,
    pub holds: bool,
    /// `capacity / required`; infinite when nothing needs carrying.
    pub margin: f64,
}

/// Compare the friction available from the contact normal forces with the
/// vehicle's weight.
pub fn slide_check(grip: &GripState) -> HoldReport {
    let capacity = grip.friction_mu * grip.normal_forces.iter().sum::<f64>();
    let required = grip.vehicle_mass * grip.gravity;
    let margin = if required > 0.0 {
        capacity / required
    } else {
        f64::INFINITY
    };
    HoldReport {
        capacity,
        required,
        holds: capacity >= required * (1.0 - ROUNDING_SLACK),
        margin,
    }
}
