//! Penalty contact between the vehicle's bodies and the pole.
//!
//! The pole is the circle of `PoleSpec::radius` centred at the origin. The
//! fuselage is a circle of `fuselage_half_width`, each wing segment a capsule
//! around its axis with radius `half_thickness`.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::model::{BodyId, PoleSpec};

pub type Vec2 = Vector2<f64>;

/// Constitutive parameters for pole contact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    pub normal_stiffness: f64,
    pub normal_damping: f64,
    pub friction_mu: f64,
    /// Slip speed at which friction saturates at the Coulomb limit, m/s.
    pub slip_regularization_velocity: f64,
}

pub const DEFAULT_SLIP_REGULARIZATION: f64 = 1e-3;

impl MaterialParams {
    pub fn from_pole(pole: &PoleSpec, slip_regularization_velocity: f64) -> Self {
        Self {
            normal_stiffness: pole.normal_stiffness,
            normal_damping: pole.normal_damping,
            friction_mu: pole.friction_mu,
            slip_regularization_velocity,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.normal_stiffness >= 0.0
            && self.normal_damping >= 0.0
            && self.friction_mu >= 0.0
            && self.slip_regularization_velocity > 0.0
    }
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self::from_pole(&PoleSpec::default(), DEFAULT_SLIP_REGULARIZATION)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub body: BodyId,
    /// Deepest point of the body's collision shape, world frame.
    pub point: Vec2,
    /// Unit vector from the pole surface towards the body.
    pub normal: Vec2,
    pub penetration: f64,
    /// Velocity of the body's material point at `point` (the pole is fixed).
    pub relative_velocity: Vec2,
}

impl Contact {
    /// Speed at which the body moves into the pole.
    pub fn approach_speed(&self) -> f64 {
        -self.relative_velocity.dot(&self.normal)
    }

    pub fn tangent(&self) -> Vec2 {
        Vec2::new(-self.normal.y, self.normal.x)
    }

    pub fn slip_speed(&self) -> f64 {
        self.relative_velocity.dot(&self.tangent())
    }

    pub fn elastic_energy(&self, material: &MaterialParams) -> f64 {
        0.5 * material.normal_stiffness * self.penetration * self.penetration
    }
}

/// Geometric overlap of a capsule (segment `a`-`b` swept by `capsule_radius`)
/// with the pole circle of `pole_radius` at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapsuleHit {
    /// Closest point on the capsule axis to the pole centre.
    pub axis_point: Vec2,
    pub normal: Vec2,
    pub penetration: f64,
}

pub fn capsule_circle(a: Vec2, b: Vec2, capsule_radius: f64, pole_radius: f64) -> Option<CapsuleHit> {
    let axis = b - a;
    let len2 = axis.norm_squared();
    let t = if len2 > 0.0 {
        (-a.dot(&axis) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let p = a + axis * t;
    let distance = p.norm();
    let reach = pole_radius + capsule_radius;
    if distance > reach {
        return None;
    }
    let normal = if distance > 1e-12 {
        p / distance
    } else if len2 > 0.0 {
        // Axis passes through the centre: push out sideways.
        let u = axis / len2.sqrt();
        Vec2::new(-u.y, u.x)
    } else {
        Vec2::new(1.0, 0.0)
    };
    Some(CapsuleHit {
        axis_point: p,
        normal,
        penetration: (reach - distance).max(0.0),
    })
}

/// Penalty normal force plus regularized Coulomb friction for one contact.
///
/// The normal component is `max(0, k·δ + c·approach)`, so the pole never pulls.
/// Friction opposes slip and reaches `μ·N` once slip exceeds the
/// regularization velocity.
pub fn contact_force(contact: &Contact, material: &MaterialParams) -> Vec2 {
    let normal_force = (material.normal_stiffness * contact.penetration
        + material.normal_damping * contact.approach_speed())
    .max(0.0);
    if normal_force == 0.0 {
        return Vec2::zeros();
    }
    let slip = contact.slip_speed();
    let ratio = (slip / material.slip_regularization_velocity).clamp(-1.0, 1.0);
    let friction = -material.friction_mu * normal_force * ratio;
    contact.normal * normal_force + contact.tangent() * friction
}

/// Normal component of a contact force.
pub fn normal_component(contact: &Contact, force: &Vec2) -> f64 {
    force.dot(&contact.normal)
}
