use crate::model::HingeSpec;

/// Passive torque of a one-way hinge, positive in the fold direction.
///
/// The free side (`0 ≤ φ ≤ max_fold_angle`) is a weak spring-damper towards
/// flat. Folding backwards, or past the face-contact angle, adds a stiff
/// penalty spring on the excess.
pub fn joint_torque(hinge: &HingeSpec, angle: f64, rate: f64) -> f64 {
    let mut torque = -hinge.free_stiffness * angle - hinge.free_damping * rate;
    if angle < 0.0 {
        torque -= hinge.block_stiffness * angle;
    } else if angle > hinge.max_fold_angle {
        torque -= hinge.block_stiffness * (angle - hinge.max_fold_angle);
    }
    torque
}

/// Elastic energy stored in the hinge springs.
pub fn hinge_energy(hinge: &HingeSpec, angle: f64) -> f64 {
    let mut energy = 0.5 * hinge.free_stiffness * angle * angle;
    if angle < 0.0 {
        energy += 0.5 * hinge.block_stiffness * angle * angle;
    } else if angle > hinge.max_fold_angle {
        let excess = angle - hinge.max_fold_angle;
        energy += 0.5 * hinge.block_stiffness * excess * excess;
    }
    energy
}
