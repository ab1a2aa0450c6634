//! Planar articulated dynamics of the perching vehicle.
//!
//! The public state is expressed in minimal coordinates: fuselage position
//! and heading, then one fold angle per hinged joint (left chain root to tip,
//! then right chain). Internally the equations of motion are assembled with the
//! system centre of mass as the translational coordinate, which decouples
//! translation from the shape and heading coordinates exactly:
//!
//! ```text
//! M·c̈ = ΣF
//! M_uu(u)·ü = Q_u − h(u, u̇)
//! ```
//!
//! so internal torques can never change the total linear momentum, not even
//! through integration error. Time stepping is semi-implicit Euler.

mod contact;
mod hinge;
pub(crate) mod kinematics;

use nalgebra::{DMatrix, DVector};

pub use contact::{
    capsule_circle, contact_force, normal_component, CapsuleHit, Contact, MaterialParams, Vec2,
    DEFAULT_SLIP_REGULARIZATION,
};
pub use hinge::{hinge_energy, joint_torque};

use crate::model::{ArticulatedModel, BodyId, PoleSpec, Side};
use kinematics::{locate, Kinematics};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("state has {found} coordinates, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite {what} at t = {t}; time step too large for the contact or hinge stiffness")]
    NonFinite { what: &'static str, t: f64 },
    #[error("mass matrix is not positive definite")]
    SingularMassMatrix,
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
}

/// Generalized coordinates `q = [x, y, heading, φ...]`, their rates and time.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl State {
    /// Fuselage at the origin, wings flat, everything at rest.
    pub fn rest(model: &ArticulatedModel) -> Self {
        Self {
            q: vec![0.0; model.dof()],
            v: vec![0.0; model.dof()],
            t: 0.0,
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.q[0], self.q[1])
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::new(self.v[0], self.v[1])
    }

    pub fn heading(&self) -> f64 {
        self.q[2]
    }

    pub fn check(&self, model: &ArticulatedModel) -> Result<(), DynamicsError> {
        let expected = model.dof();
        for found in [self.q.len(), self.v.len()] {
            if found != expected {
                return Err(DynamicsError::DimensionMismatch { expected, found });
            }
        }
        if !self.q.iter().chain(&self.v).all(|x| x.is_finite()) || !self.t.is_finite() {
            return Err(DynamicsError::NonFinite {
                what: "state",
                t: self.t,
            });
        }
        Ok(())
    }

    /// Reflect across the world x axis. Left and right joint blocks swap.
    pub fn mirrored(&self, model: &ArticulatedModel) -> Self {
        let mut out = self.clone();
        for x in [&mut out.q, &mut out.v] {
            x[1] = -x[1];
            x[2] = -x[2];
        }
        let left: Vec<usize> = model.chain(Side::Left).links.iter().filter_map(|l| l.coord).collect();
        let right: Vec<usize> = model.chain(Side::Right).links.iter().filter_map(|l| l.coord).collect();
        for (&l, &r) in left.iter().zip(&right) {
            out.q.swap(l, r);
            out.v.swap(l, r);
        }
        out
    }

    /// Exact byte image of the state, for determinism checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.q
            .iter()
            .chain(&self.v)
            .chain(std::iter::once(&self.t))
            .flat_map(|x| x.to_le_bytes())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointForce {
    pub body: BodyId,
    /// World-frame point of application.
    pub point: Vec2,
    pub force: Vec2,
}

/// Loads applied on top of the passive hinge torques.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExternalLoads {
    pub point_forces: Vec<PointForce>,
    /// One per hinged joint in coordinate order, or empty.
    pub joint_torques: Vec<f64>,
}

/// Mass properties and equations of motion at one configuration.
struct Assembly {
    kin: Kinematics,
    total_mass: f64,
    /// Jacobian of the centre-of-mass offset from the fuselage origin.
    jbar: Vec<Vec2>,
    /// Centre-of-mass offset from the fuselage origin.
    rbar: Vec2,
    /// Velocity-product acceleration of `rbar`.
    abar: Vec2,
    m_uu: DMatrix<f64>,
    bias: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

fn com_geometry(model: &ArticulatedModel, kin: &Kinematics, nu: usize) -> (Vec2, Vec<Vec2>, Vec<Vec<Vec2>>) {
    let mut rbar = Vec2::zeros();
    let mut jbar = vec![Vec2::zeros(); nu];
    let mut jacs = Vec::with_capacity(model.body_count());
    for (i, info) in model.bodies.iter().enumerate() {
        let body = BodyId(i);
        let com = kin.body_com(model, body);
        let mut jac = vec![Vec2::zeros(); nu];
        kin.point_jacobian(model, body, com, &mut jac);
        rbar += com * info.mass;
        for (acc, col) in jbar.iter_mut().zip(&jac) {
            *acc += col * info.mass;
        }
        jacs.push(jac);
    }
    let inv = 1.0 / model.total_mass;
    rbar *= inv;
    jbar.iter_mut().for_each(|c| *c *= inv);
    (rbar, jbar, jacs)
}

impl Assembly {
    fn new(model: &ArticulatedModel, state: &State) -> Result<Self, DynamicsError> {
        state.check(model)?;
        let kin = Kinematics::new(model, state);
        let nu = model.dof() - 2;
        let (rbar, jbar, jacs) = com_geometry(model, &kin, nu);

        let mut m_uu = DMatrix::<f64>::zeros(nu, nu);
        let mut bias = DVector::<f64>::zeros(nu);
        let mut abar = Vec2::zeros();
        let mut rel = vec![Vec2::zeros(); nu];
        let mut ang = vec![0.0; nu];
        for (i, info) in model.bodies.iter().enumerate() {
            let body = BodyId(i);
            for ((r, j), jb) in rel.iter_mut().zip(&jacs[i]).zip(&jbar) {
                *r = j - jb;
            }
            kin.angle_jacobian(model, body, &mut ang);
            let a = kin.axis_point_bias(body, model, info.com_offset);
            abar += a * info.mass;
            for row in 0..nu {
                bias[row] += info.mass * rel[row].dot(&a);
                for col in row..nu {
                    m_uu[(row, col)] += info.mass * rel[row].dot(&rel[col]) + info.inertia * ang[row] * ang[col];
                }
            }
        }
        for row in 0..nu {
            for col in 0..row {
                m_uu[(row, col)] = m_uu[(col, row)];
            }
        }
        abar /= model.total_mass;
        let chol = m_uu.clone().cholesky().ok_or(DynamicsError::SingularMassMatrix)?;
        Ok(Self {
            kin,
            total_mass: model.total_mass,
            jbar,
            rbar,
            abar,
            m_uu,
            bias,
            chol,
        })
    }

    fn nu(&self) -> usize {
        self.jbar.len()
    }

    /// Jacobian of a world point on `body` relative to the centre of mass
    /// (the translational columns are the identity and omitted).
    fn relative_jacobian(&self, model: &ArticulatedModel, body: BodyId, world_point: Vec2) -> Vec<Vec2> {
        let mut jac = vec![Vec2::zeros(); self.nu()];
        self.kin.point_jacobian(model, body, world_point - self.kin.base, &mut jac);
        for (c, b) in jac.iter_mut().zip(&self.jbar) {
            *c -= b;
        }
        jac
    }

    fn passive_torques(&self, model: &ArticulatedModel, state: &State, q_u: &mut DVector<f64>) {
        for chain in &model.chains {
            for link in &chain.links {
                if let Some(c) = link.coord {
                    q_u[c - 2] += joint_torque(&link.hinge, state.q[c], state.v[c]);
                }
            }
        }
    }

    fn apply_force(&self, model: &ArticulatedModel, f: &PointForce, q_c: &mut Vec2, q_u: &mut DVector<f64>) {
        *q_c += f.force;
        let jac = self.relative_jacobian(model, f.body, f.point);
        for (q, col) in q_u.iter_mut().zip(&jac) {
            *q += col.dot(&f.force);
        }
    }

    /// Inverse effective mass of a point along `direction`.
    fn inverse_effective_mass(&self, rel_jac: &[Vec2], direction: Vec2) -> f64 {
        let g = DVector::from_iterator(rel_jac.len(), rel_jac.iter().map(|c| c.dot(&direction)));
        let x = self.chol.solve(&g);
        direction.norm_squared() / self.total_mass + g.dot(&x)
    }

    fn solve(&self, q_c: Vec2, q_u: &DVector<f64>) -> (Vec2, DVector<f64>) {
        let rhs = q_u - &self.bias;
        (q_c / self.total_mass, self.chol.solve(&rhs))
    }

    /// Fuselage-origin acceleration from centre-of-mass and internal
    /// accelerations.
    fn base_acceleration(&self, com_acc: Vec2, u_acc: &DVector<f64>) -> Vec2 {
        let shape = self
            .jbar
            .iter()
            .zip(u_acc.iter())
            .fold(self.abar, |acc, (c, a)| acc + c * *a);
        com_acc - shape
    }

    fn com_velocity(&self, state: &State) -> Vec2 {
        self.jbar
            .iter()
            .zip(&state.v[2..])
            .fold(state.velocity(), |acc, (c, r)| acc + c * *r)
    }
}

fn detect_with(model: &ArticulatedModel, kin: &Kinematics, state: &State, pole: &PoleSpec) -> Vec<Contact> {
    let nu = model.dof() - 2;
    let mut jac = vec![Vec2::zeros(); nu];
    let mut contacts = Vec::new();
    let mut push = |body: BodyId, a: Vec2, b: Vec2, radius: f64, jac: &mut Vec<Vec2>| {
        if let Some(hit) = capsule_circle(kin.base + a, kin.base + b, radius, pole.radius) {
            let point = hit.axis_point - hit.normal * radius;
            kin.point_jacobian(model, body, point - kin.base, jac);
            contacts.push(Contact {
                body,
                point,
                normal: hit.normal,
                penetration: hit.penetration,
                relative_velocity: kin.point_velocity(jac, &state.v),
            });
        }
    };
    push(BodyId::FUSELAGE, Vec2::zeros(), Vec2::zeros(), model.fuselage.half_width, &mut jac);
    for side in Side::BOTH {
        for (link, pose) in model.chain(side).links.iter().zip(&kin.links[side.index()]) {
            push(link.body, pose.hinge, pose.end, link.half_thickness, &mut jac);
        }
    }
    contacts
}

/// All bodies whose collision shape touches or overlaps the pole, fuselage
/// first, then left and right segments root to tip.
pub fn detect_contacts(model: &ArticulatedModel, state: &State, pole: &PoleSpec) -> Vec<Contact> {
    let kin = Kinematics::new(model, state);
    detect_with(model, &kin, state, pole)
}

/// Generalized accelerations (same layout as `State::v`) under the passive
/// hinge torques plus `loads`.
pub fn forward_dynamics(
    model: &ArticulatedModel,
    state: &State,
    loads: &ExternalLoads,
) -> Result<Vec<f64>, DynamicsError> {
    let asm = Assembly::new(model, state)?;
    let mut q_c = Vec2::zeros();
    let mut q_u = DVector::zeros(asm.nu());
    asm.passive_torques(model, state, &mut q_u);
    for (i, tau) in loads.joint_torques.iter().enumerate() {
        q_u[1 + i] += tau;
    }
    for f in &loads.point_forces {
        asm.apply_force(model, f, &mut q_c, &mut q_u);
    }
    let (com_acc, u_acc) = asm.solve(q_c, &q_u);
    let base = asm.base_acceleration(com_acc, &u_acc);
    let mut out = Vec::with_capacity(model.dof());
    out.extend([base.x, base.y]);
    out.extend(u_acc.iter());
    if out.iter().any(|a| !a.is_finite()) {
        return Err(DynamicsError::NonFinite {
            what: "acceleration",
            t: state.t,
        });
    }
    Ok(out)
}

/// Mass matrix in the state's coordinates (fuselage position, heading,
/// joints).
pub fn mass_matrix(model: &ArticulatedModel, state: &State) -> Result<DMatrix<f64>, DynamicsError> {
    let asm = Assembly::new(model, state)?;
    let n = model.dof();
    let m = asm.total_mass;
    let mut out = DMatrix::zeros(n, n);
    out[(0, 0)] = m;
    out[(1, 1)] = m;
    for (i, ji) in asm.jbar.iter().enumerate() {
        out[(0, i + 2)] = m * ji.x;
        out[(1, i + 2)] = m * ji.y;
        out[(i + 2, 0)] = m * ji.x;
        out[(i + 2, 1)] = m * ji.y;
        for (j, jj) in asm.jbar.iter().enumerate() {
            out[(i + 2, j + 2)] = asm.m_uu[(i, j)] + m * ji.dot(jj);
        }
    }
    Ok(out)
}

/// A contact active during a step together with the force it applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppliedContact {
    pub contact: Contact,
    pub force: Vec2,
}

impl AppliedContact {
    pub fn normal_force(&self) -> f64 {
        normal_component(&self.contact, &self.force)
    }
}

#[derive(Debug, Clone)]
pub struct StepReport {
    pub state: State,
    /// Contacts detected at the start of the step.
    pub contacts: Vec<AppliedContact>,
}

/// Advance one semi-implicit Euler step: rates from the accelerations at the
/// current state, then positions from the new rates.
pub fn step(
    model: &ArticulatedModel,
    state: &State,
    dt: f64,
    pole: &PoleSpec,
    material: &MaterialParams,
) -> Result<State, DynamicsError> {
    step_report(model, state, dt, pole, material).map(|r| r.state)
}

/// [`step`], also returning the contacts and forces that acted.
pub fn step_report(
    model: &ArticulatedModel,
    state: &State,
    dt: f64,
    pole: &PoleSpec,
    material: &MaterialParams,
) -> Result<StepReport, DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::InvalidTimeStep(dt));
    }
    let asm = Assembly::new(model, state)?;
    let contacts = detect_with(model, &asm.kin, state, pole);

    let mut q_c = Vec2::zeros();
    let mut q_u = DVector::zeros(asm.nu());
    asm.passive_torques(model, state, &mut q_u);

    let mut applied = Vec::with_capacity(contacts.len());
    for contact in contacts {
        let rel_jac = asm.relative_jacobian(model, contact.body, contact.point);
        // Explicit friction with a 1 mm/s regularization overshoots on light
        // links; widen the regularization so one step can at most stop the
        // slip of this contact.
        let normal = (material.normal_stiffness * contact.penetration
            + material.normal_damping * contact.approach_speed())
        .max(0.0);
        let w_t = asm.inverse_effective_mass(&rel_jac, contact.tangent());
        let mut local = *material;
        local.slip_regularization_velocity = material
            .slip_regularization_velocity
            .max(2.0 * material.friction_mu * normal * w_t * dt);
        let force = contact_force(&contact, &local);
        q_c += force;
        for (q, col) in q_u.iter_mut().zip(&rel_jac) {
            *q += col.dot(&force);
        }
        applied.push(AppliedContact { contact, force });
    }

    let (com_acc, u_acc) = asm.solve(q_c, &q_u);

    let com = state.position() + asm.rbar;
    let com_vel = asm.com_velocity(state) + com_acc * dt;
    let com_next = com + com_vel * dt;

    let n = model.dof();
    let mut next = State {
        q: vec![0.0; n],
        v: vec![0.0; n],
        t: state.t + dt,
    };
    for i in 2..n {
        let rate = state.v[i] + u_acc[i - 2] * dt;
        next.v[i] = rate;
        next.q[i] = state.q[i] + rate * dt;
    }

    // Back to fuselage coordinates at the new configuration.
    let kin = Kinematics::new(model, &next);
    let (rbar, jbar, _) = com_geometry(model, &kin, n - 2);
    let base = com_next - rbar;
    let base_vel = jbar
        .iter()
        .zip(&next.v[2..])
        .fold(com_vel, |acc, (c, r)| acc - c * *r);
    next.q[0] = base.x;
    next.q[1] = base.y;
    next.v[0] = base_vel.x;
    next.v[1] = base_vel.y;

    if !next.q.iter().chain(&next.v).all(|x| x.is_finite()) {
        return Err(DynamicsError::NonFinite {
            what: "state",
            t: next.t,
        });
    }
    Ok(StepReport {
        state: next,
        contacts: applied,
    })
}

/// Kinetic energy from body velocities.
pub fn kinetic_energy(model: &ArticulatedModel, state: &State) -> f64 {
    let kin = Kinematics::new(model, state);
    let nu = model.dof() - 2;
    let mut jac = vec![Vec2::zeros(); nu];
    model
        .bodies
        .iter()
        .enumerate()
        .map(|(i, info)| {
            let body = BodyId(i);
            let com = kin.body_com(model, body);
            kin.point_jacobian(model, body, com, &mut jac);
            let v = kin.point_velocity(&jac, &state.v);
            let w = kin.body_omega(model, body);
            0.5 * info.mass * v.norm_squared() + 0.5 * info.inertia * w * w
        })
        .sum()
}

/// Elastic energy stored in all hinges.
pub fn hinge_elastic_energy(model: &ArticulatedModel, state: &State) -> f64 {
    model
        .chains
        .iter()
        .flat_map(|c| &c.links)
        .filter_map(|l| l.coord.map(|c| hinge_energy(&l.hinge, state.q[c])))
        .sum()
}

/// Kinetic + hinge elastic + contact penalty energy. There is no in-plane
/// gravity.
pub fn total_energy(
    model: &ArticulatedModel,
    state: &State,
    pole: &PoleSpec,
    material: &MaterialParams,
) -> f64 {
    let contact: f64 = detect_contacts(model, state, pole)
        .iter()
        .map(|c| c.elastic_energy(material))
        .sum();
    kinetic_energy(model, state) + hinge_elastic_energy(model, state) + contact
}

/// System centre of mass, world frame.
pub fn center_of_mass(model: &ArticulatedModel, state: &State) -> Vec2 {
    let kin = Kinematics::new(model, state);
    let (rbar, _, _) = com_geometry(model, &kin, model.dof() - 2);
    state.position() + rbar
}

/// Total linear momentum.
pub fn linear_momentum(model: &ArticulatedModel, state: &State) -> Vec2 {
    let kin = Kinematics::new(model, state);
    let (_, jbar, _) = com_geometry(model, &kin, model.dof() - 2);
    let v = jbar
        .iter()
        .zip(&state.v[2..])
        .fold(state.velocity(), |acc, (c, r)| acc + c * *r);
    v * model.total_mass
}

/// World positions of a chain's joints followed by its tip, root first.
pub fn chain_points(model: &ArticulatedModel, state: &State, side: Side) -> Vec<Vec2> {
    let kin = Kinematics::new(model, state);
    let poses = &kin.links[side.index()];
    let mut points: Vec<Vec2> = poses.iter().map(|p| kin.base + p.hinge).collect();
    if let Some(last) = poses.last() {
        points.push(kin.base + last.end);
    }
    points
}

/// World position and velocity of a chain's tip.
pub fn tip_motion(model: &ArticulatedModel, state: &State, side: Side) -> (Vec2, Vec2) {
    let kin = Kinematics::new(model, state);
    let chain = model.chain(side);
    let pose = kin.links[side.index()].last().expect("chains are never empty");
    let mut jac = vec![Vec2::zeros(); model.dof() - 2];
    kin.point_jacobian(model, chain.tip().body, pose.end, &mut jac);
    (kin.base + pose.end, kin.point_velocity(&jac, &state.v))
}

/// Whole-vehicle quantities sampled once per step by the trial runner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub com: Vec2,
    pub com_velocity: Vec2,
    pub kinetic_energy: f64,
    /// Position and velocity of the left and right tips.
    pub tips: [(Vec2, Vec2); 2],
}

pub fn observe(model: &ArticulatedModel, state: &State) -> Observation {
    let kin = Kinematics::new(model, state);
    let nu = model.dof() - 2;
    let mut jac = vec![Vec2::zeros(); nu];
    let mut com = Vec2::zeros();
    let mut momentum = Vec2::zeros();
    let mut kinetic_energy = 0.0;
    for (i, info) in model.bodies.iter().enumerate() {
        let body = BodyId(i);
        let c = kin.body_com(model, body);
        kin.point_jacobian(model, body, c, &mut jac);
        let v = kin.point_velocity(&jac, &state.v);
        let w = kin.body_omega(model, body);
        com += c * info.mass;
        momentum += v * info.mass;
        kinetic_energy += 0.5 * info.mass * v.norm_squared() + 0.5 * info.inertia * w * w;
    }
    let tips = Side::BOTH.map(|side| {
        let chain = model.chain(side);
        let pose = kin.links[side.index()].last().expect("chains are never empty");
        kin.point_jacobian(model, chain.tip().body, pose.end, &mut jac);
        (kin.base + pose.end, kin.point_velocity(&jac, &state.v))
    });
    Observation {
        com: kin.base + com / model.total_mass,
        com_velocity: momentum / model.total_mass,
        kinetic_energy,
        tips,
    }
}

/// Body that owns a given hinged coordinate, if any.
pub fn body_of_coordinate(model: &ArticulatedModel, coord: usize) -> Option<BodyId> {
    model
        .chains
        .iter()
        .flat_map(|c| &c.links)
        .find(|l| l.coord == Some(coord))
        .map(|l| l.body)
}

#[doc(hidden)]
pub fn locate_body(model: &ArticulatedModel, body: BodyId) -> Option<(Side, usize)> {
    locate(model, body)
}
