//! Planar forward kinematics and point Jacobians for the fuselage + two
//! chains tree.
//!
//! Positions here are relative to the fuselage origin but expressed in world
//! axes. Jacobian columns are taken with respect to the internal coordinates
//! `u = (heading, joint angles...)`, i.e. state index minus two.

use crate::model::{ArticulatedModel, BodyId, Side};

use super::contact::Vec2;
use super::State;

#[inline]
pub(crate) fn perp(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

#[inline]
pub(crate) fn unit(angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c, s)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LinkPose {
    pub hinge: Vec2,
    pub end: Vec2,
    pub dir: Vec2,
    pub omega: f64,
    pub com: Vec2,
}

#[derive(Debug, Clone)]
pub(crate) struct Kinematics {
    pub base: Vec2,
    pub base_velocity: Vec2,
    pub heading_rate: f64,
    /// Wing root attachment points.
    pub roots: [Vec2; 2],
    pub links: [Vec<LinkPose>; 2],
}

impl Kinematics {
    pub fn new(model: &ArticulatedModel, state: &State) -> Self {
        let q = &state.q;
        let v = &state.v;
        let heading = q[2];
        let heading_rate = v[2];
        let body_y = unit(heading + std::f64::consts::FRAC_PI_2);
        let mut roots = [Vec2::zeros(); 2];
        let links = Side::BOTH.map(|side| {
            let chain = model.chain(side);
            let sense = side.fold_sense();
            let root = body_y * (side.lateral() * model.fuselage.half_width);
            roots[side.index()] = root;
            let mut angle = heading + side.lateral() * std::f64::consts::FRAC_PI_2;
            let mut omega = heading_rate;
            let mut hinge = root;
            chain
                .links
                .iter()
                .map(|link| {
                    if let Some(c) = link.coord {
                        angle += sense * q[c];
                        omega += sense * v[c];
                    }
                    let dir = unit(angle);
                    let pose = LinkPose {
                        hinge,
                        end: hinge + dir * link.length,
                        dir,
                        omega,
                        com: hinge + dir * link.com_offset,
                    };
                    hinge = pose.end;
                    pose
                })
                .collect()
        });
        Self {
            base: Vec2::new(q[0], q[1]),
            base_velocity: Vec2::new(v[0], v[1]),
            heading_rate,
            roots,
            links,
        }
    }

    pub fn link(&self, side: Side, index: usize) -> &LinkPose {
        &self.links[side.index()][index]
    }

    /// Columns of d(point)/du for a point rigidly attached to `body`; `point`
    /// is relative to the fuselage origin.
    pub fn point_jacobian(
        &self,
        model: &ArticulatedModel,
        body: BodyId,
        point: Vec2,
        out: &mut [Vec2],
    ) {
        out.iter_mut().for_each(|c| *c = Vec2::zeros());
        out[0] = perp(point);
        if let Some((side, index)) = locate(model, body) {
            let sense = side.fold_sense();
            let chain = model.chain(side);
            for (link, pose) in chain.links[..=index].iter().zip(&self.links[side.index()]) {
                if let Some(c) = link.coord {
                    out[c - 2] = perp(point - pose.hinge) * sense;
                }
            }
        }
    }

    /// d(body angle)/du.
    pub fn angle_jacobian(&self, model: &ArticulatedModel, body: BodyId, out: &mut [f64]) {
        out.iter_mut().for_each(|c| *c = 0.0);
        out[0] = 1.0;
        if let Some((side, index)) = locate(model, body) {
            let sense = side.fold_sense();
            for link in &model.chain(side).links[..=index] {
                if let Some(c) = link.coord {
                    out[c - 2] = sense;
                }
            }
        }
    }

    /// Velocity-product (centripetal) acceleration of a point on a link's
    /// axis, `along` meters from the link's inboard joint.
    pub fn axis_point_bias(&self, body: BodyId, model: &ArticulatedModel, along: f64) -> Vec2 {
        let Some((side, index)) = locate(model, body) else {
            return Vec2::zeros();
        };
        let poses = &self.links[side.index()];
        let mut acc = -self.roots[side.index()] * (self.heading_rate * self.heading_rate);
        for pose in &poses[..index] {
            acc -= (pose.end - pose.hinge) * (pose.omega * pose.omega);
        }
        let pose = &poses[index];
        acc - pose.dir * (along * pose.omega * pose.omega)
    }

    /// Angular velocity of a body.
    pub fn body_omega(&self, model: &ArticulatedModel, body: BodyId) -> f64 {
        match locate(model, body) {
            None => self.heading_rate,
            Some((side, index)) => self.link(side, index).omega,
        }
    }

    /// Centre of mass of a body relative to the fuselage origin.
    pub fn body_com(&self, model: &ArticulatedModel, body: BodyId) -> Vec2 {
        match locate(model, body) {
            None => Vec2::zeros(),
            Some((side, index)) => self.link(side, index).com,
        }
    }

    /// World velocity of a material point, from its Jacobian.
    pub fn point_velocity(&self, jac: &[Vec2], rates: &[f64]) -> Vec2 {
        jac.iter()
            .zip(&rates[2..])
            .fold(self.base_velocity, |acc, (col, r)| acc + col * *r)
    }
}

/// Chain side and link index of a body; `None` for the fuselage.
pub(crate) fn locate(model: &ArticulatedModel, body: BodyId) -> Option<(Side, usize)> {
    if body.0 == 0 {
        return None;
    }
    let n_left = model.chains[0].links.len();
    if body.0 <= n_left {
        Some((Side::Left, body.0 - 1))
    } else {
        Some((Side::Right, body.0 - 1 - n_left))
    }
}
