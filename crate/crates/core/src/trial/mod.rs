//! A single toss onto the pole: set-up, integration to settle or timeout, and
//! outcome classification. Searches and Monte Carlo aggregation live in the
//! submodules.

mod search;
mod sweep;

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use search::{min_perch_speed, min_perch_speed_with, MinSpeed, SearchError, SpeedSearch};
pub use sweep::{
    jittered_conditions, mass_sweep, mass_sweep_with, run_trials, success_rate, success_rate_with,
    trial_seed, wilson_interval, ConditionDistribution, RateEstimate, SweepError, SweepPlan,
    SweepReport, SweepRow,
};

use crate::dynamics::{
    self, kinematics::Kinematics, observe, step_report, DynamicsError, MaterialParams, State, Vec2,
};
use crate::model::{ArticulatedModel, PoleSpec, Side};

/// Integration and classification settings for a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    /// Fixed time step, s.
    pub dt: f64,
    /// Simulated time limit, s.
    pub timeout: f64,
    /// Kinetic energy below which the vehicle counts as at rest, J.
    pub settle_energy: f64,
    /// How long the vehicle must stay at rest, s.
    pub settle_hold: f64,
    /// Wrap angle each wing must reach for a successful perch, rad.
    pub wrap_threshold: f64,
    /// Distance from a capsule to the pole surface that still counts as
    /// wrapped, m.
    pub contact_margin: f64,
    /// Tip-to-tip distance for a tip collision, as a multiple of the tip
    /// half-thickness.
    pub tip_collision_factor: f64,
    /// Closing speed required for a tip collision, m/s.
    pub tip_closing_speed: f64,
    /// Azimuth overlap of the two wings that counts as overlapped, rad.
    pub overlap_epsilon: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 2e-5,
            timeout: 3.0,
            settle_energy: 1e-4,
            settle_hold: 0.2,
            wrap_threshold: 2.0,
            contact_margin: 0.01,
            tip_collision_factor: 2.0,
            tip_closing_speed: 0.05,
            overlap_epsilon: 0.05,
        }
    }
}

/// Initial conditions of one toss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConditions {
    /// Commanded approach speed, m/s.
    pub impact_speed: f64,
    /// Perpendicular distance of the approach line from the pole centre, m.
    pub lateral_offset: f64,
    /// Heading error of the approach, rad.
    pub approach_angle: f64,
    /// Initial distance of the fuselage from the pole centre along the
    /// approach line, m.
    pub start_distance: f64,
    pub seed: u64,
}

impl TrialConditions {
    pub fn head_on(impact_speed: f64) -> Self {
        Self {
            impact_speed,
            lateral_offset: 0.0,
            approach_angle: 0.0,
            start_distance: 0.8,
            seed: 0,
        }
    }

    pub fn validate(&self, model: &ArticulatedModel, pole: &PoleSpec) -> Result<(), TrialError> {
        if !(self.impact_speed > 0.0 && self.impact_speed.is_finite()) {
            return Err(TrialError::Conditions(format!(
                "impact_speed must be > 0, got {}",
                self.impact_speed
            )));
        }
        if !self.lateral_offset.is_finite() || !self.approach_angle.is_finite() {
            return Err(TrialError::Conditions("offset and angle must be finite".into()));
        }
        let min_start = pole.radius + model.reach();
        if !(self.start_distance > min_start) {
            return Err(TrialError::Conditions(format!(
                "start_distance must exceed pole radius + half wingspan ({min_start:.4} m), got {}",
                self.start_distance
            )));
        }
        Ok(())
    }

    /// Fuselage pose and velocity at the start of the toss: wings flat, moving
    /// along the perturbed heading.
    pub fn initial_state(&self, model: &ArticulatedModel) -> State {
        let (s, c) = self.approach_angle.sin_cos();
        let along = Vec2::new(c, s);
        let across = Vec2::new(-s, c);
        let position = -along * self.start_distance + across * self.lateral_offset;
        let velocity = along * self.impact_speed;
        let mut state = State::rest(model);
        state.q[0] = position.x;
        state.q[1] = position.y;
        state.q[2] = self.approach_angle;
        state.v[0] = velocity.x;
        state.v[1] = velocity.y;
        state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Miss,
    Bounce,
    PartialWrap,
    SuccessTipCollide,
    SuccessTipOverlap,
}

impl Outcome {
    pub fn is_success(self) -> bool {
        matches!(self, Outcome::SuccessTipCollide | Outcome::SuccessTipOverlap)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Miss => "Miss",
            Outcome::Bounce => "Bounce",
            Outcome::PartialWrap => "PartialWrap",
            Outcome::SuccessTipCollide => "SuccessTipCollide",
            Outcome::SuccessTipOverlap => "SuccessTipOverlap",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything the classifier looks at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evidence {
    pub wrap_left: f64,
    pub wrap_right: f64,
    pub tip_event: bool,
    pub ever_contact: bool,
    /// Distance of the centre of mass from the pole centre at the end.
    pub com_distance: f64,
    /// Radial speed of the centre of mass at the end (positive = receding).
    pub com_radial_speed: f64,
    pub start_distance: f64,
}

impl Evidence {
    /// How far the two wings' azimuth ranges overlap on the far side.
    pub fn azimuth_overlap(&self) -> f64 {
        self.wrap_left + self.wrap_right - TAU
    }
}

/// Map the end-of-trial evidence to exactly one outcome.
///
/// Priority: no contact is a miss; both wings past the threshold is a
/// success (a logged tip collision wins over overlap); a vehicle flying off
/// beyond half its start distance bounced; anything else is a partial wrap.
pub fn classify_outcome(evidence: &Evidence, params: &SimParams) -> Outcome {
    if !evidence.ever_contact {
        return Outcome::Miss;
    }
    let threshold = params.wrap_threshold;
    if evidence.wrap_left >= threshold && evidence.wrap_right >= threshold {
        return if evidence.tip_event {
            Outcome::SuccessTipCollide
        } else if evidence.azimuth_overlap() > params.overlap_epsilon {
            Outcome::SuccessTipOverlap
        } else {
            // Tips face each other across a gap without passing.
            Outcome::SuccessTipCollide
        };
    }
    if evidence.com_radial_speed > 0.0 && evidence.com_distance > 0.5 * evidence.start_distance {
        Outcome::Bounce
    } else {
        Outcome::PartialWrap
    }
}

#[inline]
fn wrap_pi(angle: f64) -> f64 {
    let a = (angle + PI).rem_euclid(TAU) - PI;
    if a == -PI {
        PI
    } else {
        a
    }
}

/// Azimuth swept, in direction `sense` (+1 counter-clockwise), walking from
/// `reference` through `points` in order. Each hop takes the short way round,
/// so the total is unwrapped and may exceed π.
pub fn accumulated_azimuth(reference: Vec2, points: &[Vec2], sense: f64) -> f64 {
    let mut prev = reference.y.atan2(reference.x);
    let mut total = 0.0;
    for p in points {
        let az = p.y.atan2(p.x);
        total += sense * wrap_pi(az - prev);
        prev = az;
    }
    total
}

/// Clamp an unwrapped wrap angle into `[0, 2π)`.
pub fn clamp_wrap(angle: f64) -> f64 {
    angle.max(0.0).min(TAU * (1.0 - f64::EPSILON))
}

/// Wrap angle of a chain of points around the pole: azimuth accumulated from
/// `reference` (the fuselage) through every sample to the last one (the
/// tip). Zero unless some sample lies within `reach` of the pole centre.
pub fn wrap_angle_of_points(reference: Vec2, samples: &[Vec2], reach: f64, sense: f64) -> f64 {
    if !samples.iter().any(|p| p.norm() <= reach) {
        return 0.0;
    }
    clamp_wrap(accumulated_azimuth(reference, samples, sense))
}

/// Angle subtended at the pole centre by one wing, from the fuselage azimuth
/// to the wingtip azimuth. The chain is sampled at each joint, at each
/// segment's closest point to the pole and at the tip, so no hop between
/// samples spans more than a half turn. Zero when no segment comes within
/// `contact_margin` of the pole surface.
pub fn wrap_angle(
    model: &ArticulatedModel,
    state: &State,
    side: Side,
    pole: &PoleSpec,
    contact_margin: f64,
) -> f64 {
    let kin = Kinematics::new(model, state);
    let chain = model.chain(side);
    let poses = &kin.links[side.index()];
    let mut samples = Vec::with_capacity(3 * poses.len());
    let mut touching = false;
    for (link, pose) in chain.links.iter().zip(poses) {
        let a = kin.base + pose.hinge;
        let b = kin.base + pose.end;
        let axis = b - a;
        let t = (-a.dot(&axis) / axis.norm_squared()).clamp(0.0, 1.0);
        let closest = a + axis * t;
        touching |= closest.norm() <= pole.radius + link.half_thickness + contact_margin;
        samples.extend([a, closest, b]);
    }
    if !touching {
        return 0.0;
    }
    clamp_wrap(accumulated_azimuth(kin.base, &samples, side.fold_sense()))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrialError {
    #[error("invalid trial conditions: {0}")]
    Conditions(String),
    #[error("invalid simulation parameters: {0}")]
    Params(String),
    #[error("simulation diverged: {0}")]
    Dynamics(#[from] DynamicsError),
}

/// How the integration loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Kinetic energy stayed below threshold for the hold time.
    Settled,
    /// Moving away from the pole with no possible further contact.
    Escaped,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub conditions: TrialConditions,
    pub outcome: Outcome,
    /// Fuselage speed at first contact.
    pub measured_impact_speed: Option<f64>,
    pub wrap_angle_left: f64,
    pub wrap_angle_right: f64,
    /// Largest wrap angles reached at any time during the trial.
    pub peak_wrap: [f64; 2],
    /// Simulated time at which the run stopped.
    pub settle_time: f64,
    pub settled: bool,
    pub termination: Termination,
    pub tip_contact_event: bool,
    pub energy_at_impact: Option<f64>,
    pub energy_at_end: f64,
    /// Normal forces of the pole contacts active in the last step.
    pub residual_normal_forces: Vec<f64>,
    pub final_state: State,
}

impl TrialResult {
    pub fn is_success(&self) -> bool {
        self.outcome.is_success()
    }
}

/// Receives every `stride`-th state of a trial.
pub trait TrialObserver {
    fn stride(&self) -> usize {
        50
    }
    fn record(&mut self, state: &State);
}

struct NoObserver;

impl TrialObserver for NoObserver {
    fn stride(&self) -> usize {
        usize::MAX
    }
    fn record(&mut self, _: &State) {}
}

/// Every recorded state, in order.
#[derive(Debug, Default)]
pub struct TrajectoryRecorder {
    pub stride: usize,
    pub states: Vec<State>,
}

impl TrialObserver for TrajectoryRecorder {
    fn stride(&self) -> usize {
        self.stride.max(1)
    }
    fn record(&mut self, state: &State) {
        self.states.push(state.clone());
    }
}

/// Run one toss to settle, escape or timeout and classify it.
pub fn run_trial(
    model: &ArticulatedModel,
    pole: &PoleSpec,
    material: &MaterialParams,
    conditions: &TrialConditions,
    params: &SimParams,
) -> Result<TrialResult, TrialError> {
    run_trial_observed(model, pole, material, conditions, params, &mut NoObserver)
}

/// [`run_trial`] with a trajectory observer.
pub fn run_trial_observed(
    model: &ArticulatedModel,
    pole: &PoleSpec,
    material: &MaterialParams,
    conditions: &TrialConditions,
    params: &SimParams,
    observer: &mut dyn TrialObserver,
) -> Result<TrialResult, TrialError> {
    conditions.validate(model, pole)?;
    if !(params.dt > 0.0 && params.timeout > params.dt) {
        return Err(TrialError::Params(format!(
            "dt ({}) must be positive and below timeout ({})",
            params.dt, params.timeout
        )));
    }

    let tip_distance = params.tip_collision_factor
        * model.chain(Side::Left).tip().half_thickness.max(model.chain(Side::Right).tip().half_thickness);
    // No contact is possible once the centre of mass is this far out and
    // receding.
    let clear_distance = pole.radius + 2.0 * model.reach() + params.contact_margin;
    let max_steps = (params.timeout / params.dt).ceil() as usize;
    let stride = observer.stride();

    let mut state = conditions.initial_state(model);
    let mut measured_impact_speed = None;
    let mut energy_at_impact = None;
    let mut tip_event = false;
    let mut rest_since: Option<f64> = None;
    let mut residual = Vec::new();
    let mut termination = Termination::Timeout;
    let mut peak_wrap = [0.0f64; 2];
    let mut obs = observe(model, &state);

    for i in 0..max_steps {
        if i % stride == 0 {
            observer.record(&state);
        }
        let report = step_report(model, &state, params.dt, pole, material)?;
        if measured_impact_speed.is_none() && !report.contacts.is_empty() {
            measured_impact_speed = Some(state.velocity().norm());
            energy_at_impact = Some(dynamics::total_energy(model, &state, pole, material));
        }
        residual = report.contacts.iter().map(|c| c.normal_force()).collect();
        state = report.state;
        obs = observe(model, &state);

        if !tip_event {
            let [(pl, vl), (pr, vr)] = obs.tips;
            let gap = pr - pl;
            let distance = gap.norm();
            if distance < tip_distance {
                let closing = if distance > 0.0 {
                    -(vr - vl).dot(&gap) / distance
                } else {
                    (vr - vl).norm()
                };
                tip_event = closing > params.tip_closing_speed;
            }
        }

        if measured_impact_speed.is_some() && i % 100 == 0 {
            for side in Side::BOTH {
                let w = wrap_angle(model, &state, side, pole, params.contact_margin);
                peak_wrap[side.index()] = peak_wrap[side.index()].max(w);
            }
        }

        if obs.kinetic_energy < params.settle_energy {
            let since = *rest_since.get_or_insert(state.t);
            if state.t - since >= params.settle_hold {
                termination = Termination::Settled;
                break;
            }
        } else {
            rest_since = None;
        }

        let distance = obs.com.norm();
        if distance > clear_distance && obs.com_velocity.dot(&obs.com) > 0.0 {
            termination = Termination::Escaped;
            break;
        }
    }
    observer.record(&state);

    let wrap_left = wrap_angle(model, &state, Side::Left, pole, params.contact_margin);
    let wrap_right = wrap_angle(model, &state, Side::Right, pole, params.contact_margin);
    peak_wrap[0] = peak_wrap[0].max(wrap_left);
    peak_wrap[1] = peak_wrap[1].max(wrap_right);
    let com_distance = obs.com.norm();
    let evidence = Evidence {
        wrap_left,
        wrap_right,
        tip_event,
        ever_contact: measured_impact_speed.is_some(),
        com_distance,
        com_radial_speed: if com_distance > 0.0 {
            obs.com_velocity.dot(&obs.com) / com_distance
        } else {
            0.0
        },
        start_distance: conditions.start_distance,
    };

    Ok(TrialResult {
        conditions: *conditions,
        outcome: classify_outcome(&evidence, params),
        measured_impact_speed,
        wrap_angle_left: wrap_left,
        wrap_angle_right: wrap_right,
        peak_wrap,
        settle_time: state.t,
        settled: termination == Termination::Settled,
        termination,
        tip_contact_event: tip_event,
        energy_at_impact,
        energy_at_end: dynamics::total_energy(model, &state, pole, material),
        residual_normal_forces: residual,
        final_state: state,
    })
}
