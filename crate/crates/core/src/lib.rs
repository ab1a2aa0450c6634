//! Planar impact simulation of a fixed-wing UAV whose segmented, one-way
//! hinged wings wrap around a pole, with the experiment machinery to measure
//! perch success rates and minimum perch speeds.

pub mod dynamics;
pub mod harness;
pub mod hold;
pub mod model;
pub mod trial;

pub use dynamics::{Contact, MaterialParams, State};
pub use model::{
    build_model, validate_spec, ArticulatedModel, BodyId, HingeSpec, PoleSpec, SegmentSpec, Side,
    VehicleSpec, WingSpec,
};
pub use hold::{capstan_tension_ratio, required_normal_force, slide_check, GripState, HoldReport};
pub use trial::{
    classify_outcome, min_perch_speed, run_trial, success_rate, wrap_angle, Outcome, SimParams,
    SweepReport, TrialConditions, TrialResult,
};
