//! Physical description of the vehicle and pole, and the articulated body tree
//! built from it.
//!
//! The vehicle is a fuselage with two chains of hinged wing segments. Each
//! chain hangs off the fuselage at a lateral offset of `fuselage_half_width`;
//! every joint folds forward (towards the heading) freely and resists folding
//! backwards through a stiff penalty spring.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Most segments a single wing may carry.
pub const MAX_SEGMENTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentSpec {
    /// Spanwise length, meters.
    pub length: f64,
    /// Kilograms.
    pub mass: f64,
    /// Radius of the segment's collision capsule, meters.
    pub half_thickness: f64,
}

impl Default for SegmentSpec {
    fn default() -> Self {
        Self {
            length: 0.15,
            mass: 0.02,
            half_thickness: 0.01,
        }
    }
}

/// Lumped hinge between two wing segments (or between the fuselage and the
/// first segment).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HingeSpec {
    /// Elastic restoring stiffness on the free (wrap) side, N·m/rad.
    pub free_stiffness: f64,
    /// Viscous damping, N·m·s/rad.
    pub free_damping: f64,
    /// Penalty stiffness against folding the wrong way or past
    /// `max_fold_angle`, N·m/rad.
    pub block_stiffness: f64,
    /// Fold angle at which neighbouring segment faces touch, radians.
    pub max_fold_angle: f64,
}

impl Default for HingeSpec {
    fn default() -> Self {
        // Soft, lossy silicone: wrapping is limited by damping, and a wrapped
        // wing relaxes over tens of seconds rather than springing open.
        Self {
            free_stiffness: 0.002,
            free_damping: 0.06,
            block_stiffness: 50.0,
            max_fold_angle: 2.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WingSpec {
    /// Root to tip.
    pub segments: Vec<SegmentSpec>,
    /// One per joint, root joint first.
    pub hinges: Vec<HingeSpec>,
    /// Weld the root joint to the fuselage.
    pub root_rigid: bool,
}

impl WingSpec {
    pub fn uniform(count: usize, segment: SegmentSpec, hinge: HingeSpec) -> Self {
        Self {
            segments: vec![segment; count],
            hinges: vec![hinge; count],
            root_rigid: false,
        }
    }

    pub fn span(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    pub fn mass(&self) -> f64 {
        self.segments.iter().map(|s| s.mass).sum()
    }
}

impl Default for WingSpec {
    fn default() -> Self {
        Self::uniform(4, SegmentSpec::default(), HingeSpec::default())
    }
}

/// A fixed vertical pole; in the wrap plane it is a circle at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoleSpec {
    pub radius: f64,
    pub friction_mu: f64,
    /// Penalty stiffness, N/m.
    pub normal_stiffness: f64,
    /// N·s/m.
    pub normal_damping: f64,
}

impl Default for PoleSpec {
    fn default() -> Self {
        Self {
            // 12 cm diameter test pole.
            radius: 0.06,
            friction_mu: 0.6,
            normal_stiffness: 1.0e5,
            normal_damping: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleSpec {
    pub fuselage_mass: f64,
    /// Collision radius of the fuselage and lateral offset of the wing roots.
    pub fuselage_half_width: f64,
    pub left_wing: WingSpec,
    pub right_wing: WingSpec,
    /// Point mass added at each wingtip, as a fraction of the baseline vehicle
    /// mass, split equally between the two tips.
    pub tip_mass_fraction: f64,
}

impl Default for VehicleSpec {
    fn default() -> Self {
        Self {
            fuselage_mass: 0.2,
            fuselage_half_width: 0.04,
            left_wing: WingSpec::default(),
            right_wing: WingSpec::default(),
            tip_mass_fraction: 0.0,
        }
    }
}

impl VehicleSpec {
    pub fn with_tip_mass_fraction(mut self, fraction: f64) -> Self {
        self.tip_mass_fraction = fraction;
        self
    }

    /// Mass before any tip mass is added.
    pub fn baseline_mass(&self) -> f64 {
        self.fuselage_mass + self.left_wing.mass() + self.right_wing.mass()
    }

    /// Distance from the fuselage centre to the furthest wingtip, including
    /// the tip capsule.
    pub fn half_wingspan(&self) -> f64 {
        let reach = |w: &WingSpec| {
            w.span() + w.segments.last().map_or(0.0, |s| s.half_thickness)
        };
        self.fuselage_half_width + reach(&self.left_wing).max(reach(&self.right_wing))
    }
}

/// A single violated invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub rule: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.path, self.rule)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }

    fn check(&mut self, ok: bool, path: impl Into<String>, rule: &str) {
        if !ok {
            self.issues.push(Issue {
                path: path.into(),
                rule: rule.to_string(),
            });
        }
    }

    fn finite(&mut self, value: f64, path: &str) -> bool {
        self.check(value.is_finite(), path, "must be finite");
        value.is_finite()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

fn validate_wing(report: &mut ValidationReport, wing: &WingSpec, path: &str) {
    let n = wing.segments.len();
    report.check(n >= 1, format!("{path}.segments"), "must contain at least 1 segment");
    report.check(
        n <= MAX_SEGMENTS,
        format!("{path}.segments"),
        "must contain at most 16 segments",
    );
    report.check(
        wing.hinges.len() == n,
        format!("{path}.hinges"),
        "must have one hinge per segment",
    );
    for (i, s) in wing.segments.iter().enumerate() {
        let p = format!("{path}.segments[{i}]");
        if report.finite(s.length, &format!("{p}.length")) {
            report.check(s.length > 0.0, format!("{p}.length"), "must be > 0");
        }
        if report.finite(s.mass, &format!("{p}.mass")) {
            report.check(s.mass > 0.0, format!("{p}.mass"), "must be > 0");
        }
        if report.finite(s.half_thickness, &format!("{p}.half_thickness")) {
            report.check(
                s.half_thickness >= 0.0,
                format!("{p}.half_thickness"),
                "must be >= 0",
            );
        }
    }
    for (i, h) in wing.hinges.iter().enumerate() {
        let p = format!("{path}.hinges[{i}]");
        let all_finite = [
            (h.free_stiffness, "free_stiffness"),
            (h.free_damping, "free_damping"),
            (h.block_stiffness, "block_stiffness"),
            (h.max_fold_angle, "max_fold_angle"),
        ]
        .iter()
        .fold(true, |acc, (v, name)| report.finite(*v, &format!("{p}.{name}")) && acc);
        if !all_finite {
            continue;
        }
        report.check(h.free_stiffness >= 0.0, format!("{p}.free_stiffness"), "must be >= 0");
        report.check(h.free_damping >= 0.0, format!("{p}.free_damping"), "must be >= 0");
        report.check(
            h.block_stiffness >= 0.0,
            format!("{p}.block_stiffness"),
            "must be >= 0",
        );
        report.check(
            h.block_stiffness >= 100.0 * h.free_stiffness,
            format!("{p}.block_stiffness"),
            "must be >= 100 x free_stiffness",
        );
        report.check(
            h.max_fold_angle > 0.0 && h.max_fold_angle < std::f64::consts::PI,
            format!("{p}.max_fold_angle"),
            "must lie in (0, pi)",
        );
    }
}

pub fn validate_vehicle(vehicle: &VehicleSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    if report.finite(vehicle.fuselage_mass, "VehicleSpec.fuselage_mass") {
        report.check(vehicle.fuselage_mass > 0.0, "VehicleSpec.fuselage_mass", "must be > 0");
    }
    if report.finite(vehicle.fuselage_half_width, "VehicleSpec.fuselage_half_width") {
        report.check(
            vehicle.fuselage_half_width >= 0.0,
            "VehicleSpec.fuselage_half_width",
            "must be >= 0",
        );
    }
    if report.finite(vehicle.tip_mass_fraction, "VehicleSpec.tip_mass_fraction") {
        report.check(
            (0.0..1.0).contains(&vehicle.tip_mass_fraction),
            "VehicleSpec.tip_mass_fraction",
            "must lie in [0, 1)",
        );
    }
    validate_wing(&mut report, &vehicle.left_wing, "VehicleSpec.left_wing");
    validate_wing(&mut report, &vehicle.right_wing, "VehicleSpec.right_wing");
    report.check(
        vehicle.left_wing.segments.len() == vehicle.right_wing.segments.len(),
        "VehicleSpec.right_wing.segments",
        "must have as many segments as left_wing",
    );
    report
}

pub fn validate_pole(pole: &PoleSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    if report.finite(pole.radius, "PoleSpec.radius") {
        report.check(pole.radius > 0.0, "PoleSpec.radius", "must be > 0");
    }
    if report.finite(pole.friction_mu, "PoleSpec.friction_mu") {
        report.check(pole.friction_mu >= 0.0, "PoleSpec.friction_mu", "must be >= 0");
    }
    if report.finite(pole.normal_stiffness, "PoleSpec.normal_stiffness") {
        report.check(pole.normal_stiffness > 0.0, "PoleSpec.normal_stiffness", "must be > 0");
    }
    if report.finite(pole.normal_damping, "PoleSpec.normal_damping") {
        report.check(pole.normal_damping >= 0.0, "PoleSpec.normal_damping", "must be >= 0");
    }
    report
}

/// Check every type invariant of the vehicle and the pole. An empty issue list
/// means the pair can be built and simulated.
pub fn validate_spec(vehicle: &VehicleSpec, pole: &PoleSpec) -> ValidationReport {
    let mut report = validate_vehicle(vehicle);
    report.issues.extend(validate_pole(pole).issues);
    report
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid vehicle spec: {0}")]
pub struct ModelError(pub ValidationReport);

/// Which side of the fuselage a chain hangs from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    /// Lateral direction of the root in the body frame (+1 is body +y).
    pub fn lateral(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    /// World-frame rotation sense of a positive fold. Folding forward turns the
    /// left wing clockwise and the right wing counter-clockwise.
    pub fn fold_sense(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// Index into [`ArticulatedModel::bodies`]. Body 0 is the fuselage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BodyId(pub usize);

impl BodyId {
    pub const FUSELAGE: BodyId = BodyId(0);
}

/// A rigid wing segment as seen by the dynamics, tip mass already merged.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub body: BodyId,
    pub length: f64,
    pub mass: f64,
    /// Centre of mass along the segment axis, measured from the inboard joint.
    pub com_offset: f64,
    /// Planar inertia about the link's own centre of mass.
    pub inertia: f64,
    pub half_thickness: f64,
    pub hinge: HingeSpec,
    /// Index of this joint's angle in the generalized coordinates, `None`
    /// when the joint is welded.
    pub coord: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub side: Side,
    pub links: Vec<Link>,
}

impl Chain {
    pub fn tip(&self) -> &Link {
        self.links.last().expect("chains are never empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fuselage {
    pub mass: f64,
    pub inertia: f64,
    pub half_width: f64,
}

/// Per-body mass summary, in body-id order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyInfo {
    pub mass: f64,
    pub com_offset: f64,
    pub inertia: f64,
}

/// Body tree used by the dynamics: a floating fuselage carrying two serial
/// chains. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticulatedModel {
    pub fuselage: Fuselage,
    /// Left chain first.
    pub chains: [Chain; 2],
    pub bodies: Vec<BodyInfo>,
    pub total_mass: f64,
    pub baseline_mass: f64,
    /// Point mass merged into each tip segment.
    pub tip_mass: f64,
    pub tip_mass_fraction: f64,
    /// Number of hinged (non-welded) joints.
    pub joint_count: usize,
}

impl ArticulatedModel {
    /// Generalized coordinate count: base pose plus hinged joints.
    pub fn dof(&self) -> usize {
        3 + self.joint_count
    }

    pub fn chain(&self, side: Side) -> &Chain {
        &self.chains[side.index()]
    }

    pub fn body_count(&self) -> usize {
        self.bodies.len()
    }

    /// Half-width of the vehicle measured from the fuselage centre, including
    /// contact capsules.
    pub fn reach(&self) -> f64 {
        let chain_reach = |c: &Chain| {
            c.links.iter().map(|l| l.length).sum::<f64>() + c.tip().half_thickness
        };
        self.fuselage.half_width
            + chain_reach(&self.chains[0]).max(chain_reach(&self.chains[1]))
    }

    /// Inertia of a chain's tip link about the chain root with the wing laid
    /// straight (parallel-axis sum).
    pub fn tip_inertia_about_root(&self, side: Side) -> f64 {
        let chain = self.chain(side);
        let inboard: f64 = chain.links[..chain.links.len() - 1]
            .iter()
            .map(|l| l.length)
            .sum();
        let tip = chain.tip();
        let r = inboard + tip.com_offset;
        tip.inertia + tip.mass * r * r
    }
}

/// Mass and inertia of a uniform rod with a point mass at its outboard end,
/// about the combined centre. Returns `(com_offset, inertia)`.
pub fn rod_with_end_mass(length: f64, mass: f64, end_mass: f64) -> (f64, f64) {
    let total = mass + end_mass;
    let com = (mass * 0.5 * length + end_mass * length) / total;
    let rod_offset = 0.5 * length - com;
    let end_offset = length - com;
    let inertia = mass * length * length / 12.0
        + mass * rod_offset * rod_offset
        + end_mass * end_offset * end_offset;
    (com, inertia)
}

fn build_chain(
    side: Side,
    wing: &WingSpec,
    tip_mass: f64,
    next_body: &mut usize,
    next_coord: &mut usize,
) -> Chain {
    let n = wing.segments.len();
    let links = wing
        .segments
        .iter()
        .zip(&wing.hinges)
        .enumerate()
        .map(|(i, (seg, hinge))| {
            let end_mass = if i + 1 == n { tip_mass } else { 0.0 };
            let (com_offset, inertia) = rod_with_end_mass(seg.length, seg.mass, end_mass);
            let coord = if i == 0 && wing.root_rigid {
                None
            } else {
                let c = *next_coord;
                *next_coord += 1;
                Some(c)
            };
            let body = BodyId(*next_body);
            *next_body += 1;
            Link {
                body,
                length: seg.length,
                mass: seg.mass + end_mass,
                com_offset,
                inertia,
                half_thickness: seg.half_thickness,
                hinge: *hinge,
                coord,
            }
        })
        .collect();
    Chain { side, links }
}

/// Build the articulated body tree for a validated vehicle.
pub fn build_model(vehicle: &VehicleSpec) -> Result<ArticulatedModel, ModelError> {
    let report = validate_vehicle(vehicle);
    if !report.is_ok() {
        return Err(ModelError(report));
    }
    let baseline_mass = vehicle.baseline_mass();
    let tip_mass = 0.5 * vehicle.tip_mass_fraction * baseline_mass;

    let hw = vehicle.fuselage_half_width;
    let fuselage = Fuselage {
        mass: vehicle.fuselage_mass,
        // Solid disc over the collision circle; a point fuselage still needs
        // a non-zero inertia.
        inertia: 0.5 * vehicle.fuselage_mass * hw.max(1e-3).powi(2),
        half_width: hw,
    };

    let mut next_body = 1;
    let mut next_coord = 3;
    let left = build_chain(Side::Left, &vehicle.left_wing, tip_mass, &mut next_body, &mut next_coord);
    let right = build_chain(
        Side::Right,
        &vehicle.right_wing,
        tip_mass,
        &mut next_body,
        &mut next_coord,
    );

    let mut bodies = vec![BodyInfo {
        mass: fuselage.mass,
        com_offset: 0.0,
        inertia: fuselage.inertia,
    }];
    bodies.extend(left.links.iter().chain(&right.links).map(|l| BodyInfo {
        mass: l.mass,
        com_offset: l.com_offset,
        inertia: l.inertia,
    }));
    let total_mass = bodies.iter().map(|b| b.mass).sum();

    Ok(ArticulatedModel {
        fuselage,
        chains: [left, right],
        bodies,
        total_mass,
        baseline_mass,
        tip_mass,
        tip_mass_fraction: vehicle.tip_mass_fraction,
        joint_count: next_coord - 3,
    })
}
