//! CSV tables, number formatting and the run manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::State;
use crate::hold::{slide_check, GripState};
use crate::model::{ArticulatedModel, Side};
use crate::trial::{SweepRow, TrialResult};

use super::HarnessError;

pub const TRIALS_HEADER: [&str; 13] = [
    "trial_id",
    "tip_mass_fraction",
    "commanded_speed_mps",
    "measured_impact_speed_mps",
    "lateral_offset_m",
    "approach_angle_rad",
    "outcome",
    "wrap_angle_left_rad",
    "wrap_angle_right_rad",
    "settle_time_s",
    "settled",
    "hold_capacity_N",
    "holds",
];

pub const SWEEP_HEADER: [&str; 10] = [
    "tip_mass_fraction",
    "n_trials",
    "successes",
    "success_rate",
    "ci_lo",
    "ci_hi",
    "min_speed_nominal_mps",
    "min_speed_empirical_mps",
    "overlap_share",
    "non_monotone_flag",
];

/// Decimal notation with nine significant digits, trailing zeros removed.
/// Never uses an exponent, so output is identical on every platform.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    // Round to nine significant digits first, then print the exact decimal.
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    let magnitude = rounded.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    let mut s = format!("{rounded:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    s
}

fn optional(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

/// One trial as it appears in `trials.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub tip_mass_fraction: f64,
    pub result: TrialResult,
    pub hold_capacity: f64,
    pub holds: bool,
}

impl TrialRecord {
    pub fn new(trial_id: usize, model: &ArticulatedModel, friction_mu: f64, result: TrialResult) -> Self {
        let grip = GripState::new(
            result.residual_normal_forces.clone(),
            result.wrap_angle_left + result.wrap_angle_right,
            friction_mu,
            model.total_mass,
        );
        let hold = slide_check(&grip);
        Self {
            trial_id,
            tip_mass_fraction: model.tip_mass_fraction,
            result,
            hold_capacity: hold.capacity,
            holds: hold.holds,
        }
    }

    fn fields(&self) -> [String; 13] {
        let r = &self.result;
        let c = &r.conditions;
        [
            self.trial_id.to_string(),
            format_number(self.tip_mass_fraction),
            format_number(c.impact_speed),
            optional(r.measured_impact_speed),
            format_number(c.lateral_offset),
            format_number(c.approach_angle),
            r.outcome.to_string(),
            format_number(r.wrap_angle_left),
            format_number(r.wrap_angle_right),
            format_number(r.settle_time),
            r.settled.to_string(),
            format_number(self.hold_capacity),
            self.holds.to_string(),
        ]
    }
}

fn sweep_fields(row: &SweepRow) -> [String; 10] {
    let has_trials = row.n_trials > 0;
    [
        format_number(row.tip_mass_fraction),
        row.n_trials.to_string(),
        row.successes.to_string(),
        optional(has_trials.then_some(row.success_rate)),
        optional(has_trials.then_some(row.ci_lo)),
        optional(has_trials.then_some(row.ci_hi)),
        optional(row.min_speed_nominal),
        optional(row.min_speed_empirical),
        optional(row.overlap_share),
        row.non_monotone.to_string(),
    ]
}

fn to_csv<const N: usize>(header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn trials_csv(records: &[TrialRecord]) -> Vec<u8> {
    to_csv(TRIALS_HEADER, records.iter().map(TrialRecord::fields))
}

pub fn sweep_csv(rows: &[SweepRow]) -> Vec<u8> {
    to_csv(SWEEP_HEADER, rows.iter().map(sweep_fields))
}

/// Base pose and joint angles of recorded states: `t, x, y, theta`, then
/// `phi_left_1..` root to tip, then `phi_right_1..`.
pub fn trajectory_csv(model: &ArticulatedModel, states: &[State]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string(), "x".into(), "y".into(), "theta".into()];
    for side in Side::BOTH {
        let name = if side == Side::Left { "left" } else { "right" };
        for (i, link) in model.chain(side).links.iter().enumerate() {
            if link.coord.is_some() {
                header.push(format!("phi_{name}_{}", i + 1));
            }
        }
    }
    w.write_record(&header).expect("in-memory write");
    for s in states {
        let row = std::iter::once(s.t)
            .chain(s.q.iter().copied())
            .map(format_number);
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    /// SHA-256 of every output file, by file name.
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write `files` into `dir` together with `manifest.json`.
pub fn emit_reports(
    dir: &Path,
    files: &[(String, Vec<u8>)],
    config_hash: &str,
) -> Result<RunManifest, HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut checksums = BTreeMap::new();
    for (name, bytes) in files {
        let mut f = std::fs::File::create(dir.join(name)).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        checksums.insert(name.clone(), sha256_hex(bytes));
    }
    let manifest = RunManifest {
        config_hash: config_hash.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        files: checksums,
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serialises");
    std::fs::write(dir.join("manifest.json"), json).map_err(io)?;
    Ok(manifest)
}
