//! Experiment configuration document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{MaterialParams, DEFAULT_SLIP_REGULARIZATION};
use crate::model::{validate_spec, PoleSpec, VehicleSpec};
use crate::trial::{SimParams, SweepPlan, TrialConditions};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialSection {
    /// Slip speed below which friction ramps linearly to zero, m/s.
    pub slip_regularization_velocity: f64,
}

impl Default for MaterialSection {
    fn default() -> Self {
        Self {
            slip_regularization_velocity: DEFAULT_SLIP_REGULARIZATION,
        }
    }
}

/// The single toss run by the `trial` subcommand. The tip-mass fraction
/// comes from the vehicle section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrialSection {
    pub impact_speed: f64,
    pub lateral_offset: f64,
    pub approach_angle: f64,
    pub start_distance: f64,
}

impl Default for TrialSection {
    fn default() -> Self {
        let c = TrialConditions::head_on(3.0);
        Self {
            impact_speed: c.impact_speed,
            lateral_offset: c.lateral_offset,
            approach_angle: c.approach_angle,
            start_distance: c.start_distance,
        }
    }
}

impl TrialSection {
    pub fn conditions(&self, seed: u64) -> TrialConditions {
        TrialConditions {
            impact_speed: self.impact_speed,
            lateral_offset: self.lateral_offset,
            approach_angle: self.approach_angle,
            start_distance: self.start_distance,
            seed,
        }
    }
}

/// Everything an experiment needs. Only `master_seed` is mandatory; every
/// other key falls back to the calibrated defaults. Unknown keys are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    /// Default output directory; `--out` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub vehicle: VehicleSpec,
    #[serde(default)]
    pub pole: PoleSpec,
    #[serde(default)]
    pub material: MaterialSection,
    #[serde(default)]
    pub solver: SimParams,
    #[serde(default)]
    pub plan: SweepPlan,
    #[serde(default)]
    pub trial: TrialSection,
}

impl ExperimentConfig {
    pub fn with_seed(master_seed: u64) -> Self {
        Self {
            master_seed,
            output_dir: None,
            vehicle: VehicleSpec::default(),
            pole: PoleSpec::default(),
            material: MaterialSection::default(),
            solver: SimParams::default(),
            plan: SweepPlan::default(),
            trial: TrialSection::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises to TOML")
    }

    pub fn material(&self) -> MaterialParams {
        MaterialParams::from_pole(&self.pole, self.material.slip_regularization_velocity)
    }

    /// Every problem with the document, one per line.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut problems = Vec::new();
        if self.master_seed > i64::MAX as u64 {
            problems.push(format!("master_seed must be <= {}, got {}", i64::MAX, self.master_seed));
        }
        let report = validate_spec(&self.vehicle, &self.pole);
        problems.extend(report.issues.iter().map(|i| i.to_string()));
        let v_reg = self.material.slip_regularization_velocity;
        if !(v_reg > 0.0 && v_reg.is_finite()) {
            problems.push(format!(
                "MaterialParams.slip_regularization_velocity must be > 0, got {v_reg}"
            ));
        }
        let s = &self.solver;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            problems.push(format!("SimParams.dt must be > 0, got {}", s.dt));
        } else if !(s.timeout > s.dt) {
            problems.push(format!("SimParams.timeout must exceed dt, got {}", s.timeout));
        }
        for (value, name) in [
            (s.settle_energy, "settle_energy"),
            (s.settle_hold, "settle_hold"),
            (s.wrap_threshold, "wrap_threshold"),
            (s.contact_margin, "contact_margin"),
            (s.tip_collision_factor, "tip_collision_factor"),
            (s.tip_closing_speed, "tip_closing_speed"),
            (s.overlap_epsilon, "overlap_epsilon"),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                problems.push(format!("SimParams.{name} must be finite and >= 0, got {value}"));
            }
        }
        if let Err(e) = self.plan.validate() {
            problems.push(format!("SweepPlan: {e}"));
        }
        let search = &self.plan.search;
        if !(search.v_lo > 0.0 && search.v_hi > search.v_lo && search.tol > 0.0) {
            problems.push(format!(
                "SweepPlan.search must satisfy 0 < v_lo < v_hi and tol > 0, got [{}, {}] tol {}",
                search.v_lo, search.v_hi, search.tol
            ));
        }
        let reach = self.vehicle.half_wingspan() + self.pole.radius;
        for (start, name) in [
            (self.plan.distribution.start_distance, "SweepPlan.distribution.start_distance"),
            (self.trial.start_distance, "TrialSection.start_distance"),
        ] {
            if !(start > reach) {
                problems.push(format!(
                    "{name} must exceed pole radius + half wingspan ({reach:.4} m), got {start}"
                ));
            }
        }
        if !(self.trial.impact_speed > 0.0 && self.trial.impact_speed.is_finite()) {
            problems.push(format!(
                "TrialSection.impact_speed must be > 0, got {}",
                self.trial.impact_speed
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Validation(problems.join("\n")))
        }
    }

    /// SHA-256 of the canonical JSON form (keys sorted), so the hash does
    /// not depend on how the source document ordered its fields.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serialises to JSON");
        let canonical = serde_json::to_string(&value).expect("JSON value serialises");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
