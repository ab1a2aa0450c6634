//! Monte Carlo success rates and the wingtip-mass sweep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::search::{min_perch_speed, MinSpeed, SearchError, SpeedSearch};
use super::{run_trial, Outcome, SimParams, TrialConditions, TrialError, TrialResult};
use crate::dynamics::MaterialParams;
use crate::model::{build_model, ArticulatedModel, ModelError, PoleSpec, VehicleSpec};

/// 95% two-sided normal quantile.
const Z95: f64 = 1.959963984540054;

/// Seed of the `index`-th draw under `master`: the first eight bytes of
/// SHA-256 over both values, little-endian.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Wilson score interval at 95% for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (centre + half).min(1.0) };
    (lo.min(p), hi.max(p))
}

/// Speed range and hand-toss scatter of a Monte Carlo cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionDistribution {
    pub speed_min: f64,
    pub speed_max: f64,
    /// Half-width of the uniform lateral offset, m.
    pub lateral_offset_jitter: f64,
    /// Half-width of the uniform heading error, rad.
    pub approach_angle_jitter: f64,
    pub start_distance: f64,
}

impl Default for ConditionDistribution {
    fn default() -> Self {
        Self {
            speed_min: 2.0,
            speed_max: 3.5,
            lateral_offset_jitter: 0.02,
            approach_angle_jitter: 5f64.to_radians(),
            start_distance: 0.8,
        }
    }
}

impl ConditionDistribution {
    pub fn validate(&self) -> Result<(), String> {
        let finite = [
            self.speed_min,
            self.speed_max,
            self.lateral_offset_jitter,
            self.approach_angle_jitter,
            self.start_distance,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err("distribution values must be finite".into());
        }
        if !(self.speed_min > 0.0 && self.speed_max >= self.speed_min) {
            return Err(format!(
                "speed range must satisfy 0 < speed_min <= speed_max, got [{}, {}]",
                self.speed_min, self.speed_max
            ));
        }
        if self.lateral_offset_jitter < 0.0 || self.approach_angle_jitter < 0.0 {
            return Err("jitter half-widths must be >= 0".into());
        }
        Ok(())
    }
}

/// Conditions of one jittered toss; the draw order (speed, offset, angle) is
/// fixed so a seed always reproduces the same toss.
pub fn jittered_conditions(dist: &ConditionDistribution, seed: u64) -> TrialConditions {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [u_speed, u_offset, u_angle]: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
    let lateral_offset = dist.lateral_offset_jitter * (2.0 * u_offset - 1.0);
    let approach_angle = dist.approach_angle_jitter * (2.0 * u_angle - 1.0);
    TrialConditions {
        impact_speed: dist.speed_min + (dist.speed_max - dist.speed_min) * u_speed,
        lateral_offset,
        approach_angle,
        start_distance: dist.start_distance,
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub n: usize,
    pub successes: usize,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl RateEstimate {
    pub fn from_counts(successes: usize, n: usize) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(successes, n);
        Self {
            n,
            successes,
            rate: if n == 0 { 0.0 } else { successes as f64 / n as f64 },
            ci_lo,
            ci_hi,
        }
    }
}

/// Success rate of `n` independent draws; draw `i` gets seed
/// `trial_seed(master_seed, i)`. Draws may run in parallel; the result does
/// not depend on scheduling.
pub fn success_rate_with<F, E>(n: usize, master_seed: u64, trial: F) -> Result<RateEstimate, E>
where
    F: Fn(u64, usize) -> Result<bool, E> + Sync,
    E: Send,
{
    let outcomes = (0..n)
        .into_par_iter()
        .map(|i| trial(trial_seed(master_seed, i as u64), i))
        .collect::<Result<Vec<_>, E>>()?;
    Ok(RateEstimate::from_counts(
        outcomes.iter().filter(|s| **s).count(),
        n,
    ))
}

/// Run `n` jittered trials, returned in index order.
pub fn run_trials(
    model: &ArticulatedModel,
    pole: &PoleSpec,
    material: &MaterialParams,
    dist: &ConditionDistribution,
    params: &SimParams,
    n: usize,
    master_seed: u64,
) -> Result<Vec<TrialResult>, TrialError> {
    dist.validate().map_err(TrialError::Conditions)?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let conditions = jittered_conditions(dist, trial_seed(master_seed, i as u64));
            run_trial(model, pole, material, &conditions, params)
        })
        .collect()
}

/// Success rate of the vehicle over `n` jittered tosses, with the trials.
pub fn success_rate(
    model: &ArticulatedModel,
    pole: &PoleSpec,
    material: &MaterialParams,
    dist: &ConditionDistribution,
    params: &SimParams,
    n: usize,
    master_seed: u64,
) -> Result<(RateEstimate, Vec<TrialResult>), TrialError> {
    let trials = run_trials(model, pole, material, dist, params, n, master_seed)?;
    let successes = trials.iter().filter(|t| t.is_success()).count();
    Ok((RateEstimate::from_counts(successes, n), trials))
}

/// Per-cell settings of a mass sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepPlan {
    pub fractions: Vec<f64>,
    pub trials_per_cell: usize,
    pub distribution: ConditionDistribution,
    pub search: SpeedSearch,
    /// Skip the nominal minimum-speed search.
    pub skip_min_speed: bool,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self {
            fractions: vec![0.0, 1.0 / 12.0, 1.0 / 6.0, 0.25],
            trials_per_cell: 40,
            distribution: ConditionDistribution::default(),
            search: SpeedSearch::default(),
            skip_min_speed: false,
        }
    }
}

impl SweepPlan {
    pub fn validate(&self) -> Result<(), String> {
        if self.fractions.is_empty() {
            return Err("fractions must not be empty".into());
        }
        if let Some(f) = self.fractions.iter().find(|f| !(0.0..1.0).contains(*f)) {
            return Err(format!("each fraction must lie in [0, 1), got {f}"));
        }
        self.distribution.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tip_mass_fraction: f64,
    pub n_trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Threshold speed of the nominal toss.
    pub min_speed_nominal: Option<f64>,
    /// Lowest measured impact speed among successful tosses.
    pub min_speed_empirical: Option<f64>,
    pub collide_count: usize,
    pub overlap_count: usize,
    /// Share of successes that ended overlapped; `None` without successes.
    pub overlap_share: Option<f64>,
    pub non_monotone: bool,
    /// Why the nominal search produced no speed.
    pub search_error: Option<String>,
}

impl SweepRow {
    /// Summarise one cell.
    pub fn from_cell(
        fraction: f64,
        trials: &[TrialResult],
        min_speed: Option<Result<MinSpeed, SearchError>>,
    ) -> Self {
        let n = trials.len();
        let count = |o: Outcome| trials.iter().filter(|t| t.outcome == o).count();
        let collide_count = count(Outcome::SuccessTipCollide);
        let overlap_count = count(Outcome::SuccessTipOverlap);
        let successes = collide_count + overlap_count;
        let rate = RateEstimate::from_counts(successes, n);
        let min_speed_empirical = trials
            .iter()
            .filter(|t| t.is_success())
            .filter_map(|t| t.measured_impact_speed)
            .reduce(f64::min);
        let (min_speed_nominal, non_monotone, search_error) = match min_speed {
            None => (None, false, None),
            Some(Ok(m)) => (Some(m.speed), m.non_monotone, None),
            Some(Err(e)) => (None, false, Some(e.to_string())),
        };
        Self {
            tip_mass_fraction: fraction,
            n_trials: n,
            successes,
            success_rate: rate.rate,
            ci_lo: rate.ci_lo,
            ci_hi: rate.ci_hi,
            min_speed_nominal,
            min_speed_empirical,
            collide_count,
            overlap_count,
            overlap_share: (successes > 0).then(|| overlap_count as f64 / successes as f64),
            non_monotone,
            search_error,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Trials of each row, in row order.
    pub trials: Vec<Vec<TrialResult>>,
}

impl SweepReport {
    /// Collide and overlap counts over all cells.
    pub fn pooled_split(&self) -> (usize, usize) {
        self.rows.iter().fold((0, 0), |(c, o), r| {
            (c + r.collide_count, o + r.overlap_count)
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("invalid sweep plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Trial(#[from] TrialError),
}

/// Evaluate `cell` for every fraction (possibly in parallel) and keep the
/// input order.
pub fn mass_sweep_with<T, F>(fractions: &[f64], cell: F) -> Result<Vec<T>, SweepError>
where
    T: Send,
    F: Fn(usize, f64) -> Result<T, SweepError> + Sync,
{
    if fractions.is_empty() {
        return Err(SweepError::Plan("fractions must not be empty".into()));
    }
    fractions
        .par_iter()
        .enumerate()
        .map(|(i, f)| cell(i, *f))
        .collect()
}

/// One row per tip-mass fraction: jittered success rate, nominal threshold
/// speed and collide/overlap split. Cell `i` draws its trials from
/// `trial_seed(master_seed, i)`.
pub fn mass_sweep(
    vehicle: &VehicleSpec,
    pole: &PoleSpec,
    material: &MaterialParams,
    params: &SimParams,
    plan: &SweepPlan,
    master_seed: u64,
) -> Result<SweepReport, SweepError> {
    plan.validate().map_err(SweepError::Plan)?;
    let cells = mass_sweep_with(&plan.fractions, |i, fraction| {
        let model = build_model(&vehicle.clone().with_tip_mass_fraction(fraction))?;
        let cell_seed = trial_seed(master_seed, i as u64);
        let (trials, min_speed) = rayon::join(
            || {
                run_trials(
                    &model,
                    pole,
                    material,
                    &plan.distribution,
                    params,
                    plan.trials_per_cell,
                    cell_seed,
                )
            },
            || {
                (!plan.skip_min_speed).then(|| {
                    let nominal = TrialConditions {
                        start_distance: plan.distribution.start_distance,
                        ..TrialConditions::head_on(plan.search.v_hi)
                    };
                    min_perch_speed(&model, pole, material, &nominal, params, &plan.search)
                })
            },
        );
        let trials = trials?;
        if let Some(Err(SearchError::Trial(e))) = &min_speed {
            return Err(e.clone().into());
        }
        Ok((SweepRow::from_cell(fraction, &trials, min_speed), trials))
    })?;
    let (rows, trials) = cells.into_iter().unzip();
    Ok(SweepReport { rows, trials })
}
