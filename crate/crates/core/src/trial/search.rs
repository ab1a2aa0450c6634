//! Bisection for the lowest impact speed at which a toss perches.

use serde::{Deserialize, Serialize};

use super::{run_trial, SimParams, TrialConditions, TrialError};
use crate::dynamics::MaterialParams;
use crate::model::{ArticulatedModel, PoleSpec};

const PRESCAN_POINTS: usize = 8;
const MAX_REFINEMENTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeedSearch {
    pub v_lo: f64,
    pub v_hi: f64,
    pub tol: f64,
}

impl Default for SpeedSearch {
    fn default() -> Self {
        Self {
            v_lo: 1.0,
            v_hi: 5.0,
            tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinSpeed {
    pub speed: f64,
    /// The pre-scan or the post-check saw success below a failure.
    pub non_monotone: bool,
    /// Number of predicate evaluations.
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("invalid search range: v_lo {v_lo}, v_hi {v_hi}, tol {tol}")]
    Range { v_lo: f64, v_hi: f64, tol: f64 },
    #[error("no success anywhere in [{v_lo}, {v_hi}] m/s")]
    NoSuccess { v_lo: f64, v_hi: f64 },
    #[error("already succeeds at the lower bound {v_lo} m/s")]
    SucceedsAtLowerBound { v_lo: f64 },
    #[error(transparent)]
    Trial(#[from] TrialError),
}

/// Lowest speed in `[v_lo, v_hi]` at which `succeeds` flips from false to
/// true, located to within `tol`.
///
/// Eight evenly spaced speeds are probed first; the lowest failure→success
/// pair brackets the bisection. The answer `v` always succeeds; `v - 2 tol`
/// is checked too, and if it also succeeds the search descends into the
/// lower bracket again and reports `non_monotone`.
pub fn min_perch_speed_with<F>(
    search: &SpeedSearch,
    mut succeeds: F,
) -> Result<MinSpeed, SearchError>
where
    F: FnMut(f64) -> Result<bool, SearchError>,
{
    let SpeedSearch { v_lo, v_hi, tol } = *search;
    if !(v_lo.is_finite() && v_hi.is_finite() && tol > 0.0 && v_lo > 0.0 && v_hi > v_lo) {
        return Err(SearchError::Range { v_lo, v_hi, tol });
    }
    let mut evaluations = 0;
    let mut eval = |v: f64| {
        evaluations += 1;
        succeeds(v)
    };

    let grid: Vec<f64> = (0..PRESCAN_POINTS)
        .map(|i| v_lo + (v_hi - v_lo) * i as f64 / (PRESCAN_POINTS - 1) as f64)
        .collect();
    let mut scan = Vec::with_capacity(PRESCAN_POINTS);
    for &v in &grid {
        scan.push(eval(v)?);
    }
    if scan[0] {
        return Err(SearchError::SucceedsAtLowerBound { v_lo });
    }
    let Some(first) = scan.iter().position(|s| *s) else {
        return Err(SearchError::NoSuccess { v_lo, v_hi });
    };
    let mut non_monotone = scan[first..].iter().any(|s| !s);

    let (mut lo, mut hi) = (grid[first - 1], grid[first]);
    let mut refinements = 0;
    loop {
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if eval(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let below = hi - 2.0 * tol;
        if below <= v_lo || refinements == MAX_REFINEMENTS || !eval(below)? {
            break;
        }
        // Success again further down: a lower transition hides between grid
        // points.
        non_monotone = true;
        refinements += 1;
        let floor = (below - 2.0 * tol).max(v_lo);
        if eval(floor)? {
            // Walk down until a failure brackets the transition.
            let mut step = 4.0 * tol;
            let mut top = floor;
            let mut bottom = (floor - step).max(v_lo);
            while bottom > v_lo && eval(bottom)? {
                top = bottom;
                step *= 2.0;
                bottom = (bottom - step).max(v_lo);
            }
            lo = bottom;
            hi = top;
        } else {
            lo = floor;
            hi = below;
        }
    }
    Ok(MinSpeed {
        speed: hi,
        non_monotone,
        evaluations,
    })
}

/// Minimum perching speed of the nominal (jitter-free) toss.
pub fn min_perch_speed(
    model: &ArticulatedModel,
    pole: &PoleSpec,
    material: &MaterialParams,
    nominal: &TrialConditions,
    params: &SimParams,
    search: &SpeedSearch,
) -> Result<MinSpeed, SearchError> {
    min_perch_speed_with(search, |v| {
        let conditions = TrialConditions {
            impact_speed: v,
            ..*nominal
        };
        Ok(run_trial(model, pole, material, &conditions, params)?.is_success())
    })
}
