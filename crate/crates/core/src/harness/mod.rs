//! Batch front end: load a config, run one of the experiments and write
//! byte-stable reports.

mod config;
mod report;

use std::fmt::Write as _;
use std::path::PathBuf;

pub use config::{ExperimentConfig, MaterialSection, TrialSection};
pub use report::{
    emit_reports, format_number, sha256_hex, sweep_csv, trajectory_csv, trials_csv, RunManifest,
    TrialRecord, SWEEP_HEADER, TRIALS_HEADER,
};

use crate::model::{build_model, ModelError};
use crate::trial::{
    mass_sweep, min_perch_speed, run_trial, run_trial_observed, SearchError, SweepError,
    SweepReport, SweepRow, TrajectoryRecorder, TrialConditions, TrialError,
};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "WINGWRAP_THREADS";

/// States kept per recorded trajectory: one every this many steps.
const TRAJECTORY_STRIDE: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid config:\n{0}")]
    Validation(String),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Trial(#[from] TrialError),
    #[error("minimum-speed search failed: {0}")]
    Search(#[from] SearchError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
}

impl HarnessError {
    /// Process exit status: 2 for bad input, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Validation(_) | HarnessError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// One toss with the configured conditions.
    Trial,
    /// The configured mass sweep.
    Sweep,
    /// One nominal minimum-speed search at the configured tip mass.
    MinSpeed,
    /// Full mass sweep with per-cell searches and the outcome split.
    ReplicatePaper,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Trial => "trial",
            Command::Sweep => "sweep",
            Command::MinSpeed => "min-speed",
            Command::ReplicatePaper => "replicate-paper",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub emit_trajectory: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
    /// Human-readable summary, also written to `summary.txt`.
    pub summary: String,
}

/// Load and check the config with the command-line overrides applied.
pub fn effective_config(inv: &Invocation) -> Result<ExperimentConfig, HarnessError> {
    let mut config = ExperimentConfig::load(&inv.config)?;
    if let Some(seed) = inv.seed {
        config.master_seed = seed;
    }
    if let Some(n) = inv.trials {
        if !matches!(inv.command, Command::Sweep | Command::ReplicatePaper) {
            return Err(HarnessError::Usage(format!(
                "--trials applies to sweep and replicate-paper, not {}",
                inv.command.name()
            )));
        }
        if n == 0 {
            return Err(HarnessError::Usage("--trials must be >= 1".into()));
        }
        config.plan.trials_per_cell = n;
    }
    if inv.command == Command::ReplicatePaper {
        config.plan.skip_min_speed = false;
    }
    config.validate()?;
    Ok(config)
}

/// Run a subcommand end to end. Nothing is written unless the config is
/// valid and the experiment completed.
pub fn run_command(inv: &Invocation) -> Result<RunOutcome, HarnessError> {
    let config = effective_config(inv)?;
    let out_dir = inv
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| HarnessError::Usage("no output directory: pass --out".into()))?;

    let (records, rows, summary) = match inv.command {
        Command::Trial => run_single(&config)?,
        Command::MinSpeed => run_min_speed(&config)?,
        Command::Sweep => run_sweep(&config, false)?,
        Command::ReplicatePaper => run_sweep(&config, true)?,
    };

    let mut files = vec![
        ("trials.csv".to_string(), trials_csv(&records)),
        ("sweep.csv".to_string(), sweep_csv(&rows)),
        ("summary.txt".to_string(), summary.clone().into_bytes()),
        ("config.toml".to_string(), config.to_toml_string().into_bytes()),
    ];
    if let Some(id) = inv.emit_trajectory {
        files.push(("trajectory.csv".to_string(), trajectory_of(&config, &records, id)?));
    }
    let manifest = emit_reports(&out_dir, &files, &config.hash())?;
    Ok(RunOutcome {
        out_dir,
        manifest,
        summary,
    })
}

type RunParts = (Vec<TrialRecord>, Vec<SweepRow>, String);

fn run_single(config: &ExperimentConfig) -> Result<RunParts, HarnessError> {
    let model = build_model(&config.vehicle)?;
    let conditions = config.trial.conditions(config.master_seed);
    let result = run_trial(&model, &config.pole, &config.material(), &conditions, &config.solver)?;
    let record = TrialRecord::new(0, &model, config.pole.friction_mu, result);
    let r = &record.result;
    let summary = format!(
        "trial: outcome {} | wrap left {} rad, right {} rad | settled {} at {} s | hold capacity {} N (holds {})\n",
        r.outcome,
        format_number(r.wrap_angle_left),
        format_number(r.wrap_angle_right),
        r.settled,
        format_number(r.settle_time),
        format_number(record.hold_capacity),
        record.holds,
    );
    Ok((vec![record], Vec::new(), summary))
}

fn run_min_speed(config: &ExperimentConfig) -> Result<RunParts, HarnessError> {
    let model = build_model(&config.vehicle)?;
    let material = config.material();
    let nominal = config.trial.conditions(config.master_seed);
    let search = &config.plan.search;
    let found = min_perch_speed(&model, &config.pole, &material, &nominal, &config.solver, search)?;

    // The two trials that certify the answer.
    let mut records = Vec::new();
    for v in [found.speed, found.speed - 2.0 * search.tol] {
        if v <= 0.0 {
            continue;
        }
        let conditions = TrialConditions {
            impact_speed: v,
            ..nominal
        };
        let result = run_trial(&model, &config.pole, &material, &conditions, &config.solver)?;
        records.push(TrialRecord::new(records.len(), &model, config.pole.friction_mu, result));
    }
    let mut row = SweepRow::from_cell(model.tip_mass_fraction, &[], Some(Ok(found.clone())));
    row.min_speed_empirical = None;
    let summary = format!(
        "min-speed: v* = {} m/s at tip mass fraction {} (tol {}, {} trials, non-monotone {})\n",
        format_number(found.speed),
        format_number(model.tip_mass_fraction),
        format_number(search.tol),
        found.evaluations,
        found.non_monotone,
    );
    Ok((records, vec![row], summary))
}

fn run_sweep(config: &ExperimentConfig, replicate: bool) -> Result<RunParts, HarnessError> {
    let report = mass_sweep(
        &config.vehicle,
        &config.pole,
        &config.material(),
        &config.solver,
        &config.plan,
        config.master_seed,
    )?;
    let mut records = Vec::new();
    for (row, trials) in report.rows.iter().zip(&report.trials) {
        let model = build_model(&config.vehicle.clone().with_tip_mass_fraction(row.tip_mass_fraction))?;
        for t in trials {
            records.push(TrialRecord::new(records.len(), &model, config.pole.friction_mu, t.clone()));
        }
    }
    let summary = sweep_summary(&report, replicate);
    Ok((records, report.rows, summary))
}

fn percent(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn speed(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

/// Table of the sweep, the collide/overlap split and, for the replication,
/// a trend comparison against the reference endpoints.
pub fn sweep_summary(report: &SweepReport, replicate: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>9} {:>6} {:>9} {:>17} {:>10} {:>10} {:>8} {:>8}",
        "tip_frac", "n", "success", "95% CI", "v*_nom", "v*_emp", "collide", "overlap"
    );
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:>9.4} {:>6} {:>9} {:>17} {:>10} {:>10} {:>8} {:>8}",
            r.tip_mass_fraction,
            r.n_trials,
            percent(r.success_rate),
            format!("[{}, {}]", percent(r.ci_lo), percent(r.ci_hi)),
            speed(r.min_speed_nominal),
            speed(r.min_speed_empirical),
            r.collide_count,
            r.overlap_count,
        );
        if let Some(e) = &r.search_error {
            let _ = writeln!(s, "          search: {e}");
        }
        if r.non_monotone {
            let _ = writeln!(s, "          search: non-monotone success in speed");
        }
    }
    let (collide, overlap) = report.pooled_split();
    let successes = collide + overlap;
    let share = |k: usize| {
        if successes == 0 {
            "-".to_string()
        } else {
            percent(k as f64 / successes as f64)
        }
    };
    let _ = writeln!(
        s,
        "success modes (pooled): tips collide {collide} ({}), wings overlap {overlap} ({})",
        share(collide),
        share(overlap)
    );
    if replicate {
        if let (Some(first), Some(last)) = (report.rows.first(), report.rows.last()) {
            let rate_up = last.success_rate > first.success_rate;
            let speeds: Vec<Option<f64>> = report.rows.iter().map(|r| r.min_speed_nominal).collect();
            let speed_down = speeds.iter().all(Option::is_some)
                && speeds.windows(2).all(|w| w[1] <= w[0]);
            let _ = writeln!(
                s,
                "trend vs reference (success <20% -> 80%, min speed 2.9 -> 2.4 m/s): \
                 success {} -> {} ({}), min speed {} -> {} m/s ({})",
                percent(first.success_rate),
                percent(last.success_rate),
                if rate_up { "increasing, agrees" } else { "not increasing, disagrees" },
                speed(first.min_speed_nominal),
                speed(last.min_speed_nominal),
                if speed_down { "weakly decreasing, agrees" } else { "not decreasing, disagrees" },
            );
        }
    }
    s
}

fn trajectory_of(
    config: &ExperimentConfig,
    records: &[TrialRecord],
    id: usize,
) -> Result<Vec<u8>, HarnessError> {
    let record = records.iter().find(|r| r.trial_id == id).ok_or_else(|| {
        HarnessError::Usage(format!(
            "--emit-trajectory {id}: no such trial (ids 0..{})",
            records.len()
        ))
    })?;
    let model = build_model(&config.vehicle.clone().with_tip_mass_fraction(record.tip_mass_fraction))?;
    let mut recorder = TrajectoryRecorder {
        stride: TRAJECTORY_STRIDE,
        states: Vec::new(),
    };
    run_trial_observed(
        &model,
        &config.pole,
        &config.material(),
        &record.result.conditions,
        &config.solver,
        &mut recorder,
    )?;
    Ok(trajectory_csv(&model, &recorder.states))
}
