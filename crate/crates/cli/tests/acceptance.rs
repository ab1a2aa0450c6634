//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.
//!
//! Criteria 1-3 and 7 drive the `wingwrap` binary; the rest call the library.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wingwrap_core::dynamics::{
    linear_momentum, mass_matrix, step, total_energy, MaterialParams, State,
    DEFAULT_SLIP_REGULARIZATION,
};
use wingwrap_core::harness::format_number;
use wingwrap_core::hold::{GripState, HoldError, STANDARD_GRAVITY};
use wingwrap_core::model::{build_model, HingeSpec, PoleSpec, SegmentSpec, VehicleSpec, WingSpec};
use wingwrap_core::trial::{
    min_perch_speed, min_perch_speed_with, run_trial, SimParams, SpeedSearch, SweepPlan,
    TrialConditions,
};
use wingwrap_core::{
    capstan_tension_ratio, required_normal_force, slide_check, ArticulatedModel, Outcome,
};

const RUNTIME_BUDGET: Duration = Duration::from_secs(600);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// Parsed CSV: header plus rows of fields keyed by column name.
struct Table {
    rows: Vec<BTreeMap<String, String>>,
}

impl Table {
    fn read(path: &Path) -> Table {
        let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let mut lines = text.lines();
        let header: Vec<String> = lines.next().unwrap_or("").split(',').map(str::to_string).collect();
        let rows = lines
            .map(|l| header.iter().cloned().zip(l.split(',').map(str::to_string)).collect())
            .collect();
        Table { rows }
    }

    fn column(&self, name: &str) -> Vec<&str> {
        self.rows.iter().map(|r| r[name].as_str()).collect()
    }
}

struct CliRun {
    ok: bool,
    stderr: String,
    elapsed: Duration,
}

fn wingwrap(args: &[&str], threads: Option<usize>) -> CliRun {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wingwrap"));
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("WINGWRAP_THREADS", n.to_string()),
        None => cmd.env_remove("WINGWRAP_THREADS"),
    };
    let start = Instant::now();
    let out = cmd.output().expect("wingwrap binary runs");
    CliRun {
        ok: out.status.success(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        elapsed: start.elapsed(),
    }
}

fn material(pole: &PoleSpec) -> MaterialParams {
    MaterialParams::from_pole(pole, DEFAULT_SLIP_REGULARIZATION)
}

fn integrate(model: &ArticulatedModel, mut s: State, dt: f64, duration: f64, mut each: impl FnMut(&State)) -> State {
    let pole = PoleSpec::default();
    let m = material(&pole);
    for _ in 0..(duration / dt).round() as usize {
        s = step(model, &s, dt, &pole, &m).expect("step");
        each(&s);
    }
    s
}

fn moving_far_from_pole(model: &ArticulatedModel, rng: &mut ChaCha8Rng) -> State {
    let mut s = State::rest(model);
    s.q[0] = 5.0;
    s.q[2] = rng.gen_range(-3.0..3.0);
    s.v[0] = rng.gen_range(-2.0..2.0);
    s.v[1] = rng.gen_range(-2.0..2.0);
    s.v[2] = rng.gen_range(-1.0..1.0);
    for i in 3..model.dof() {
        s.q[i] = rng.gen_range(0.8..1.8);
        s.v[i] = rng.gen_range(-0.5..0.5);
    }
    s
}

// ---------------------------------------------------------------------------
// Criteria 1-3: the replication sweep.

struct Replication {
    sweep: Table,
    trials: Table,
    elapsed: Duration,
}

fn replicate(dir: &Path) -> Result<Replication, String> {
    let config = dir.join("replicate.toml");
    std::fs::write(&config, "master_seed = 42\n").unwrap();
    let out = dir.join("replicate");
    let run = wingwrap(
        &["replicate-paper", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()],
        None,
    );
    if !run.ok {
        return Err(format!("replicate-paper failed: {}", run.stderr.trim()));
    }
    Ok(Replication {
        sweep: Table::read(&out.join("sweep.csv")),
        trials: Table::read(&out.join("trials.csv")),
        elapsed: run.elapsed,
    })
}

fn rate(row: &BTreeMap<String, String>) -> f64 {
    row["success_rate"].parse().unwrap_or(f64::NAN)
}

fn criterion_1(r: &Replication) -> Verdict {
    let fractions = r.sweep.column("tip_mass_fraction");
    let counts: Vec<usize> = r.sweep.column("n_trials").iter().map(|n| n.parse().unwrap()).collect();
    let shape_ok = fractions == ["0", "0.0833333333", "0.166666667", "0.25"] && counts.iter().all(|&n| n == 40);
    let (first, last) = (rate(&r.sweep.rows[0]), rate(r.sweep.rows.last().unwrap()));
    let gain = last - first;
    let fast = r.elapsed <= RUNTIME_BUDGET;
    verdict(
        shape_ok && gain >= 0.30 && fast,
        format!(
            "success {:.3} -> {:.3} (gain {:.3}, need >= 0.30), rows {:?} x {:?}, runtime {:.0} s (budget {} s, {} worker threads)",
            first,
            last,
            gain,
            fractions,
            counts,
            r.elapsed.as_secs_f64(),
            RUNTIME_BUDGET.as_secs(),
            std::thread::available_parallelism().map_or(1, |n| n.get()),
        ),
    )
}

fn criterion_2(r: &Replication) -> Verdict {
    let speeds: Vec<Option<f64>> = r
        .sweep
        .column("min_speed_nominal_mps")
        .iter()
        .map(|s| s.parse().ok())
        .collect();
    let all: Option<Vec<f64>> = speeds.iter().copied().collect();
    let Some(v) = all else {
        return verdict(false, format!("missing nominal minimum speed: {speeds:?}"));
    };
    let monotone = v.windows(2).all(|w| w[1] <= w[0]);
    let in_range = [v[0], v[v.len() - 1]].iter().all(|x| (1.0..=5.0).contains(x));
    verdict(monotone && in_range, format!("v* = {v:?} m/s (weakly decreasing {monotone}, endpoints in [1, 5] {in_range})"))
}

fn symmetric_overlaps() -> Result<(usize, usize), String> {
    let pole = PoleSpec::default();
    let m = material(&pole);
    let params = SimParams::default();
    let mut overlaps = 0;
    let mut n = 0;
    for fraction in SweepPlan::default().fractions {
        let model = build_model(&VehicleSpec::default().with_tip_mass_fraction(fraction)).map_err(|e| e.to_string())?;
        for v in [2.0, 2.375, 2.75, 3.125, 3.5] {
            let result = run_trial(&model, &pole, &m, &TrialConditions::head_on(v), &params).map_err(|e| e.to_string())?;
            n += 1;
            overlaps += usize::from(result.outcome == Outcome::SuccessTipOverlap);
        }
    }
    Ok((n, overlaps))
}

fn criterion_3(r: &Replication) -> Verdict {
    let outcomes = r.trials.column("outcome");
    let collide = outcomes.iter().filter(|o| **o == "SuccessTipCollide").count();
    let overlap = outcomes.iter().filter(|o| **o == "SuccessTipOverlap").count();
    let successes = collide + overlap;
    let share = |k: usize| if successes == 0 { 0.0 } else { k as f64 / successes as f64 };
    let split_ok = outcomes.len() == 160 && share(collide) >= 0.10 && share(overlap) >= 0.10;
    match symmetric_overlaps() {
        Ok((n, symmetric_overlap)) => verdict(
            split_ok && n == 20 && symmetric_overlap == 0,
            format!(
                "{} trials: collide {collide} ({:.1}%), overlap {overlap} ({:.1}%) of {successes} successes; symmetric tosses: {symmetric_overlap} overlap in {n}",
                outcomes.len(),
                100.0 * share(collide),
                100.0 * share(overlap),
            ),
        ),
        Err(e) => verdict(false, format!("symmetric trials failed: {e}")),
    }
}

// ---------------------------------------------------------------------------
// Criterion 4: dynamics oracles.

fn energy_drift() -> f64 {
    let mut vehicle = VehicleSpec::default();
    for w in [&mut vehicle.left_wing, &mut vehicle.right_wing] {
        for h in &mut w.hinges {
            h.free_damping = 0.0;
        }
    }
    let model = build_model(&vehicle).unwrap();
    let pole = PoleSpec::default();
    let m = material(&pole);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s0 = moving_far_from_pole(&model, &mut rng);
    let e0 = total_energy(&model, &s0, &pole, &m);
    let mut worst: f64 = 0.0;
    integrate(&model, s0, 1e-4, 2.0, |s| {
        worst = worst.max((total_energy(&model, s, &pole, &m) - e0).abs() / e0);
    });
    worst
}

fn momentum_change() -> f64 {
    let model = build_model(&VehicleSpec::default().with_tip_mass_fraction(0.25)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut s0 = moving_far_from_pole(&model, &mut rng);
    // Into the stiff stops too.
    s0.v[3] = -6.0;
    s0.v[model.dof() - 1] = 8.0;
    let p0 = linear_momentum(&model, &s0);
    let mut worst: f64 = 0.0;
    integrate(&model, s0, SimParams::default().dt, 0.5, |s| {
        worst = worst.max((linear_momentum(&model, s) - p0).norm() / p0.norm());
    });
    worst
}

fn two_link_error() -> f64 {
    let hinge = HingeSpec {
        free_stiffness: 0.05,
        free_damping: 0.001,
        ..HingeSpec::default()
    };
    let wing = WingSpec::uniform(2, SegmentSpec::default(), hinge);
    // An immovable fuselage clamps both wing roots.
    let model = build_model(&VehicleSpec {
        fuselage_mass: 1e6,
        left_wing: wing.clone(),
        right_wing: wing,
        ..VehicleSpec::default()
    })
    .unwrap();
    let mut s = State::rest(&model);
    s.q[0] = 5.0;
    s.q[3] = 0.9;
    s.q[4] = 0.6;
    s.v[3] = 2.0;
    s.v[4] = -1.0;

    let sample = |dt: f64| {
        let stride = (0.01 / dt).round() as usize;
        let mut out = Vec::new();
        let mut n = 0;
        integrate(&model, s.clone(), dt, 1.0, |st| {
            n += 1;
            if n % stride == 0 {
                out.push([st.q[3], st.q[4]]);
            }
        });
        out
    };
    let coarse = sample(SimParams::default().dt);
    let reference = sample(1e-6);
    assert_eq!(coarse.len(), reference.len());
    coarse
        .iter()
        .zip(&reference)
        .flat_map(|(a, b)| [(a[0] - b[0]).abs(), (a[1] - b[1]).abs()])
        .fold(0.0, f64::max)
}

fn spd_failures() -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = 0;
    for i in 0..1000 {
        let fraction = [0.0, 1.0 / 12.0, 1.0 / 6.0, 0.25][i % 4];
        let model = build_model(&VehicleSpec::default().with_tip_mass_fraction(fraction)).unwrap();
        let mut s = State::rest(&model);
        s.q[0] = rng.gen_range(-2.0..2.0);
        s.q[1] = rng.gen_range(-2.0..2.0);
        s.q[2] = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        for j in 3..model.dof() {
            s.q[j] = rng.gen_range(-0.5..3.0);
        }
        let ok = mass_matrix(&model, &s).is_ok_and(|m| {
            (&m - m.transpose()).amax() <= 1e-12 * m.amax() && m.symmetric_eigen().eigenvalues.min() > 0.0
        });
        failures += usize::from(!ok);
    }
    failures
}

fn criterion_4() -> Verdict {
    let drift = energy_drift();
    let momentum = momentum_change();
    let traj = two_link_error();
    let spd = spd_failures();
    verdict(
        drift < 5e-3 && momentum <= 1e-9 && traj < 1e-3 && spd == 0,
        format!(
            "(a) energy drift {drift:.2e} (< 5e-3); (b) momentum change {momentum:.2e} (<= 1e-9); \
             (c) two-link error {traj:.2e} rad (< 1e-3); (d) {spd} of 1000 mass matrices not SPD"
        ),
    )
}

// ---------------------------------------------------------------------------
// Criterion 5: search contract.

fn criterion_5() -> Verdict {
    let search = SpeedSearch::default();
    let mut problems = Vec::new();
    for v_step in [1.3, 2.6, 2.9, 4.71] {
        match min_perch_speed_with(&search, |v| Ok(v >= v_step)) {
            Ok(found) if found.speed >= v_step && found.speed <= v_step + search.tol => {}
            other => problems.push(format!("stub step {v_step}: {other:?}")),
        }
    }

    let pole = PoleSpec::default();
    let m = material(&pole);
    let params = SimParams::default();
    let plan = SweepPlan::default();
    let nominal = TrialConditions {
        start_distance: plan.distribution.start_distance,
        ..TrialConditions::head_on(search.v_hi)
    };
    let mut found_speeds = Vec::new();
    for fraction in &plan.fractions {
        let model = build_model(&VehicleSpec::default().with_tip_mass_fraction(*fraction)).unwrap();
        let found = match min_perch_speed(&model, &pole, &m, &nominal, &params, &search) {
            Ok(f) => f,
            Err(e) => {
                problems.push(format!("fraction {fraction}: {e}"));
                continue;
            }
        };
        let at = |v: f64| {
            run_trial(&model, &pole, &m, &TrialConditions { impact_speed: v, ..nominal }, &params)
                .map(|r| r.outcome.is_success())
        };
        let above = at(found.speed);
        let below = at(found.speed - 2.0 * search.tol);
        if !matches!((&above, &below), (Ok(true), Ok(false))) {
            problems.push(format!(
                "fraction {fraction}: v* = {} succeeds {above:?}, v* - 2 tol succeeds {below:?}",
                found.speed
            ));
        }
        found_speeds.push(format_number(found.speed));
    }
    let pass = problems.is_empty();
    verdict(
        pass,
        if pass {
            format!("stub steps bracketed within tol; real v* {found_speeds:?} certified at all 4 masses")
        } else {
            problems.join("; ")
        },
    )
}

// ---------------------------------------------------------------------------
// Criterion 6: hold analysis.

fn criterion_6() -> Verdict {
    let mut worst: f64 = 0.0;
    for (mass, mu) in [(0.45, 0.6), (0.3, 0.25), (1.0, 1.0), (0.6, 0.05)] {
        let closed = mass * STANDARD_GRAVITY / mu;
        worst = worst.max((required_normal_force(mass, mu).unwrap() - closed).abs() / closed);
    }
    for (theta, mu) in [(0.0, 0.6), (std::f64::consts::PI, 0.5), (4.5, 0.6), (2.0f64.ln() / 0.5, 0.5)] {
        let closed = (mu * theta).exp();
        worst = worst.max((capstan_tension_ratio(theta, mu) - closed).abs() / closed);
    }
    let exact_two = (capstan_tension_ratio(2.0f64.ln() / 0.5, 0.5) - 2.0).abs();
    let frictionless = required_normal_force(0.45, 0.0) == Err(HoldError::Frictionless);
    let loose = slide_check(&GripState::new(vec![0.0; 6], 4.5, 0.6, 0.45));
    let empty = slide_check(&GripState::new(Vec::new(), 4.5, 0.6, 0.45));
    verdict(
        worst <= 1e-12 && exact_two <= 1e-12 && frictionless && !loose.holds && !empty.holds,
        format!(
            "closed-form error {worst:.1e} (<= 1e-12); zero squeeze holds = {} / {}; mu = 0 rejected {frictionless}",
            loose.holds, empty.holds
        ),
    )
}

// ---------------------------------------------------------------------------
// Criterion 7: byte-identical output across runs and worker counts.

const SMALL_CONFIG: &str = r#"master_seed = 2024

[plan]
fractions = [0.0, 0.25]
trials_per_cell = 4
skip_min_speed = true

[plan.search]
v_lo = 1.0
v_hi = 5.0
tol = 0.25
"#;

fn criterion_7(dir: &Path) -> Verdict {
    let config = dir.join("small.toml");
    std::fs::write(&config, SMALL_CONFIG).unwrap();
    let config = config.to_str().unwrap();
    let mut problems = Vec::new();
    let mut compared = 0;
    for (name, extra) in [
        ("trial", vec!["--emit-trajectory", "0"]),
        ("sweep", vec![]),
        ("min-speed", vec![]),
        ("replicate-paper", vec!["--trials", "3"]),
    ] {
        let mut outputs = Vec::new();
        for threads in [1, 2, 4] {
            let out = dir.join(format!("{name}-{threads}"));
            let mut args = vec![name, "--config", config, "--out", out.to_str().unwrap()];
            args.extend(&extra);
            let run = wingwrap(&args, Some(threads));
            if !run.ok {
                problems.push(format!("{name} with {threads} threads failed: {}", run.stderr.trim()));
                continue;
            }
            let mut files = BTreeMap::new();
            for entry in std::fs::read_dir(&out).unwrap() {
                let path = entry.unwrap().path();
                if path.extension().is_some_and(|e| e == "csv") {
                    files.insert(path.file_name().unwrap().to_owned(), std::fs::read(&path).unwrap());
                }
            }
            outputs.push((threads, files));
        }
        if let Some((_, first)) = outputs.first() {
            for (threads, files) in &outputs[1..] {
                if files != first {
                    problems.push(format!("{name}: CSVs differ between 1 and {threads} threads"));
                }
            }
            compared += first.len();
        }
    }
    let pass = problems.is_empty();
    verdict(
        pass,
        if pass {
            format!("trial, sweep, min-speed and replicate-paper: {compared} CSV files identical at 1, 2 and 4 threads")
        } else {
            problems.join("; ")
        },
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut verdicts: Vec<(u32, Verdict)> = Vec::new();
    let mut report = |n: u32, v: Verdict| {
        println!("criterion {n}: {} | {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        verdicts.push((n, v));
    };

    report(4, criterion_4());
    report(6, criterion_6());
    match replicate(dir.path()) {
        Ok(r) => {
            report(1, criterion_1(&r));
            report(2, criterion_2(&r));
            report(3, criterion_3(&r));
        }
        Err(e) => {
            for n in 1..=3 {
                report(n, verdict(false, e.clone()));
            }
        }
    }
    report(5, criterion_5());
    report(7, criterion_7(dir.path()));

    let failed: Vec<u32> = verdicts.iter().filter(|(_, v)| !v.pass).map(|(n, _)| *n).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", verdicts.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
