use wingwrap_core::dynamics::{MaterialParams, DEFAULT_SLIP_REGULARIZATION};
use wingwrap_core::trial::ConditionDistribution;
use wingwrap_core::{
    build_model, run_trial, success_rate, Outcome, PoleSpec, SimParams, TrialConditions, VehicleSpec,
};

fn material(pole: &PoleSpec) -> MaterialParams {
    MaterialParams::from_pole(pole, DEFAULT_SLIP_REGULARIZATION)
}

#[test]
fn heavy_tips_wrap_at_speed() {
    let model = build_model(&VehicleSpec::default().with_tip_mass_fraction(0.25)).unwrap();
    let pole = PoleSpec::default();
    let r = run_trial(&model, &pole, &material(&pole), &TrialConditions::head_on(3.0), &SimParams::default()).unwrap();
    assert!(r.outcome.is_success(), "{:?}", r.outcome);
    // A symmetric toss closes the wings tip to tip.
    assert_eq!(r.outcome, Outcome::SuccessTipCollide);
    assert!(r.wrap_angle_left >= 2.0 && r.wrap_angle_right >= 2.0);
    assert!((r.wrap_angle_left - r.wrap_angle_right).abs() < 1e-6);
    assert!(r.energy_at_end < r.energy_at_impact.unwrap());
    let v = r.measured_impact_speed.unwrap();
    assert!((v - 3.0).abs() < 0.05, "{v}");
}

#[test]
fn slow_light_toss_does_not_perch() {
    let model = build_model(&VehicleSpec::default()).unwrap();
    let pole = PoleSpec::default();
    let r = run_trial(&model, &pole, &material(&pole), &TrialConditions::head_on(1.2), &SimParams::default()).unwrap();
    assert!(!r.outcome.is_success(), "{:?}", r.outcome);
    assert!(matches!(r.outcome, Outcome::PartialWrap | Outcome::Bounce), "{:?}", r.outcome);
}

#[test]
fn repeated_trials_are_bit_identical() {
    let model = build_model(&VehicleSpec::default().with_tip_mass_fraction(1.0 / 6.0)).unwrap();
    let pole = PoleSpec::default();
    let c = TrialConditions {
        lateral_offset: 0.015,
        approach_angle: -0.05,
        ..TrialConditions::head_on(2.4)
    };
    let run = || run_trial(&model, &pole, &material(&pole), &c, &SimParams::default()).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.final_state.to_bytes(), b.final_state.to_bytes());
    assert_eq!(a, b);
}

#[test]
fn success_rate_ignores_worker_count() {
    let model = build_model(&VehicleSpec::default().with_tip_mass_fraction(0.25)).unwrap();
    let pole = PoleSpec::default();
    let m = material(&pole);
    let dist = ConditionDistribution::default();
    let params = SimParams::default();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| success_rate(&model, &pole, &m, &dist, &params, 4, 77).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a, b);
    assert_eq!(a.0.n, 4);
}
