use std::f64::consts::PI;

use irrigation_core::leveling::{
    drift_update, find_ultimate_gain, maybe_recalibrate, pid_step, run_leveling_episode, ziegler_nichols_classic,
    DriftMonitor, EpisodeSpec, LoopSettings, PidGains, PidState, PlatformPlant, UltimateGainSearch,
};
use proptest::prelude::*;

fn fine_search() -> UltimateGainSearch {
    UltimateGainSearch {
        tick: 0.001,
        filter_window: 1,
        ..UltimateGainSearch::default()
    }
}

#[test]
fn ultimate_gain_of_delayed_integrator() {
    for (k, d) in [(1.0, 0.2), (2.0, 0.1), (0.5, 0.3)] {
        let ug = find_ultimate_gain(&PlatformPlant::delayed_integrator(k, d), &fine_search()).unwrap();
        // Phase -90 deg from the integrator plus -90 deg from the delay at w = pi/(2d).
        let ku = PI / (2.0 * d * k);
        let tu = 4.0 * d;
        assert!((ug.ku - ku).abs() / ku < 0.05, "ku {} vs {ku}", ug.ku);
        assert!((ug.tu - tu).abs() / tu < 0.05, "tu {} vs {tu}", ug.tu);
    }
}

#[test]
fn zn_gains_on_delayed_integrator_settle() {
    let plant = PlatformPlant::delayed_integrator(1.0, 0.2);
    let ug = find_ultimate_gain(&plant, &fine_search()).unwrap();
    let g = ziegler_nichols_classic(ug.ku, ug.tu).unwrap();
    let mut spec = EpisodeSpec::new(10.0, 30.0, 0.001);
    spec.settings.filter_window = 1;
    let trace = run_leveling_episode(&plant, &g, &spec).unwrap();
    assert!(trace.response_time.is_some());
    assert!(trace.steady_state_error < 0.05, "{}", trace.steady_state_error);
}

#[test]
fn zn_classic_table() {
    let g = ziegler_nichols_classic(10.0, 0.5).unwrap();
    assert!((g.kp - 6.0).abs() < 1e-12);
    assert!((g.ki - 24.0).abs() < 1e-12);
    assert!((g.kd - 0.375).abs() < 1e-12);
}

fn default_gains() -> PidGains {
    let ug = find_ultimate_gain(&PlatformPlant::default(), &UltimateGainSearch::default()).unwrap();
    ziegler_nichols_classic(ug.ku, ug.tu).unwrap()
}

#[test]
fn step_response_with_sensor_noise() {
    let spec = EpisodeSpec {
        settings: LoopSettings::default(),
        drift: DriftMonitor::default(),
        seed: 42,
        ..EpisodeSpec::new(10.0, 10.0, 0.01)
    };
    let trace = run_leveling_episode(&PlatformPlant::default(), &default_gains(), &spec).unwrap();
    let rt = trace.response_time.unwrap();
    assert!((rt - 1.8).abs() <= 0.5, "{rt}");
    assert!(trace.steady_state_error <= 0.4);
}

#[test]
fn recalibration_at_threshold() {
    let mut mon = DriftMonitor::new(0.5, false);
    let mut pid = PidState::default();
    // 0.5 deg/s over 0.25 s steps adds exactly 0.125 deg each step.
    for step in 1..=40 {
        mon = drift_update(mon, 0.25).unwrap();
        let (m, p, reset) = maybe_recalibrate(mon, pid);
        assert_eq!(reset, step == 40, "step {step}");
        if reset {
            assert_eq!(mon.cumulative_error, 5.0);
        }
        mon = m;
        pid = p;
    }
    assert_eq!(mon.cumulative_error, 0.0);
}

#[test]
fn shield_removes_sixty_percent() {
    let rate = DriftMonitor::default().drift_rate;
    let mut open = DriftMonitor::new(rate, false);
    let mut shielded = DriftMonitor::new(rate, true);
    for _ in 0..1000 {
        open = drift_update(open, 0.01).unwrap();
        shielded = drift_update(shielded, 0.01).unwrap();
    }
    assert!((shielded.cumulative_error / open.cumulative_error - 0.4).abs() < 1e-12);
}

#[test]
fn filtered_tilt_tracks_for_ten_minutes() {
    let spec = EpisodeSpec {
        settings: LoopSettings::default(),
        drift: DriftMonitor::default(),
        seed: 9,
        ..EpisodeSpec::new(10.0, 600.0, 0.01)
    };
    let trace = run_leveling_episode(&PlatformPlant::default(), &default_gains(), &spec).unwrap();
    assert!(trace.max_estimation_error <= 0.5, "{}", trace.max_estimation_error);
}

proptest! {
    #[test]
    fn proportional_only_output(kp in 0.0..20.0f64, e in -10.0..10.0f64) {
        let (_, u) = pid_step(&PidGains::new(kp, 0.0, 0.0), PidState::default(), e, 0.0);
        prop_assert!((u + kp * e).abs() <= 1e-9 * (1.0 + (kp * e).abs()));
    }

    #[test]
    fn drift_is_monotone_until_reset(rate in 0.0..1.0f64, dt in 0.001..1.0f64, n in 1usize..200) {
        let mut mon = DriftMonitor::new(rate, false);
        let mut prev = 0.0;
        for _ in 0..n {
            mon = drift_update(mon, dt).unwrap();
            prop_assert!(mon.cumulative_error >= prev);
            prev = mon.cumulative_error;
            let (m, _, reset) = maybe_recalibrate(mon, PidState::default());
            if reset {
                prop_assert_eq!(m.cumulative_error, 0.0);
                prev = 0.0;
            }
            mon = m;
        }
    }
}
