use irrigation_core::config::{dump_config, parse_config, ConfigError, EnvSelection, ScenarioConfig};
use irrigation_core::mission::RobotConfig;
use irrigation_core::sim::{build_environment, HILLY_TERRAIN};
use proptest::prelude::*;

fn field_of(text: &str) -> String {
    match parse_config(text) {
        Err(ConfigError::Invalid { field, .. }) => field,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn empty_file_is_the_default_scenario() {
    assert_eq!(parse_config("").unwrap(), ScenarioConfig::default());
}

#[test]
fn dump_then_load_is_stable() {
    let texts = [
        "",
        "environment = \"hilly_terrain\"\ntrials = 3\nseed = 9\n",
        "environment = [\"complex_lighting\", \"standard_greenhouse\"]\n[robot.mission]\ntarget_volume = 80.0\n",
        "[robot.leveling.gains]\nkp = 5.0\nki = 1.0\nkd = 0.1\n",
        "environment = \"wet\"\n[[environments]]\nbase = \"hilly_terrain\"\nname = \"wet\"\nslope = 6.0\n[environments.pump]\nspray_radius = 30.0\n",
    ];
    for text in texts {
        let once = parse_config(text).unwrap();
        let dumped = dump_config(&once).unwrap();
        let twice = parse_config(&dumped).unwrap();
        assert_eq!(once, twice, "{text}");
        assert_eq!(dump_config(&twice).unwrap(), dumped);
    }
}

#[test]
fn base_entries_inherit_unlisted_keys() {
    let text = "environment = \"wet\"\n[[environments]]\nbase = \"hilly_terrain\"\nname = \"wet\"\nslope = 6.0\n";
    let cfg = parse_config(text).unwrap();
    let env = &cfg.resolve_environments().unwrap()[0];
    let hilly = build_environment(HILLY_TERRAIN).unwrap();
    assert_eq!(env.slope, 6.0);
    assert_eq!(env.detector_profile, hilly.detector_profile);
    assert_eq!(env.pump, hilly.pump);
}

#[test]
fn validation_errors_name_the_field() {
    let bad_acc = "environment = \"g\"\n[[environments]]\nbase = \"standard_greenhouse\"\nname = \"g\"\n[environments.detector_profile]\naccuracy = 1.5\n";
    assert_eq!(field_of(bad_acc), "detector_profile.accuracy");
    assert_eq!(field_of("trials = 0\n"), "trials");
    assert_eq!(field_of("environment = \"moon\"\n"), "environment");
    assert_eq!(
        field_of("[robot.mission]\ntarget_volume = -1.0\n"),
        "robot.mission.target_volume"
    );
    assert_eq!(
        field_of("[robot.leveling.control]\ntick = -1.0\n"),
        "robot.leveling.control.tick"
    );
    assert_eq!(
        field_of("[robot.leveling.plant]\ngain = 0.0\n"),
        "robot.leveling.plant.gain"
    );
    assert_eq!(
        field_of("[robot.battery]\ncapacity_mah = 0.0\n"),
        "robot.battery.capacity_mah"
    );
    assert_eq!(field_of("[robot.arm.geometry]\nl1 = -3.0\n"), "robot.arm.geometry.l1");
}

#[test]
fn unknown_keys_fail() {
    for text in [
        "trails = 1\n",
        "[robot]\nwheels = 4\n",
        "[robot.battery]\ncapacity = 1.0\n",
        "[[environments]]\nbase = \"hilly_terrain\"\nname = \"x\"\nfog = true\n",
    ] {
        assert!(parse_config(text).is_err(), "{text}");
    }
}

#[test]
fn selection_all_lists_builtins_then_customs() {
    let text = "[[environments]]\nbase = \"hilly_terrain\"\nname = \"steep\"\nslope = 12.0\n";
    let cfg = parse_config(text).unwrap();
    let names: Vec<String> = cfg
        .resolve_environments()
        .unwrap()
        .into_iter()
        .map(|e| e.name)
        .collect();
    assert_eq!(
        names,
        ["standard_greenhouse", "hilly_terrain", "complex_lighting", "steep"]
    );
    assert_eq!(
        EnvSelection::parse("hilly_terrain, complex_lighting"),
        EnvSelection::Many(vec!["hilly_terrain".into(), "complex_lighting".into()])
    );
}

proptest! {
    #[test]
    fn numeric_overrides_round_trip(trials in 1usize..1000, seed in 0u64..1 << 40, vol in 1.0..500.0f64) {
        let mut cfg = ScenarioConfig { trials, seed, ..ScenarioConfig::default() };
        cfg.robot = RobotConfig::default();
        cfg.robot.mission.target_volume = vol;
        let text = dump_config(&cfg).unwrap();
        prop_assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
