//! Prints the built-in environments' trial means and endurance runtimes.
//! Used to check the frozen simulator constants after changing them.

use irrigation_core::mission::{run_trials, simulate_endurance, ExecMode, RobotConfig, Summary, TrialJob};
use irrigation_core::sim::{build_environment, BUILTIN_ENVIRONMENTS};

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(42);
    let trials = 10;
    let cfg = RobotConfig::default();
    let gains = cfg.leveling.resolve_gains().expect("default plant tunes");
    let mut jobs = Vec::new();
    for name in BUILTIN_ENVIRONMENTS {
        let env = build_environment(name).expect("built-in");
        for i in 0..trials {
            jobs.push(TrialJob {
                environment: env.clone(),
                trial: i,
                seed: seed + i as u64,
            });
        }
    }
    let reports = run_trials(&jobs, &cfg, gains, ExecMode::Parallel).expect("trials run");
    for r in Summary::from_trials(&reports).rows {
        println!("{r:#?}");
    }
    for name in BUILTIN_ENVIRONMENTS {
        let env = build_environment(name).expect("built-in");
        let e = simulate_endurance(&env, &cfg, gains, seed, 1000).expect("endurance runs");
        let mission_min: Vec<f64> = reports
            .iter()
            .filter(|r| r.environment == name)
            .map(|r| r.mission_time_s / 60.0)
            .collect();
        println!(
            "{name}: runtime {:.2} min over {} missions, mission lengths {:?}",
            e.runtime_min, e.missions, mission_min
        );
    }
}
