use serde::{Deserialize, Serialize};

use super::report::{Outcome, ReportInputs, TrialReport};
use super::state::{AbortCause, MissionState};
use super::world::{step_mission, TraceEvent, World};
use super::{MissionError, RobotConfig};
use crate::leveling::PidGains;
use crate::sim::{BatteryState, Environment};

/// One independent trial: an environment and the seed that drives it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialJob {
    pub environment: Environment,
    pub trial: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    Sequential,
    /// Rayon worker pool. Falls back to sequential without the `parallel`
    /// feature.
    #[default]
    Parallel,
}

struct MissionRun {
    state: MissionState,
    report: TrialReport,
    trace: Vec<TraceEvent>,
}

fn run_mission(
    env: &Environment,
    cfg: &RobotConfig,
    gains: PidGains,
    trial: usize,
    seed: u64,
    battery: BatteryState,
    trace: bool,
) -> Result<MissionRun, MissionError> {
    let mut world = World::new(env, cfg, gains, seed)?;
    if trace {
        world = world.with_trace();
    }
    let dt = world.tick();
    let mut state = MissionState::start(battery);
    while !state.is_finished() {
        state = step_mission(state, &mut world, dt);
    }
    let outcome = match state.abort_cause {
        Some(c) => Outcome::Aborted(c),
        None => Outcome::Completed,
    };
    let report = TrialReport::build(ReportInputs {
        environment: &env.name,
        trial,
        seed,
        outcome,
        pots_total: world.layout().pots.len(),
        records: world.records().to_vec(),
        frames: *world.frame_stats(),
        mission_time_s: state.elapsed,
        energy_mah: world.energy_mah(),
        capacity_mah: cfg.battery.capacity_mah,
        flood_efficiency: cfg.mission.flood_efficiency,
        flood_range: cfg.mission.flood_efficiency_range,
    });
    Ok(MissionRun {
        state,
        report,
        trace: world.take_trace(),
    })
}

/// Run one mission from a full battery.
pub fn run_trial(
    env: &Environment,
    cfg: &RobotConfig,
    gains: PidGains,
    trial: usize,
    seed: u64,
) -> Result<TrialReport, MissionError> {
    Ok(run_mission(env, cfg, gains, trial, seed, cfg.battery.full(), false)?.report)
}

/// Like [`run_trial`], also returning every phase change.
pub fn run_trial_traced(
    env: &Environment,
    cfg: &RobotConfig,
    gains: PidGains,
    trial: usize,
    seed: u64,
) -> Result<(TrialReport, Vec<TraceEvent>), MissionError> {
    let run = run_mission(env, cfg, gains, trial, seed, cfg.battery.full(), true)?;
    Ok((run.report, run.trace))
}

fn map_jobs<T: Send>(
    jobs: &[TrialJob],
    mode: ExecMode,
    f: impl Fn(&TrialJob) -> Result<T, MissionError> + Sync + Send,
) -> Result<Vec<T>, MissionError> {
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            jobs.par_iter().map(f).collect()
        }
        _ => jobs.iter().map(f).collect(),
    }
}

/// Run all jobs. Output order matches `jobs` in both modes.
pub fn run_trials(
    jobs: &[TrialJob],
    cfg: &RobotConfig,
    gains: PidGains,
    mode: ExecMode,
) -> Result<Vec<TrialReport>, MissionError> {
    map_jobs(jobs, mode, |j| run_trial(&j.environment, cfg, gains, j.trial, j.seed))
}

pub fn run_trials_traced(
    jobs: &[TrialJob],
    cfg: &RobotConfig,
    gains: PidGains,
    mode: ExecMode,
) -> Result<Vec<(TrialReport, Vec<TraceEvent>)>, MissionError> {
    map_jobs(jobs, mode, |j| {
        run_trial_traced(&j.environment, cfg, gains, j.trial, j.seed)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnduranceReport {
    pub environment: String,
    pub missions: usize,
    pub pots_watered: usize,
    /// Operating time until the battery hit cutoff, min.
    pub runtime_min: f64,
    /// False when `max_missions` ran out before the battery did.
    pub depleted: bool,
}

/// Repeat missions on one battery until it reaches cutoff. Mission `k` uses
/// seed `seed ^ (k << 32)`.
pub fn simulate_endurance(
    env: &Environment,
    cfg: &RobotConfig,
    gains: PidGains,
    seed: u64,
    max_missions: usize,
) -> Result<EnduranceReport, MissionError> {
    let mut battery = cfg.battery.full();
    let mut elapsed = 0.0;
    let mut pots_watered = 0;
    let mut missions = 0;
    while missions < max_missions {
        let k = missions as u64;
        let run = run_mission(env, cfg, gains, missions, seed ^ (k << 32), battery, false)?;
        missions += 1;
        elapsed += run.state.elapsed;
        pots_watered += run.report.pots_watered;
        battery = run.state.battery;
        if run.state.abort_cause == Some(AbortCause::Depleted) {
            break;
        }
    }
    Ok(EnduranceReport {
        environment: env.name.clone(),
        missions,
        pots_watered,
        runtime_min: elapsed / 60.0,
        depleted: battery.depleted,
    })
}
