use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::plan::{plan_pot_service, Command, PlannedDetection};
use super::report::{FrameStats, IrrigationRecord};
use super::state::{AbortCause, MissionState, Phase, SkipCause};
use super::{MissionError, RobotConfig};
use crate::kinematics::{
    arm_to_pixel, calibrate_single_reference, forward_kinematics, solve_joints, ArmTarget, CalibrationState,
    JointAngles,
};
use crate::leveling::{LevelingLoop, PidGains};
use crate::sim::rng::{stream_rng, Stream};
use crate::sim::{
    battery_step, dispense, generate_layout, simulate_detection, ActiveSet, Dispensed, Environment, PotInView,
    PotLayout, ViewGeometry,
};

/// Phase change recorded for the optional trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    pub t: f64,
    pub pot: usize,
    pub from: Phase,
    pub to: Phase,
    pub alpha_true: f64,
    pub alpha_filtered: f64,
    pub voltage: f64,
    pub note: String,
}

/// Scratch state for the pot currently being served.
#[derive(Debug, Clone, Default)]
struct Visit {
    index: usize,
    /// True pot center in the arm frame, mm.
    pot_arm: (f64, f64),
    truth: Vec<PotInView>,
    arrived_at: f64,
    frames_done: usize,
    resenses: usize,
    frames: usize,
    tp_frames: usize,
    chosen: Option<PlannedDetection>,
    joints: Option<JointAngles>,
    leveled: bool,
    last_out_of_band: Option<f64>,
    in_band_for: f64,
    leveling_time: Option<f64>,
    hold_max_tilt: f64,
    move_time: f64,
    arm_return: f64,
    drive_time: f64,
    stage_home: bool,
    positioning_error: Option<f64>,
    poured: Option<Dispensed>,
}

/// Everything a mission touches besides its [`MissionState`].
#[derive(Debug, Clone)]
pub struct World<'a> {
    env: &'a Environment,
    cfg: &'a RobotConfig,
    layout: PotLayout,
    true_cal: CalibrationState,
    est_cal: CalibrationState,
    view: ViewGeometry,
    home: JointAngles,
    leveling: LevelingLoop,
    detector_rng: ChaCha8Rng,
    mech_rng: ChaCha8Rng,
    visit: Visit,
    consecutive_unreachable: usize,
    records: Vec<IrrigationRecord>,
    stats: FrameStats,
    energy_mah: f64,
    trace: Option<Vec<TraceEvent>>,
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma.max(0.0)).expect("finite sigma")
}

fn max_joint_travel(a: &JointAngles, b: &JointAngles) -> f64 {
    (a.theta1() - b.theta1())
        .abs()
        .max((a.theta2() - b.theta2()).abs())
        .max((a.theta3() - b.theta3()).abs())
}

impl<'a> World<'a> {
    pub fn new(env: &'a Environment, cfg: &'a RobotConfig, gains: PidGains, seed: u64) -> Result<Self, MissionError> {
        env.validate()?;
        cfg.validate()?;
        let layout = generate_layout(&env.layout, env.pot_shape, &mut stream_rng(seed, Stream::Layout))?;
        let true_cal = cfg.arm.calibration;
        let reference = ArmTarget::new(true_cal.delta_x, true_cal.delta_y, true_cal.z_const);
        let (u, v) = arm_to_pixel(&reference, &true_cal);
        let mut cal_rng = stream_rng(seed, Stream::Calibration);
        let n = normal(cfg.arm.calibration_noise_px);
        let observed = (u + n.sample(&mut cal_rng), v + n.sample(&mut cal_rng));
        let est_cal = calibrate_single_reference(observed, &reference, true_cal.scale, true_cal.u0, true_cal.v0)?;
        let home = solve_joints(&reference, &cfg.arm.geometry)?;
        let leveling = LevelingLoop::new(
            cfg.leveling.plant,
            gains,
            cfg.leveling.drift,
            cfg.leveling.control,
            seed,
        )?;
        let mut world = Self {
            env,
            cfg,
            layout,
            true_cal,
            est_cal,
            view: cfg.arm.view(),
            home,
            leveling,
            detector_rng: stream_rng(seed, Stream::Detector),
            mech_rng: stream_rng(seed, Stream::Mechanics),
            visit: Visit::default(),
            consecutive_unreachable: 0,
            records: Vec::new(),
            stats: FrameStats::default(),
            energy_mah: 0.0,
            trace: None,
        };
        world.begin_visit(0, 0.0);
        Ok(world)
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn tick(&self) -> f64 {
        self.leveling.tick()
    }

    pub fn layout(&self) -> &PotLayout {
        &self.layout
    }

    pub fn environment(&self) -> &Environment {
        self.env
    }

    pub fn config(&self) -> &RobotConfig {
        self.cfg
    }

    pub fn estimated_calibration(&self) -> &CalibrationState {
        &self.est_cal
    }

    pub fn records(&self) -> &[IrrigationRecord] {
        &self.records
    }

    pub fn frame_stats(&self) -> &FrameStats {
        &self.stats
    }

    pub fn energy_mah(&self) -> f64 {
        self.energy_mah
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.take().unwrap_or_default()
    }

    /// Arrive at pot `index`: draw the stop error and work out which pots the
    /// camera sees.
    fn begin_visit(&mut self, index: usize, now: f64) {
        let sigma = normal(self.cfg.mission.stop_error_sigma);
        let ex = sigma.sample(&mut self.mech_rng);
        let ey = sigma.sample(&mut self.mech_rng);
        let pot_arm = (self.true_cal.delta_x + ex, self.true_cal.delta_y + ey);
        let heading = self.layout.heading(index);
        let (s, c) = heading.sin_cos();
        let here = self.layout.pots[index];
        let mut truth = Vec::new();
        for p in &self.layout.pots {
            let (dx, dy) = (p.x - here.x, p.y - here.y);
            // World offset rotated into the chassis frame.
            let x = pot_arm.0 + c * dx + s * dy;
            let y = pot_arm.1 - s * dx + c * dy;
            let (u, v) = arm_to_pixel(&ArmTarget::new(x, y, self.true_cal.z_const), &self.true_cal);
            if self.view.contains(u, v) {
                truth.push(PotInView {
                    pot_id: p.id,
                    u,
                    v,
                    shape: p.shape,
                });
            }
        }
        self.visit = Visit {
            index,
            pot_arm,
            truth,
            arrived_at: now,
            stage_home: true,
            ..Visit::default()
        };
    }

    fn log(&mut self, state: &MissionState, to: Phase, alpha_true: f64, note: &str) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceEvent {
                t: state.elapsed,
                pot: state.pot_index,
                from: state.phase,
                to,
                alpha_true,
                alpha_filtered: self.leveling.last_filtered(),
                voltage: state.battery.voltage,
                note: note.to_string(),
            });
        }
    }

    fn finish_record(&mut self, now: f64, skipped: Option<SkipCause>) {
        let v = &self.visit;
        let pot_id = self.layout.pots[v.index].id;
        let (dispensed, delivered) = v.poured.map_or((0.0, 0.0), |d| (d.dispensed, d.delivered));
        self.records.push(IrrigationRecord {
            pot_id,
            detected: v.chosen.as_ref().is_some_and(|c| c.matched_pot == Some(pot_id)),
            skipped,
            positioning_error: v.positioning_error,
            dispensed,
            delivered,
            leveling_time: v.leveling_time,
            steady_state_error: if v.leveled { Some(v.hold_max_tilt) } else { None },
            frames: v.frames,
            tp_frames: v.tp_frames,
            arrived_at: v.arrived_at,
            finished_at: now,
        });
    }

    fn sense_frame(&mut self) {
        let profile = &self.env.detector_profile;
        let frame = simulate_detection(
            &self.visit.truth,
            profile,
            &self.view,
            &self.cfg.pipeline.bands,
            &mut self.detector_rng,
        );
        let kept = self.cfg.pipeline.run(&frame.detections).expect("pipeline validated");
        let plan = plan_pot_service(
            &kept,
            &self.visit.truth,
            &self.est_cal,
            &self.cfg.arm.geometry,
            self.cfg.mission.match_gate,
        );
        let current = self.layout.pots[self.visit.index].id;
        let matched = plan.iter().filter(|p| p.matched_pot.is_some()).count();
        self.stats.frames += 1;
        self.stats.pot_frames += self.visit.truth.len();
        self.stats.tp_pot_frames += matched;
        self.stats.false_positives += plan.len() - matched;
        self.stats.latency_ms += frame.latency_ms;
        self.visit.frames += 1;
        if plan.iter().any(|p| p.matched_pot == Some(current)) {
            self.visit.tp_frames += 1;
        }
        let expected = (self.est_cal.u0, self.est_cal.v0);
        let gate_px = self.cfg.mission.target_gate / self.est_cal.scale;
        if let Some(best) = plan
            .into_iter()
            .find(|p| (p.pixel.0 - expected.0).hypot(p.pixel.1 - expected.1) <= gate_px)
        {
            self.visit.chosen = Some(best);
        }
    }
}

fn transition(world: &mut World<'_>, state: &mut MissionState, to: Phase, alpha_true: f64, note: &str) {
    debug_assert!(state.phase.can_transition(to), "{} -> {}", state.phase, to);
    world.log(state, to, alpha_true, note);
    state.phase = to;
    state.phase_time = 0.0;
}

/// Leave the current pot for the next one.
fn start_advancing(world: &mut World<'_>, state: &mut MissionState, alpha_true: f64, skipped: Option<SkipCause>) {
    let now = state.elapsed;
    world.finish_record(now, skipped);
    let next = world.visit.index + 1;
    world.visit.drive_time = if next < world.layout.pots.len() {
        world.layout.leg(next) / world.cfg.mission.drive_speed
    } else {
        0.0
    };
    world.visit.arm_return = if world.visit.joints.is_some() {
        world.visit.move_time - world.cfg.mission.arm_settle
    } else {
        0.0
    };
    let note = skipped.map_or(String::new(), |c| format!("{c:?}"));
    transition(world, state, Phase::Advancing, alpha_true, &note);
}

fn skip_unreachable(world: &mut World<'_>, state: &mut MissionState, alpha_true: f64) {
    world.consecutive_unreachable += 1;
    if world.consecutive_unreachable > world.cfg.mission.max_consecutive_unreachable {
        world.finish_record(state.elapsed, Some(SkipCause::Unreachable));
        state.abort_cause = Some(AbortCause::Unreachable);
        transition(world, state, Phase::Aborted, alpha_true, "unreachable");
    } else {
        start_advancing(world, state, alpha_true, Some(SkipCause::Unreachable));
    }
}

fn enter_positioning(world: &mut World<'_>, state: &mut MissionState, alpha_true: f64, note: &str) {
    let joints = world.visit.joints.expect("positioning needs a joint command");
    world.visit.move_time =
        max_joint_travel(&world.home, &joints) / world.cfg.mission.joint_speed + world.cfg.mission.arm_settle;
    transition(world, state, Phase::Positioning, alpha_true, note);
}

/// Where the nozzle ends up relative to the pot, mm.
fn place_nozzle(world: &mut World<'_>, alpha_true: f64) -> (f64, f64) {
    let chosen = world.visit.chosen.as_ref().expect("positioning needs a target");
    let joints = world.visit.joints.expect("positioning needs a joint command");
    let commanded = forward_kinematics(&joints, &world.cfg.arm.geometry, chosen.target.z);
    let jitter = normal(world.cfg.mission.mech_jitter_sigma * world.env.terrain.jitter_scale);
    let jx = jitter.sample(&mut world.mech_rng);
    let jy = jitter.sample(&mut world.mech_rng);
    let lever = world.cfg.mission.nozzle_height * alpha_true.to_radians().tan();
    (
        commanded.x + jx - world.visit.pot_arm.0,
        commanded.y + jy + lever - world.visit.pot_arm.1,
    )
}

/// Advance the mission by one control tick of `dt` seconds.
///
/// `dt` must equal the leveling loop tick.
pub fn step_mission(state: MissionState, world: &mut World<'_>, dt: f64) -> MissionState {
    let mut state = state;
    if state.is_finished() {
        return state;
    }
    debug_assert!(
        (dt - world.tick()).abs() < 1e-12,
        "mission tick must match the control tick"
    );
    let slope = world.env.slope;
    let mp = world.cfg.mission;
    state.phase_time += dt;

    // Platform and IMU.
    let (alpha_true, alpha_filtered) = match state.phase {
        Phase::Leveling => {
            let out = world.leveling.step(slope);
            (out.row.alpha_true, out.row.alpha_filtered)
        }
        Phase::Positioning | Phase::Dispensing if world.visit.leveled => {
            let out = world.leveling.step(slope);
            let v = &mut world.visit;
            v.hold_max_tilt = v.hold_max_tilt.max(out.row.alpha_true.abs());
            (out.row.alpha_true, out.row.alpha_filtered)
        }
        Phase::Advancing => {
            let (r, home) = world.leveling.slew(slope, 0.0);
            world.visit.stage_home = home;
            (r.alpha_true, r.alpha_filtered)
        }
        _ => {
            let r = world.leveling.observe(slope);
            (r.alpha_true, r.alpha_filtered)
        }
    };

    // Power.
    let v = &world.visit;
    let holding = v.leveled && matches!(state.phase, Phase::Positioning | Phase::Dispensing);
    let active = ActiveSet {
        compute: true,
        drive: state.phase == Phase::Advancing && state.phase_time <= v.drive_time,
        leveling: state.phase == Phase::Leveling || holding || (state.phase == Phase::Advancing && !v.stage_home),
        arm: state.phase == Phase::Positioning || (state.phase == Phase::Advancing && state.phase_time <= v.arm_return),
        pump: state.phase == Phase::Dispensing,
        drive_load: world.env.terrain.drive_load,
    };
    let before = state.battery.charge_mah;
    state.battery = battery_step(&world.cfg.battery, state.battery, &active, dt).expect("dt is positive");
    world.energy_mah += before - state.battery.charge_mah;
    state.elapsed += dt;
    if state.battery.depleted {
        state.abort_cause = Some(AbortCause::Depleted);
        transition(world, &mut state, Phase::Aborted, alpha_true, "depleted");
        return state;
    }

    match state.phase {
        Phase::Sensing => {
            let frame_period = world.env.detector_profile.inference_time / 1000.0;
            while world.visit.frames_done < mp.frames_per_sense
                && state.phase_time + 1e-9 >= (world.visit.frames_done + 1) as f64 * frame_period
            {
                world.sense_frame();
                world.visit.frames_done += 1;
            }
            if world.visit.frames_done < mp.frames_per_sense {
                return state;
            }
            let Some(chosen) = world.visit.chosen.clone() else {
                if world.visit.resenses < mp.resense_attempts {
                    world.visit.resenses += 1;
                    world.visit.frames_done = 0;
                    transition(world, &mut state, Phase::Sensing, alpha_true, "resense");
                } else {
                    start_advancing(world, &mut state, alpha_true, Some(SkipCause::NotDetected));
                }
                return state;
            };
            match chosen.command {
                Command::Skipped(_) => skip_unreachable(world, &mut state, alpha_true),
                Command::Joints(j) => {
                    world.consecutive_unreachable = 0;
                    world.visit.joints = Some(j);
                    if alpha_filtered.abs() > mp.level_band {
                        transition(world, &mut state, Phase::Leveling, alpha_true, "");
                    } else {
                        enter_positioning(world, &mut state, alpha_true, "");
                    }
                }
            }
        }
        Phase::Leveling => {
            let v = &mut world.visit;
            if alpha_true.abs() > mp.level_band {
                v.last_out_of_band = Some(state.phase_time);
            }
            if alpha_filtered.abs() <= mp.level_band {
                v.in_band_for += dt;
            } else {
                v.in_band_for = 0.0;
            }
            if v.in_band_for + 1e-9 >= mp.level_hold {
                v.leveled = true;
                v.leveling_time = Some(v.last_out_of_band.unwrap_or(0.0));
                v.stage_home = false;
                enter_positioning(world, &mut state, alpha_true, "");
            } else if state.phase_time + 1e-9 >= mp.leveling_timeout {
                world.visit.stage_home = false;
                start_advancing(world, &mut state, alpha_true, Some(SkipCause::LevelingTimeout));
            }
        }
        Phase::Positioning => {
            if state.phase_time + 1e-9 >= world.visit.move_time {
                let offset = place_nozzle(world, alpha_true);
                let shape = world.layout.pots[world.visit.index].shape;
                let poured =
                    dispense(&world.env.pump, mp.target_volume, offset, &shape).expect("target volume validated");
                let v = &mut world.visit;
                v.positioning_error = Some(offset.0.hypot(offset.1));
                v.poured = Some(poured);
                transition(world, &mut state, Phase::Dispensing, alpha_true, "");
            }
        }
        Phase::Dispensing => {
            let poured = world.visit.poured.expect("dispensing has a volume");
            if state.phase_time + 1e-9 >= world.env.pump.duration(poured.dispensed) {
                start_advancing(world, &mut state, alpha_true, None);
            }
        }
        Phase::Advancing => {
            let v = &world.visit;
            if state.phase_time + 1e-9 >= v.drive_time.max(v.arm_return) && v.stage_home {
                let next = v.index + 1;
                if next >= world.layout.pots.len() {
                    transition(world, &mut state, Phase::Done, alpha_true, "");
                } else {
                    transition(world, &mut state, Phase::Sensing, alpha_true, "");
                    state.pot_index = next;
                    world.leveling.reset_controller();
                    world.begin_visit(next, state.elapsed);
                }
            }
        }
        Phase::Done | Phase::Aborted => {}
    }
    state
}
