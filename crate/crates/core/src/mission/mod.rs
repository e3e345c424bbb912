//! Sense-plan-act mission loop and trial harness.

pub mod plan;
pub mod report;
pub mod state;
pub mod trial;
pub mod world;

use serde::{Deserialize, Serialize};

use crate::detect::{DetectError, PipelineConfig};
use crate::kinematics::{ArmGeometry, CalibrationState, KinematicsError};
use crate::leveling::{
    find_ultimate_gain, ziegler_nichols, DriftMonitor, LevelingError, LoopSettings, PidGains, PlatformPlant,
    UltimateGain, UltimateGainSearch, ZnVariant,
};
use crate::sim::{BatteryModel, SimError, ViewGeometry};

pub use plan::{match_detections, plan_pot_service, Command, PlannedDetection};
pub use report::{FrameStats, IrrigationRecord, Outcome, Summary, SummaryRow, TrialReport};
pub use state::{AbortCause, MissionState, Phase, SkipCause};
pub use trial::{
    run_trial, run_trial_traced, run_trials, run_trials_traced, simulate_endurance, EnduranceReport, ExecMode, TrialJob,
};
pub use world::{step_mission, TraceEvent, World};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MissionError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Leveling(#[from] LevelingError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: String, reason: String },
}

fn invalid(field: &str, reason: &str) -> MissionError {
    MissionError::InvalidParameter {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

/// Prefix the offending field with the config table it came from.
fn scoped<E: Into<MissionError>>(prefix: &str, r: Result<(), E>) -> Result<(), MissionError> {
    let e = match r {
        Ok(()) => return Ok(()),
        Err(e) => e.into(),
    };
    let (field, reason) = match e {
        MissionError::Leveling(LevelingError::InvalidParameter { field, reason })
        | MissionError::Kinematics(KinematicsError::InvalidParameter { field, reason })
        | MissionError::Sim(SimError::InvalidParameter { field, reason }) => (field.to_string(), reason),
        MissionError::InvalidParameter { field, reason } => (field, reason),
        MissionError::Detect(d) => return Err(invalid(prefix.trim_end_matches('.'), &d.to_string())),
        other => return Err(other),
    };
    let full = if prefix.ends_with(&format!("{field}.")) {
        prefix.trim_end_matches('.').to_string()
    } else {
        format!("{prefix}{field}")
    };
    Err(MissionError::InvalidParameter { field: full, reason })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmConfig {
    pub geometry: ArmGeometry,
    /// Actual camera-to-arm mapping. The robot estimates its own copy at
    /// the start of every trial.
    pub calibration: CalibrationState,
    pub image_width_px: f64,
    pub image_height_px: f64,
    /// Pixel noise when observing the calibration reference.
    pub calibration_noise_px: f64,
}

impl Default for ArmConfig {
    fn default() -> Self {
        Self {
            geometry: ArmGeometry::default(),
            calibration: CalibrationState::default(),
            image_width_px: 4000.0,
            image_height_px: 4000.0,
            calibration_noise_px: 1.5,
        }
    }
}

impl ArmConfig {
    pub fn view(&self) -> ViewGeometry {
        ViewGeometry {
            width_px: self.image_width_px,
            height_px: self.image_height_px,
            scale: self.calibration.scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelingConfig {
    pub plant: PlatformPlant,
    pub control: LoopSettings,
    pub drift: DriftMonitor,
    /// Fixed gains. When absent the gains come from a Ziegler-Nichols
    /// tuning run against `plant`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains: Option<PidGains>,
    pub zn_variant: ZnVariant,
    pub search: UltimateGainSearch,
}

impl Default for LevelingConfig {
    fn default() -> Self {
        Self {
            plant: PlatformPlant::default(),
            control: LoopSettings::default(),
            drift: DriftMonitor::default(),
            gains: None,
            zn_variant: ZnVariant::Classic,
            search: UltimateGainSearch::default(),
        }
    }
}

impl LevelingConfig {
    pub fn tune(&self) -> Result<(UltimateGain, PidGains), LevelingError> {
        let ug = find_ultimate_gain(&self.plant, &self.search)?;
        let gains = ziegler_nichols(ug.ku, ug.tu, self.zn_variant)?;
        Ok((ug, gains))
    }

    pub fn resolve_gains(&self) -> Result<PidGains, LevelingError> {
        match self.gains {
            Some(g) => {
                g.validate()?;
                Ok(g)
            }
            None => Ok(self.tune()?.1),
        }
    }
}

/// Timing, tolerances and error-budget terms of the mission loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionParams {
    pub target_volume: f64,
    pub frames_per_sense: usize,
    pub resense_attempts: usize,
    /// Detection-to-truth scoring gate, mm.
    pub match_gate: f64,
    /// Radius around the expected pot position searched for a target, mm.
    pub target_gate: f64,
    /// Half-width of the level band, deg.
    pub level_band: f64,
    /// Time the filtered tilt must stay in band before the arm moves, s.
    pub level_hold: f64,
    pub leveling_timeout: f64,
    /// Consecutive unreachable pots tolerated before aborting.
    pub max_consecutive_unreachable: usize,
    /// Chassis speed between stops, mm/s.
    pub drive_speed: f64,
    /// Arm joint speed, deg/s.
    pub joint_speed: f64,
    pub arm_settle: f64,
    /// Standard deviation of the chassis stop position per axis, mm.
    pub stop_error_sigma: f64,
    /// Standard deviation of the nozzle placement per axis, mm.
    pub mech_jitter_sigma: f64,
    /// Nozzle height above the pot rim, mm.
    pub nozzle_height: f64,
    /// Efficiency of the flood-irrigation baseline.
    pub flood_efficiency: f64,
    /// Range the baseline efficiency is reported over.
    pub flood_efficiency_range: [f64; 2],
}

impl Default for MissionParams {
    fn default() -> Self {
        Self {
            target_volume: 100.0,
            frames_per_sense: 10,
            resense_attempts: 1,
            match_gate: 100.0,
            target_gate: 100.0,
            level_band: 0.5,
            level_hold: 0.3,
            leveling_timeout: 10.0,
            max_consecutive_unreachable: 3,
            drive_speed: 150.0,
            joint_speed: 60.0,
            arm_settle: 0.2,
            stop_error_sigma: 15.0,
            mech_jitter_sigma: 3.0,
            nozzle_height: 200.0,
            flood_efficiency: 0.6,
            flood_efficiency_range: [0.5, 0.7],
        }
    }
}

impl MissionParams {
    pub fn validate(&self) -> Result<(), MissionError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        let checks: [(&'static str, bool); 15] = [
            ("mission.target_volume", pos(self.target_volume)),
            ("mission.frames_per_sense", self.frames_per_sense > 0),
            ("mission.match_gate", pos(self.match_gate)),
            ("mission.target_gate", pos(self.target_gate)),
            ("mission.level_band", pos(self.level_band)),
            ("mission.level_hold", nonneg(self.level_hold)),
            ("mission.leveling_timeout", pos(self.leveling_timeout)),
            ("mission.drive_speed", pos(self.drive_speed)),
            ("mission.joint_speed", pos(self.joint_speed)),
            ("mission.arm_settle", nonneg(self.arm_settle)),
            ("mission.stop_error_sigma", nonneg(self.stop_error_sigma)),
            ("mission.mech_jitter_sigma", nonneg(self.mech_jitter_sigma)),
            ("mission.nozzle_height", nonneg(self.nozzle_height)),
            (
                "mission.flood_efficiency",
                self.flood_efficiency > 0.0 && self.flood_efficiency <= 1.0,
            ),
            (
                "mission.flood_efficiency_range",
                self.flood_efficiency_range[0] > 0.0
                    && self.flood_efficiency_range[0] <= self.flood_efficiency_range[1]
                    && self.flood_efficiency_range[1] <= 1.0,
            ),
        ];
        for (field, ok) in checks {
            if !ok {
                return Err(invalid(field, "out of range"));
            }
        }
        Ok(())
    }
}

/// Everything about the robot that stays fixed across environments.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotConfig {
    pub pipeline: PipelineConfig,
    pub arm: ArmConfig,
    pub leveling: LevelingConfig,
    pub battery: BatteryModel,
    pub mission: MissionParams,
}

impl RobotConfig {
    pub fn validate(&self) -> Result<(), MissionError> {
        scoped("pipeline.", self.pipeline.validate())?;
        scoped("arm.geometry.", self.arm.geometry.validate())?;
        scoped("arm.calibration.", self.arm.calibration.validate())?;
        if !(self.arm.image_width_px > 0.0 && self.arm.image_height_px > 0.0) {
            return Err(invalid("arm.image_width_px", "image size must be positive"));
        }
        if !(self.arm.calibration_noise_px.is_finite() && self.arm.calibration_noise_px >= 0.0) {
            return Err(invalid("arm.calibration_noise_px", "must be non-negative"));
        }
        scoped("leveling.", self.leveling.plant.validate())?;
        scoped("leveling.control.", self.leveling.control.validate())?;
        scoped("leveling.drift.", self.leveling.drift.validate())?;
        if let Some(g) = self.leveling.gains {
            scoped("leveling.gains.", g.validate())?;
        }
        scoped("", self.battery.validate())?;
        self.mission.validate()
    }
}
