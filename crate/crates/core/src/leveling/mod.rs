//! Platform leveling: tilt prefilter, PID, drift bookkeeping, the lead-screw
//! plant and closed-loop episodes.

pub mod drift;
pub mod episode;
pub mod filter;
pub mod pid;
pub mod plant;

pub use drift::{drift_update, maybe_recalibrate, DriftMonitor};
pub use episode::{run_leveling_episode, EpisodeSpec, LevelingLoop, LevelingTrace, LoopSettings, TraceRow};
pub use filter::{moving_average_step, ImuSample, MovingAverageState};
pub use pid::{
    pid_step, ziegler_nichols, ziegler_nichols_classic, DerivativeMode, PidController, PidGains, PidState, ZnVariant,
};
pub use plant::{find_ultimate_gain, PlantSim, PlatformPlant, UltimateGain, UltimateGainSearch};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LevelingError {
    #[error("timestamp {current} does not follow {previous}")]
    NonMonotonicTimestamp { previous: f64, current: f64 },
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("loop stays stable up to gain {max_gain}")]
    NoOscillation { max_gain: f64 },
    #[error("loop is already unstable at gain {min_gain}")]
    UnstableAtMinimumGain { min_gain: f64 },
    #[error("oscillation not sustained at the bracketed gain (cycle ratio {ratio})")]
    OscillationNotSustained { ratio: f64 },
    #[error("slope {slope} deg exceeds the {authority} deg actuator authority")]
    SlopeBeyondAuthority { slope: f64, authority: f64 },
}
