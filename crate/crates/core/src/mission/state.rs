use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sim::BatteryState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Sensing,
    Leveling,
    Positioning,
    Dispensing,
    Advancing,
    Done,
    Aborted,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Sensing,
        Phase::Leveling,
        Phase::Positioning,
        Phase::Dispensing,
        Phase::Advancing,
        Phase::Done,
        Phase::Aborted,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Aborted)
    }

    /// Allowed phase changes. Skipping a pot goes straight to Advancing;
    /// any live phase may abort.
    pub fn can_transition(self, to: Phase) -> bool {
        use Phase::*;
        if self == to {
            return !self.is_terminal();
        }
        match (self, to) {
            (Done | Aborted, _) => false,
            (_, Aborted) => true,
            (Sensing, Leveling | Positioning | Advancing) => true,
            (Leveling, Positioning | Advancing) => true,
            (Positioning, Dispensing) => true,
            (Dispensing, Advancing) => true,
            (Advancing, Sensing | Done) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Sensing => "sensing",
            Phase::Leveling => "leveling",
            Phase::Positioning => "positioning",
            Phase::Dispensing => "dispensing",
            Phase::Advancing => "advancing",
            Phase::Done => "done",
            Phase::Aborted => "aborted",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipCause {
    NotDetected,
    Unreachable,
    LevelingTimeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortCause {
    Depleted,
    Unreachable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissionState {
    pub phase: Phase,
    pub pot_index: usize,
    /// Mission clock, s.
    pub elapsed: f64,
    /// Time spent in the current phase, s.
    pub phase_time: f64,
    pub battery: BatteryState,
    pub abort_cause: Option<AbortCause>,
}

impl MissionState {
    pub fn start(battery: BatteryState) -> Self {
        Self {
            phase: Phase::Sensing,
            pot_index: 0,
            elapsed: 0.0,
            phase_time: 0.0,
            battery,
            abort_cause: None,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.phase.is_terminal()
    }
}
