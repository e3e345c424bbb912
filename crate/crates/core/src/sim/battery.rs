use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subsystem {
    Compute,
    Drive,
    Leveling,
    Arm,
    Pump,
}

/// Current draw of each subsystem while active, mA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Draws {
    pub compute: f64,
    pub drive: f64,
    pub leveling: f64,
    pub arm: f64,
    pub pump: f64,
}

impl Default for Draws {
    fn default() -> Self {
        Self {
            compute: 1440.0,
            drive: 5500.0,
            leveling: 4000.0,
            arm: 1500.0,
            pump: 1800.0,
        }
    }
}

impl Draws {
    pub fn get(&self, s: Subsystem) -> f64 {
        match s {
            Subsystem::Compute => self.compute,
            Subsystem::Drive => self.drive,
            Subsystem::Leveling => self.leveling,
            Subsystem::Arm => self.arm,
            Subsystem::Pump => self.pump,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryModel {
    pub capacity_mah: f64,
    /// Open-circuit voltage when full, V.
    pub voltage_full: f64,
    /// Voltage at which the pack counts as empty, V.
    pub cutoff: f64,
    pub draws: Draws,
}

impl Default for BatteryModel {
    fn default() -> Self {
        Self {
            capacity_mah: 2400.0,
            voltage_full: 12.6,
            cutoff: 11.1,
            draws: Draws::default(),
        }
    }
}

impl BatteryModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.capacity_mah.is_finite() && self.capacity_mah > 0.0) {
            return Err(SimError::invalid("battery.capacity_mah", "must be positive"));
        }
        if !(self.cutoff.is_finite() && self.voltage_full.is_finite() && self.cutoff < self.voltage_full) {
            return Err(SimError::invalid("battery.cutoff", "must be below voltage_full"));
        }
        let d = self.draws;
        for (field, v) in [
            ("battery.draws.compute", d.compute),
            ("battery.draws.drive", d.drive),
            ("battery.draws.leveling", d.leveling),
            ("battery.draws.arm", d.arm),
            ("battery.draws.pump", d.pump),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::invalid(field, "must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn full(&self) -> BatteryState {
        BatteryState {
            charge_mah: self.capacity_mah,
            voltage: self.voltage_full,
            depleted: false,
        }
    }

    /// Linear state-of-charge curve from full to cutoff.
    pub fn voltage_at(&self, charge_mah: f64) -> f64 {
        let soc = (charge_mah / self.capacity_mah).clamp(0.0, 1.0);
        self.cutoff + (self.voltage_full - self.cutoff) * soc
    }
}

/// Subsystems drawing current during one step. The drive draw is scaled by
/// `drive_load` to account for grade and steering effort.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActiveSet {
    pub compute: bool,
    pub drive: bool,
    pub leveling: bool,
    pub arm: bool,
    pub pump: bool,
    pub drive_load: f64,
}

impl ActiveSet {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn current(&self, draws: &Draws) -> f64 {
        let mut ma = 0.0;
        if self.compute {
            ma += draws.compute;
        }
        if self.drive {
            ma += draws.drive * self.drive_load;
        }
        if self.leveling {
            ma += draws.leveling;
        }
        if self.arm {
            ma += draws.arm;
        }
        if self.pump {
            ma += draws.pump;
        }
        ma
    }

    pub fn contains(&self, s: Subsystem) -> bool {
        match s {
            Subsystem::Compute => self.compute,
            Subsystem::Drive => self.drive,
            Subsystem::Leveling => self.leveling,
            Subsystem::Arm => self.arm,
            Subsystem::Pump => self.pump,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub charge_mah: f64,
    pub voltage: f64,
    pub depleted: bool,
}

pub fn battery_step(
    model: &BatteryModel,
    state: BatteryState,
    active: &ActiveSet,
    dt: f64,
) -> Result<BatteryState, SimError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SimError::invalid("dt", "must be positive"));
    }
    let used = active.current(&model.draws) * dt / 3600.0;
    let charge = (state.charge_mah - used).max(0.0);
    let voltage = model.voltage_at(charge);
    Ok(BatteryState {
        charge_mah: charge,
        voltage,
        depleted: state.depleted || charge <= 0.0,
    })
}
