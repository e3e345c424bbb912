use serde::{Deserialize, Serialize};

use super::pid::PidState;
use super::LevelingError;

/// Fraction of low-frequency drift removed by the foil shield.
pub const SHIELD_REDUCTION: f64 = 0.6;

/// Default recalibration threshold, degrees of accumulated drift.
pub const DEFAULT_RESET_THRESHOLD: f64 = 5.0;

/// Bookkeeping for gyro drift induced by motor-driver interference.
///
/// `cumulative_error` integrates the drift magnitude since the last
/// recalibration. It is also the bias the IMU currently carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftMonitor {
    pub cumulative_error: f64,
    pub reset_threshold: f64,
    pub shielded: bool,
    /// Unshielded drift rate, degrees per second. The sign sets the
    /// direction of the bias.
    pub drift_rate: f64,
}

impl Default for DriftMonitor {
    fn default() -> Self {
        Self {
            cumulative_error: 0.0,
            reset_threshold: DEFAULT_RESET_THRESHOLD,
            shielded: true,
            drift_rate: 0.0012,
        }
    }
}

impl DriftMonitor {
    pub fn new(drift_rate: f64, shielded: bool) -> Self {
        Self {
            drift_rate,
            shielded,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), LevelingError> {
        if !(self.reset_threshold.is_finite() && self.reset_threshold > 0.0) {
            return Err(LevelingError::InvalidParameter {
                field: "reset_threshold",
                reason: format!("must be positive, got {}", self.reset_threshold),
            });
        }
        if !self.drift_rate.is_finite() {
            return Err(LevelingError::InvalidParameter {
                field: "drift_rate",
                reason: "must be finite".into(),
            });
        }
        if !(self.cumulative_error.is_finite() && self.cumulative_error >= 0.0) {
            return Err(LevelingError::InvalidParameter {
                field: "cumulative_error",
                reason: "must be non-negative".into(),
            });
        }
        Ok(())
    }

    /// Drift magnitude after shielding, degrees per second.
    pub fn effective_rate(&self) -> f64 {
        let rate = self.drift_rate.abs();
        if self.shielded {
            rate * (1.0 - SHIELD_REDUCTION)
        } else {
            rate
        }
    }

    /// Signed bias the IMU reading currently carries.
    pub fn bias(&self) -> f64 {
        if self.drift_rate < 0.0 {
            -self.cumulative_error
        } else {
            self.cumulative_error
        }
    }
}

pub fn drift_update(mon: DriftMonitor, dt: f64) -> Result<DriftMonitor, LevelingError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(LevelingError::InvalidParameter {
            field: "dt",
            reason: format!("time step must be positive, got {dt}"),
        });
    }
    Ok(DriftMonitor {
        cumulative_error: mon.cumulative_error + mon.effective_rate() * dt,
        ..mon
    })
}

/// Zeroes the accumulated drift and the controller integral once the
/// threshold is reached.
pub fn maybe_recalibrate(mon: DriftMonitor, pid: PidState) -> (DriftMonitor, PidState, bool) {
    if mon.cumulative_error >= mon.reset_threshold {
        let mut pid = pid;
        pid.reset_integral();
        (
            DriftMonitor {
                cumulative_error: 0.0,
                ..mon
            },
            pid,
            true,
        )
    } else {
        (mon, pid, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unshielded_and_shielded_accumulation() {
        let m = drift_update(DriftMonitor::new(1.0, false), 3.0).unwrap();
        assert!((m.cumulative_error - 3.0).abs() < 1e-12);
        let m = drift_update(DriftMonitor::new(1.0, true), 3.0).unwrap();
        assert!((m.cumulative_error - 1.2).abs() < 1e-12);
    }

    #[test]
    fn zero_dt_rejected() {
        assert!(drift_update(DriftMonitor::default(), 0.0).is_err());
        assert!(drift_update(DriftMonitor::default(), -1.0).is_err());
    }

    #[test]
    fn recalibration_threshold() {
        let pid = PidState {
            integral: 3.0,
            ..Default::default()
        };
        let above = DriftMonitor {
            cumulative_error: 5.1,
            ..Default::default()
        };
        let (m, p, fired) = maybe_recalibrate(above, pid);
        assert!(fired);
        assert_eq!(m.cumulative_error, 0.0);
        assert_eq!(p.integral, 0.0);
        let (m2, _, again) = maybe_recalibrate(m, p);
        assert!(!again);
        assert_eq!(m2, m);

        let below = DriftMonitor {
            cumulative_error: 4.9,
            ..Default::default()
        };
        let (m, p, fired) = maybe_recalibrate(below, pid);
        assert!(!fired);
        assert_eq!(m, below);
        assert_eq!(p, pid);
    }

    #[test]
    fn negative_rate_gives_negative_bias() {
        let m = drift_update(DriftMonitor::new(-0.5, false), 2.0).unwrap();
        assert_eq!(m.cumulative_error, 1.0);
        assert_eq!(m.bias(), -1.0);
    }

    proptest! {
        #[test]
        fn drift_is_additive(rate in -1.0..1.0f64, a in 1e-3..100.0f64, b in 1e-3..100.0f64, shielded: bool) {
            let m = DriftMonitor::new(rate, shielded);
            let split = drift_update(drift_update(m, a).unwrap(), b).unwrap();
            let whole = drift_update(m, a + b).unwrap();
            prop_assert!((split.cumulative_error - whole.cumulative_error).abs() < 1e-9);
        }
    }
}
