use serde::{Deserialize, Serialize};

use super::LevelingError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Target roll in degrees; zero is level.
    #[serde(default)]
    pub setpoint: f64,
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self {
            kp,
            ki,
            kd,
            setpoint: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), LevelingError> {
        for (name, g) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !(g.is_finite() && g >= 0.0) {
                return Err(LevelingError::InvalidParameter {
                    field: name,
                    reason: format!("gain must be finite and non-negative, got {g}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    /// Backward difference of the error signal.
    #[default]
    OnError,
    /// Backward difference of the negated measurement; no kick on setpoint
    /// changes.
    OnMeasurement,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    /// Trapezoidal integral of the error, degree-seconds.
    pub integral: f64,
    pub prev_error: Option<f64>,
    pub prev_measured: Option<f64>,
    pub prev_t: Option<f64>,
}

impl PidState {
    pub fn reset_integral(&mut self) {
        self.integral = 0.0;
    }
}

/// One controller update without integral clamping or output limits.
///
/// The first call has no time step, so it contributes neither integral nor
/// derivative.
pub fn pid_step(gains: &PidGains, state: PidState, measured: f64, t: f64) -> (PidState, f64) {
    step_inner(gains, state, measured, t, DerivativeMode::OnError, None)
}

fn step_inner(
    gains: &PidGains,
    mut state: PidState,
    measured: f64,
    t: f64,
    mode: DerivativeMode,
    integral_limit: Option<f64>,
) -> (PidState, f64) {
    let error = gains.setpoint - measured;
    let mut derivative = 0.0;
    if let (Some(prev_e), Some(prev_m), Some(prev_t)) = (state.prev_error, state.prev_measured, state.prev_t) {
        let dt = t - prev_t;
        if dt > 0.0 {
            state.integral += 0.5 * (error + prev_e) * dt;
            if let Some(lim) = integral_limit {
                state.integral = state.integral.clamp(-lim, lim);
            }
            derivative = match mode {
                DerivativeMode::OnError => (error - prev_e) / dt,
                DerivativeMode::OnMeasurement => -(measured - prev_m) / dt,
            };
        }
    }
    let u = gains.kp * error + gains.ki * state.integral + gains.kd * derivative;
    state.prev_error = Some(error);
    state.prev_measured = Some(measured);
    state.prev_t = Some(t);
    (state, u)
}

/// PID with integral clamping and symmetric output saturation.
#[derive(Debug, Clone, PartialEq)]
pub struct PidController {
    pub gains: PidGains,
    pub state: PidState,
    pub derivative_mode: DerivativeMode,
    /// Command magnitude limit; the integral term alone may not exceed it.
    pub output_limit: Option<f64>,
}

impl PidController {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            state: PidState::default(),
            derivative_mode: DerivativeMode::OnError,
            output_limit: None,
        }
    }

    pub fn with_output_limit(mut self, limit: f64) -> Self {
        self.output_limit = Some(limit);
        self
    }

    pub fn with_derivative_mode(mut self, mode: DerivativeMode) -> Self {
        self.derivative_mode = mode;
        self
    }

    pub fn step(&mut self, measured: f64, t: f64) -> f64 {
        let integral_limit = match self.output_limit {
            Some(lim) if self.gains.ki > 0.0 => Some(lim / self.gains.ki),
            _ => None,
        };
        let (state, u) = step_inner(
            &self.gains,
            self.state,
            measured,
            t,
            self.derivative_mode,
            integral_limit,
        );
        self.state = state;
        match self.output_limit {
            Some(lim) => u.clamp(-lim, lim),
            None => u,
        }
    }

    pub fn reset(&mut self) {
        self.state = PidState::default();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZnVariant {
    #[default]
    Classic,
    SomeOvershoot,
    NoOvershoot,
}

/// Closed-loop Ziegler-Nichols PID rules from the ultimate gain and period.
pub fn ziegler_nichols(ku: f64, tu: f64, variant: ZnVariant) -> Result<PidGains, LevelingError> {
    if !(ku.is_finite() && ku > 0.0) {
        return Err(LevelingError::InvalidParameter {
            field: "ku",
            reason: format!("must be positive, got {ku}"),
        });
    }
    if !(tu.is_finite() && tu > 0.0) {
        return Err(LevelingError::InvalidParameter {
            field: "tu",
            reason: format!("must be positive, got {tu}"),
        });
    }
    // (kp factor, Ti as a fraction of Tu, Td as a fraction of Tu)
    let (kp_f, ti_f, td_f) = match variant {
        ZnVariant::Classic => (0.6, 0.5, 0.125),
        ZnVariant::SomeOvershoot => (0.33, 0.5, 1.0 / 3.0),
        ZnVariant::NoOvershoot => (0.2, 0.5, 1.0 / 3.0),
    };
    let kp = kp_f * ku;
    Ok(PidGains::new(kp, kp / (ti_f * tu), kp * td_f * tu))
}

/// Classic table: `kp = 0.6 Ku`, `ki = 1.2 Ku / Tu`, `kd = 0.075 Ku Tu`.
pub fn ziegler_nichols_classic(ku: f64, tu: f64) -> Result<PidGains, LevelingError> {
    ziegler_nichols(ku, tu, ZnVariant::Classic)
}
