use std::io::Write;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::drift::{drift_update, maybe_recalibrate, DriftMonitor};
use super::filter::{ImuSample, MovingAverageState, DEFAULT_WINDOW};
use super::pid::{DerivativeMode, PidController, PidGains};
use super::plant::{PlantSim, PlatformPlant};
use super::LevelingError;
use crate::sim::imu::simulate_imu;
use crate::sim::rng::{stream_rng, Stream};

/// Half-width of the level band, degrees.
pub const LEVEL_BAND: f64 = 0.5;

/// Sensor and controller settings shared by episodes and missions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopSettings {
    pub tick: f64,
    pub filter_window: usize,
    /// IMU white-noise standard deviation, deg.
    pub noise_sigma: f64,
    pub derivative_mode: DerivativeMode,
    pub recalibration: bool,
}

impl Default for LoopSettings {
    fn default() -> Self {
        Self {
            tick: 0.01,
            filter_window: DEFAULT_WINDOW,
            noise_sigma: 0.05,
            derivative_mode: DerivativeMode::OnError,
            recalibration: true,
        }
    }
}

impl LoopSettings {
    pub fn validate(&self) -> Result<(), LevelingError> {
        if !(self.tick.is_finite() && self.tick > 0.0) {
            return Err(LevelingError::InvalidParameter {
                field: "tick",
                reason: format!("must be positive, got {}", self.tick),
            });
        }
        if self.filter_window == 0 {
            return Err(LevelingError::InvalidParameter {
                field: "filter_window",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(LevelingError::InvalidParameter {
                field: "noise_sigma",
                reason: "must be non-negative".into(),
            });
        }
        Ok(())
    }
}

/// One control tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub alpha_raw: f64,
    pub alpha_filtered: f64,
    pub u: f64,
    pub recalibrated: bool,
    pub alpha_true: f64,
}

/// IMU, prefilter, PID and lead-screw stage advanced together at a fixed
/// tick. The platform roll is the terrain slope plus the stage pitch.
#[derive(Debug, Clone)]
pub struct LevelingLoop {
    settings: LoopSettings,
    plant: PlantSim,
    filter: MovingAverageState,
    truth_filter: MovingAverageState,
    pid: PidController,
    drift: DriftMonitor,
    rng: ChaCha8Rng,
    ticks: u64,
    recalibrations: usize,
    last_filtered: f64,
    last_estimation_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    pub t: f64,
    pub alpha_true: f64,
    pub alpha_raw: f64,
    pub alpha_filtered: f64,
    /// Filtered reading minus the same filter applied to the true roll.
    pub estimation_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutcome {
    pub row: TraceRow,
    pub estimation_error: f64,
    pub saturated: bool,
}

impl LevelingLoop {
    pub fn new(
        plant: PlatformPlant,
        gains: PidGains,
        drift: DriftMonitor,
        settings: LoopSettings,
        seed: u64,
    ) -> Result<Self, LevelingError> {
        plant.validate()?;
        gains.validate()?;
        drift.validate()?;
        settings.validate()?;
        let pid = PidController::new(gains)
            .with_output_limit(plant.command_limit())
            .with_derivative_mode(settings.derivative_mode);
        Ok(Self {
            settings,
            plant: PlantSim::new(plant, settings.tick),
            filter: MovingAverageState::new(settings.filter_window),
            truth_filter: MovingAverageState::new(settings.filter_window),
            pid,
            drift,
            rng: stream_rng(seed, Stream::Imu),
            ticks: 0,
            recalibrations: 0,
            last_filtered: 0.0,
            last_estimation_error: 0.0,
        })
    }

    pub fn time(&self) -> f64 {
        self.ticks as f64 * self.settings.tick
    }

    pub fn tick(&self) -> f64 {
        self.settings.tick
    }

    pub fn pitch(&self) -> f64 {
        self.plant.pitch()
    }

    pub fn drift(&self) -> &DriftMonitor {
        &self.drift
    }

    pub fn recalibrations(&self) -> usize {
        self.recalibrations
    }

    pub fn last_filtered(&self) -> f64 {
        self.last_filtered
    }

    pub fn last_estimation_error(&self) -> f64 {
        self.last_estimation_error
    }

    pub fn reset_controller(&mut self) {
        self.pid.reset();
    }

    fn sense(&mut self, slope: f64) -> Reading {
        let t = self.time();
        let alpha_true = slope + self.plant.pitch();
        let sample = simulate_imu(alpha_true, t, self.settings.noise_sigma, &self.drift, &mut self.rng);
        let alpha_filtered = self.filter.push(sample).expect("loop time increases");
        let truth = self
            .truth_filter
            .push(ImuSample {
                t,
                alpha_raw: alpha_true,
            })
            .expect("loop time increases");
        self.last_filtered = alpha_filtered;
        self.last_estimation_error = alpha_filtered - truth;
        Reading {
            t,
            alpha_true,
            alpha_raw: sample.alpha_raw,
            alpha_filtered,
            estimation_error: alpha_filtered - truth,
        }
    }

    fn finish_tick(&mut self) -> bool {
        self.drift = drift_update(self.drift, self.settings.tick).expect("tick is positive");
        self.ticks += 1;
        if !self.settings.recalibration {
            return false;
        }
        let (drift, pid_state, fired) = maybe_recalibrate(self.drift, self.pid.state);
        self.drift = drift;
        self.pid.state = pid_state;
        if fired {
            self.recalibrations += 1;
        }
        fired
    }

    /// Closed-loop tick: sense, filter, control, actuate.
    pub fn step(&mut self, slope: f64) -> TickOutcome {
        let reading = self.sense(slope);
        let u = self.pid.step(reading.alpha_filtered, reading.t);
        let plant = self.plant.step(u);
        let recalibrated = self.finish_tick();
        TickOutcome {
            row: TraceRow {
                t: reading.t,
                alpha_raw: reading.alpha_raw,
                alpha_filtered: reading.alpha_filtered,
                u,
                recalibrated,
                alpha_true: reading.alpha_true,
            },
            estimation_error: reading.estimation_error,
            saturated: plant.rate_saturated || plant.travel_saturated,
        }
    }

    /// Sensing-only tick with the stage held still.
    pub fn observe(&mut self, slope: f64) -> Reading {
        let reading = self.sense(slope);
        self.finish_tick();
        reading
    }

    /// Sensing tick while the stage slews open-loop toward `target`.
    /// Returns true once the stage is at the target.
    pub fn slew(&mut self, slope: f64, target: f64) -> (Reading, bool) {
        let reading = self.sense(slope);
        let done = self.plant.slew_toward(target);
        self.finish_tick();
        (reading, done)
    }
}

/// Settings of a single slope-step episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSpec {
    pub slope: f64,
    pub duration: f64,
    pub settings: LoopSettings,
    pub drift: DriftMonitor,
    pub band: f64,
    pub seed: u64,
}

impl EpisodeSpec {
    /// Noise-free, drift-free episode.
    pub fn new(slope: f64, duration: f64, tick: f64) -> Self {
        Self {
            slope,
            duration,
            settings: LoopSettings {
                tick,
                noise_sigma: 0.0,
                ..LoopSettings::default()
            },
            drift: DriftMonitor::new(0.0, true),
            band: LEVEL_BAND,
            seed: 0,
        }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.settings.noise_sigma = sigma;
        self
    }

    pub fn with_drift(mut self, drift: DriftMonitor) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelingTrace {
    pub rows: Vec<TraceRow>,
    pub band: f64,
    /// Start of the final uninterrupted stay inside the band; `None` when
    /// the episode ends outside it.
    pub response_time: Option<f64>,
    /// Largest absolute roll over the final quarter of the episode.
    pub steady_state_error: f64,
    pub max_estimation_error: f64,
    pub recalibrations: usize,
    pub saturation_events: usize,
}

impl LevelingTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "alpha_raw", "alpha_filtered", "u", "recalibrated", "alpha_true"])?;
        for r in &self.rows {
            w.write_record([
                r.t.to_string(),
                r.alpha_raw.to_string(),
                r.alpha_filtered.to_string(),
                r.u.to_string(),
                (r.recalibrated as u8).to_string(),
                r.alpha_true.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Time at which the series enters the band for good.
pub fn settling_time(rows: &[TraceRow], band: f64) -> Option<f64> {
    let last_out = rows.iter().rposition(|r| r.alpha_true.abs() > band);
    match last_out {
        None => rows.first().map(|r| r.t),
        Some(i) if i + 1 < rows.len() => Some(rows[i + 1].t),
        Some(_) => None,
    }
}

pub fn run_leveling_episode(
    plant: &PlatformPlant,
    gains: &PidGains,
    spec: &EpisodeSpec,
) -> Result<LevelingTrace, LevelingError> {
    if !(spec.duration.is_finite() && spec.duration > 0.0) {
        return Err(LevelingError::InvalidParameter {
            field: "duration",
            reason: format!("must be positive, got {}", spec.duration),
        });
    }
    if spec.slope.abs() > plant.authority {
        return Err(LevelingError::SlopeBeyondAuthority {
            slope: spec.slope,
            authority: plant.authority,
        });
    }
    let mut lp = LevelingLoop::new(*plant, *gains, spec.drift, spec.settings, spec.seed)?;
    let steps = (spec.duration / spec.settings.tick).round() as usize + 1;
    let mut rows = Vec::with_capacity(steps);
    let mut max_est = 0.0f64;
    let mut saturation_events = 0;
    let mut was_saturated = false;
    for _ in 0..steps {
        let out = lp.step(spec.slope);
        max_est = max_est.max(out.estimation_error.abs());
        if out.saturated && !was_saturated {
            saturation_events += 1;
        }
        was_saturated = out.saturated;
        rows.push(out.row);
    }
    let tail = &rows[(rows.len() * 3) / 4..];
    let sse = tail.iter().map(|r| r.alpha_true.abs()).fold(0.0, f64::max);
    Ok(LevelingTrace {
        response_time: settling_time(&rows, spec.band),
        steady_state_error: sse,
        max_estimation_error: max_est,
        recalibrations: lp.recalibrations(),
        saturation_events,
        band: spec.band,
        rows,
    })
}
