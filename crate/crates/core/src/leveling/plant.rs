use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::filter::{ImuSample, MovingAverageState, DEFAULT_WINDOW};
use super::LevelingError;

/// Lead-screw pitch stage: transport delay, first-order motor lag, and a
/// pitch-rate limit. The command is a pitch-rate demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatformPlant {
    /// Pitch rate per unit command, deg/s.
    pub gain: f64,
    /// Motor speed time constant, s. Zero makes the rate follow the command.
    pub motor_tau: f64,
    /// Pitch rate limit, deg/s.
    pub max_rate: f64,
    /// Transport delay between command and motor, s.
    pub delay: f64,
    /// Mechanical pitch travel either side of home, deg.
    pub authority: f64,
}

impl Default for PlatformPlant {
    fn default() -> Self {
        Self {
            gain: 1.0,
            motor_tau: 0.1,
            max_rate: 8.0,
            delay: 0.05,
            authority: 15.0,
        }
    }
}

impl PlatformPlant {
    /// Delayed integrator used to check the ultimate-gain search against
    /// closed-form values.
    pub fn delayed_integrator(gain: f64, delay: f64) -> Self {
        Self {
            gain,
            motor_tau: 0.0,
            max_rate: f64::INFINITY,
            delay,
            authority: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<(), LevelingError> {
        let checks = [
            ("plant.gain", self.gain, self.gain > 0.0 && self.gain.is_finite()),
            (
                "plant.motor_tau",
                self.motor_tau,
                self.motor_tau >= 0.0 && self.motor_tau.is_finite(),
            ),
            ("plant.max_rate", self.max_rate, self.max_rate > 0.0),
            ("plant.delay", self.delay, self.delay >= 0.0 && self.delay.is_finite()),
            ("plant.authority", self.authority, self.authority > 0.0),
        ];
        for (field, value, ok) in checks {
            if !ok {
                return Err(LevelingError::InvalidParameter {
                    field,
                    reason: format!("out of range: {value}"),
                });
            }
        }
        Ok(())
    }

    /// Command magnitude that drives the motor to its rate limit.
    pub fn command_limit(&self) -> f64 {
        self.max_rate / self.gain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantStep {
    pub pitch: f64,
    pub rate_saturated: bool,
    pub travel_saturated: bool,
}

/// Discrete-time state of a [`PlatformPlant`] at a fixed tick.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSim {
    params: PlatformPlant,
    tick: f64,
    pitch: f64,
    rate: f64,
    delay_line: VecDeque<f64>,
}

impl PlantSim {
    pub fn new(params: PlatformPlant, tick: f64) -> Self {
        let delay_ticks = (params.delay / tick).round() as usize;
        Self {
            params,
            tick,
            pitch: 0.0,
            rate: 0.0,
            delay_line: std::iter::repeat_n(0.0, delay_ticks).collect(),
        }
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn params(&self) -> &PlatformPlant {
        &self.params
    }

    pub fn step(&mut self, command: f64) -> PlantStep {
        self.delay_line.push_back(command);
        let delayed = self.delay_line.pop_front().unwrap_or(command);
        let demand = self.params.gain * delayed;
        if self.params.motor_tau > 0.0 {
            let alpha = 1.0 - (-self.tick / self.params.motor_tau).exp();
            self.rate += (demand - self.rate) * alpha;
        } else {
            self.rate = demand;
        }
        let mut out = PlantStep::default();
        if self.rate.abs() > self.params.max_rate {
            self.rate = self.rate.clamp(-self.params.max_rate, self.params.max_rate);
            out.rate_saturated = true;
        }
        self.pitch += self.rate * self.tick;
        if self.pitch.abs() > self.params.authority {
            self.pitch = self.pitch.clamp(-self.params.authority, self.params.authority);
            self.rate = 0.0;
            out.travel_saturated = true;
        }
        out.pitch = self.pitch;
        out
    }

    /// Open-loop move toward `target` at the rate limit. Clears the motor
    /// and delay state. Returns true once the target is reached.
    pub fn slew_toward(&mut self, target: f64) -> bool {
        let max_step = self.params.max_rate * self.tick;
        let diff = target - self.pitch;
        self.pitch += diff.clamp(-max_step, max_step);
        self.rate = 0.0;
        self.delay_line.iter_mut().for_each(|c| *c = 0.0);
        (target - self.pitch).abs() <= f64::EPSILON
    }
}

/// Settings for the sustained-oscillation search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UltimateGainSearch {
    pub tick: f64,
    /// Prefilter length in the loop; 1 disables filtering.
    pub filter_window: usize,
    /// Initial tilt used to excite the loop, deg.
    pub excitation: f64,
    pub min_gain: f64,
    pub max_gain: f64,
    /// Full cycles over which the amplitude ratio is measured.
    pub cycles: usize,
    /// Allowed per-cycle amplitude change at the reported gain.
    pub tolerance: f64,
    pub max_time: f64,
}

impl Default for UltimateGainSearch {
    fn default() -> Self {
        Self {
            tick: 0.01,
            filter_window: DEFAULT_WINDOW,
            excitation: 0.01,
            min_gain: 0.01,
            max_gain: 100.0,
            cycles: 10,
            tolerance: 0.05,
            max_time: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UltimateGain {
    pub ku: f64,
    pub tu: f64,
    /// Measured per-cycle amplitude ratio at `ku`.
    pub cycle_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Response {
    Decaying,
    Growing,
    Oscillating { ratio: f64, period: f64 },
}

const SKIPPED_HALF_CYCLES: usize = 2;

fn probe(plant: &PlatformPlant, search: &UltimateGainSearch, kp: f64) -> Response {
    let mut sim = PlantSim::new(*plant, search.tick);
    let mut filter = MovingAverageState::new(search.filter_window);
    let needed = SKIPPED_HALF_CYCLES + 2 * search.cycles + 1;
    let blowup = 50.0 * search.excitation;
    let steps = (search.max_time / search.tick).ceil() as usize;

    let mut peaks: Vec<(f64, f64)> = Vec::with_capacity(needed);
    let mut prev2 = f64::NAN;
    let mut prev1 = f64::NAN;
    for n in 0..steps {
        let t = n as f64 * search.tick;
        let alpha = search.excitation + sim.pitch();
        if alpha.abs() > blowup {
            return Response::Growing;
        }
        let mag = alpha.abs();
        if prev1 > prev2 && prev1 >= mag && prev1 > 0.0 {
            peaks.push((t - search.tick, prev1));
            if peaks.len() == needed {
                break;
            }
        }
        prev2 = prev1;
        prev1 = mag;
        let filtered = filter
            .push(ImuSample { t, alpha_raw: alpha })
            .expect("probe timestamps increase");
        let step = sim.step(-kp * filtered);
        if step.rate_saturated || step.travel_saturated {
            return Response::Growing;
        }
    }
    if peaks.len() < needed {
        return Response::Decaying;
    }
    let first = peaks[SKIPPED_HALF_CYCLES];
    let last = peaks[needed - 1];
    let ratio = (last.1 / first.1).powf(1.0 / search.cycles as f64);
    let period = (last.0 - first.0) / search.cycles as f64;
    if !ratio.is_finite() {
        return Response::Decaying;
    }
    Response::Oscillating { ratio, period }
}

fn is_unstable(r: Response) -> bool {
    match r {
        Response::Growing => true,
        Response::Decaying => false,
        Response::Oscillating { ratio, .. } => ratio > 1.0,
    }
}

/// Finds the proportional gain at which the prefiltered loop sustains a
/// constant-amplitude oscillation, by geometric bisection on the measured
/// per-cycle amplitude ratio.
pub fn find_ultimate_gain(plant: &PlatformPlant, search: &UltimateGainSearch) -> Result<UltimateGain, LevelingError> {
    plant.validate()?;
    if !(search.tick > 0.0 && search.min_gain > 0.0 && search.max_gain > search.min_gain) {
        return Err(LevelingError::InvalidParameter {
            field: "search",
            reason: "tick and gain range must be positive and ordered".into(),
        });
    }
    if !is_unstable(probe(plant, search, search.max_gain)) {
        return Err(LevelingError::NoOscillation {
            max_gain: search.max_gain,
        });
    }
    if is_unstable(probe(plant, search, search.min_gain)) {
        return Err(LevelingError::UnstableAtMinimumGain {
            min_gain: search.min_gain,
        });
    }
    let (mut lo, mut hi) = (search.min_gain, search.max_gain);
    while hi / lo > 1.0 + 1e-7 {
        let mid = (lo * hi).sqrt();
        if is_unstable(probe(plant, search, mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let ku = (lo * hi).sqrt();
    match probe(plant, search, ku) {
        Response::Oscillating { ratio, period } if (ratio - 1.0).abs() <= search.tolerance => Ok(UltimateGain {
            ku,
            tu: period,
            cycle_ratio: ratio,
        }),
        Response::Oscillating { ratio, .. } => Err(LevelingError::OscillationNotSustained { ratio }),
        _ => Err(LevelingError::OscillationNotSustained { ratio: f64::NAN }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delay_line_holds_commands() {
        let plant = PlatformPlant {
            motor_tau: 0.0,
            max_rate: f64::INFINITY,
            ..PlatformPlant::default()
        };
        let mut sim = PlantSim::new(plant, 0.01);
        for _ in 0..5 {
            assert_eq!(sim.step(1.0).pitch, 0.0);
        }
        assert!((sim.step(1.0).pitch - 0.01).abs() < 1e-15);
    }

    #[test]
    fn rate_limit_and_travel_flags() {
        let mut sim = PlantSim::new(PlatformPlant::default(), 0.01);
        let mut saw_rate = false;
        let mut saw_travel = false;
        for _ in 0..400 {
            let s = sim.step(100.0);
            saw_rate |= s.rate_saturated;
            saw_travel |= s.travel_saturated;
        }
        assert!(saw_rate && saw_travel);
        assert_eq!(sim.pitch(), 15.0);
    }

    #[test]
    fn slew_reaches_target() {
        let mut sim = PlantSim::new(PlatformPlant::default(), 0.01);
        let mut n = 0;
        while !sim.slew_toward(-4.0) {
            n += 1;
        }
        assert_eq!(sim.pitch(), -4.0);
        assert_eq!(n, 49);
    }

    #[test]
    fn deadbeat_plant_never_oscillates() {
        let plant = PlatformPlant::delayed_integrator(1.0, 0.0);
        let search = UltimateGainSearch {
            filter_window: 1,
            ..Default::default()
        };
        assert!(matches!(
            find_ultimate_gain(&plant, &search),
            Err(LevelingError::NoOscillation { .. })
        ));
    }
}
