use serde::{Deserialize, Serialize};

use super::layout::{LayoutSpec, PotShape};
use super::pump::PumpModel;
use super::SimError;

pub const STANDARD_GREENHOUSE: &str = "standard_greenhouse";
pub const HILLY_TERRAIN: &str = "hilly_terrain";
pub const COMPLEX_LIGHTING: &str = "complex_lighting";
pub const BUILTIN_ENVIRONMENTS: [&str; 3] = [STANDARD_GREENHOUSE, HILLY_TERRAIN, COMPLEX_LIGHTING];

/// Behavior of the trained detector in one environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorProfile {
    /// Probability that a pot in view survives the pipeline in a frame.
    pub accuracy: f64,
    /// Expected spurious detections surviving the pipeline per frame.
    pub fp_rate: f64,
    /// Per-frame inference latency, ms.
    pub inference_time: f64,
    /// Standard deviation of the box center on each image axis, px.
    pub center_noise_px: f64,
    /// Probability that a detected pot also yields an overlapping duplicate.
    pub duplicate_rate: f64,
    /// Share of raw spurious boxes whose shape the geometry check rejects.
    pub aspect_rejection: f64,
}

impl DetectorProfile {
    pub fn validate(&self) -> Result<(), SimError> {
        let unit = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        if !unit(self.accuracy) {
            return Err(SimError::invalid("detector_profile.accuracy", "must lie in [0, 1]"));
        }
        if !unit(self.fp_rate) {
            return Err(SimError::invalid("detector_profile.fp_rate", "must lie in [0, 1]"));
        }
        if !(self.inference_time.is_finite() && self.inference_time > 0.0) {
            return Err(SimError::invalid("detector_profile.inference_time", "must be positive"));
        }
        if !(self.center_noise_px.is_finite() && self.center_noise_px >= 0.0) {
            return Err(SimError::invalid(
                "detector_profile.center_noise_px",
                "must be non-negative",
            ));
        }
        if !unit(self.duplicate_rate) {
            return Err(SimError::invalid(
                "detector_profile.duplicate_rate",
                "must lie in [0, 1]",
            ));
        }
        if !(self.aspect_rejection.is_finite() && (0.0..1.0).contains(&self.aspect_rejection)) {
            return Err(SimError::invalid(
                "detector_profile.aspect_rejection",
                "must lie in [0, 1)",
            ));
        }
        if self.fp_rate / (1.0 - self.aspect_rejection) > 1.0 {
            return Err(SimError::invalid(
                "detector_profile.fp_rate",
                "raw spurious rate fp_rate / (1 - aspect_rejection) exceeds 1",
            ));
        }
        Ok(())
    }
}

/// Ground and route effects on the platform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerrainModel {
    /// Multiplier on the mechanical positioning jitter.
    pub jitter_scale: f64,
    /// Multiplier on the drive motor current.
    pub drive_load: f64,
}

impl Default for TerrainModel {
    fn default() -> Self {
        Self {
            jitter_scale: 1.0,
            drive_load: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    pub name: String,
    /// Ground slope across the platform roll axis, deg.
    pub slope: f64,
    /// Illumination interval, lux.
    pub lux_range: [f64; 2],
    pub detector_profile: DetectorProfile,
    pub pot_shape: PotShape,
    pub layout: LayoutSpec,
    pub pump: PumpModel,
    pub terrain: TerrainModel,
}

impl Environment {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.name.trim().is_empty() {
            return Err(SimError::invalid("environment.name", "must not be empty"));
        }
        if !(self.slope.is_finite() && self.slope >= 0.0) {
            return Err(SimError::invalid("environment.slope", "must be non-negative"));
        }
        let [lo, hi] = self.lux_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(SimError::invalid(
                "environment.lux_range",
                "bounds must be positive and ordered",
            ));
        }
        self.detector_profile.validate()?;
        self.pot_shape.validate()?;
        self.layout.validate()?;
        self.pump.validate()?;
        let t = self.terrain;
        if !(t.jitter_scale.is_finite() && t.jitter_scale >= 0.0) {
            return Err(SimError::invalid("terrain.jitter_scale", "must be non-negative"));
        }
        if !(t.drive_load.is_finite() && t.drive_load >= 0.0) {
            return Err(SimError::invalid("terrain.drive_load", "must be non-negative"));
        }
        Ok(())
    }

    pub fn is_flat(&self) -> bool {
        self.slope == 0.0
    }
}

const CIRCULAR_POT: PotShape = PotShape::Circular { diameter: 100.0 };
const RECTANGULAR_POT: PotShape = PotShape::Rectangular {
    length: 120.0,
    width: 80.0,
};

fn grid() -> LayoutSpec {
    LayoutSpec::Grid {
        rows: 4,
        cols: 5,
        spacing: 600.0,
    }
}

fn profile(accuracy: f64, fp_rate: f64, inference_time: f64, center_noise_px: f64) -> DetectorProfile {
    DetectorProfile {
        accuracy,
        fp_rate,
        inference_time,
        center_noise_px,
        duplicate_rate: 0.2,
        aspect_rejection: 0.34,
    }
}

/// One of the three reference environments.
pub fn build_environment(name: &str) -> Result<Environment, SimError> {
    let env = match name {
        STANDARD_GREENHOUSE => Environment {
            name: name.into(),
            slope: 0.0,
            lux_range: [500.0, 800.0],
            detector_profile: profile(0.987, 0.012, 32.0, 26.8),
            pot_shape: CIRCULAR_POT,
            layout: grid(),
            pump: PumpModel {
                flow_rate: 25.0,
                dispense_overshoot: 0.05,
                spray_radius: 48.0,
            },
            terrain: TerrainModel {
                jitter_scale: 1.0,
                drive_load: 1.0,
            },
        },
        HILLY_TERRAIN => Environment {
            name: name.into(),
            slope: 10.0,
            lux_range: [500.0, 800.0],
            detector_profile: profile(0.975, 0.021, 35.0, 26.8),
            pot_shape: RECTANGULAR_POT,
            layout: grid(),
            pump: PumpModel {
                flow_rate: 25.0,
                dispense_overshoot: 0.08,
                spray_radius: 42.0,
            },
            terrain: TerrainModel {
                jitter_scale: 1.35,
                drive_load: 1.15,
            },
        },
        COMPLEX_LIGHTING => Environment {
            name: name.into(),
            slope: 0.0,
            lux_range: [200.0, 1200.0],
            detector_profile: profile(0.960, 0.035, 38.0, 38.0),
            pot_shape: CIRCULAR_POT,
            layout: LayoutSpec::RandomPath {
                pots: 20,
                min_step: 400.0,
                max_step: 800.0,
                max_turn: 30.0,
                min_spacing: 400.0,
                max_attempts: 1000,
            },
            pump: PumpModel {
                flow_rate: 25.0,
                dispense_overshoot: 0.07,
                spray_radius: 48.0,
            },
            terrain: TerrainModel {
                jitter_scale: 1.0,
                drive_load: 1.3,
            },
        },
        other => return Err(SimError::UnknownEnvironment(other.to_string())),
    };
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid() {
        for name in BUILTIN_ENVIRONMENTS {
            let env = build_environment(name).unwrap();
            env.validate().unwrap();
            assert_eq!(env.layout.pot_count(), 20);
        }
    }

    #[test]
    fn hilly_has_slope_and_rectangular_pots() {
        let env = build_environment(HILLY_TERRAIN).unwrap();
        assert_eq!(env.slope, 10.0);
        assert_eq!(
            env.pot_shape,
            PotShape::Rectangular {
                length: 120.0,
                width: 80.0
            }
        );
    }

    #[test]
    fn greenhouse_is_flat_with_table_accuracy() {
        let env = build_environment(STANDARD_GREENHOUSE).unwrap();
        assert!(env.is_flat());
        assert_eq!(env.detector_profile.accuracy, 0.987);
    }

    #[test]
    fn complex_spacing_range() {
        let env = build_environment(COMPLEX_LIGHTING).unwrap();
        match env.layout {
            LayoutSpec::RandomPath { min_step, max_step, .. } => assert_eq!((min_step, max_step), (400.0, 800.0)),
            _ => panic!("expected a random path"),
        }
    }

    #[test]
    fn unknown_name_rejected() {
        assert!(matches!(
            build_environment("moon"),
            Err(SimError::UnknownEnvironment(_))
        ));
    }

    #[test]
    fn accuracy_out_of_range_names_field() {
        let mut env = build_environment(STANDARD_GREENHOUSE).unwrap();
        env.detector_profile.accuracy = 1.5;
        let err = env.validate().unwrap_err();
        assert!(err.to_string().contains("detector_profile.accuracy"));
    }
}
