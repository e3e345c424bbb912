//! Seeded models of the physical world around the controller.

pub mod battery;
pub mod detector;
pub mod environment;
pub mod imu;
pub mod layout;
pub mod pump;
pub mod rng;

pub use battery::{battery_step, ActiveSet, BatteryModel, BatteryState, Draws, Subsystem};
pub use detector::{simulate_detection, Frame, PotInView, ViewGeometry};
pub use environment::{
    build_environment, DetectorProfile, Environment, TerrainModel, BUILTIN_ENVIRONMENTS, COMPLEX_LIGHTING,
    HILLY_TERRAIN, STANDARD_GREENHOUSE,
};
pub use imu::simulate_imu;
pub use layout::{generate_layout, LayoutSpec, Pot, PotLayout, PotShape};
pub use pump::{capture_fraction, dispense, Dispensed, PumpModel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("unknown environment '{0}'")]
    UnknownEnvironment(String),
    #[error("layout placement failed after {placed} pots ({attempts} attempts for the next)")]
    LayoutExhausted { placed: usize, attempts: usize },
}

impl SimError {
    pub(crate) fn invalid(field: &'static str, reason: &str) -> Self {
        SimError::InvalidParameter {
            field,
            reason: reason.to_string(),
        }
    }
}
